"""Mutable sampler state: topic indicators, count matrices, sparse phi.

The doc-topic counts m are dense per-document rows plus an explicit
nonzero-topic list per document (with a position index so removals are
O(1)); the topic-word counts n use the same dense-plus-list layout per
topic so nonzeros can be enumerated without scanning the vocabulary.
recount() rebuilds both from scratch and is the bookkeeping oracle.
"""

import os

import numpy as np

from . import backend, rng


class ConsistencyError(RuntimeError):
    """Internal sampler invariant breached; the run must abort."""


class TopicState:
    """Topic indicators z plus the m (doc x topic) and n (topic x word) counts."""

    def __init__(self, num_docs, num_topics, vocab_size):
        self.K = num_topics
        self.V = vocab_size
        self.z = None
        self.m = np.zeros((num_docs, num_topics), dtype=np.int32)
        self.m_list = np.zeros((num_docs, num_topics), dtype=np.int32)
        self.m_count = np.zeros(num_docs, dtype=np.int32)
        self.m_pos = np.full((num_docs, num_topics), -1, dtype=np.int32)
        self.n = np.zeros((num_topics, vocab_size), dtype=np.int32)
        self.n_list = np.zeros((num_topics, vocab_size), dtype=np.int32)
        self.n_count = np.zeros(num_topics, dtype=np.int32)
        self.n_pos = np.full((num_topics, vocab_size), -1, dtype=np.int32)
        self.n_tot = np.zeros(num_topics, dtype=np.int64)

    @classmethod
    def from_z(cls, corpus, z, num_topics):
        z = np.ascontiguousarray(z, dtype=np.int32)
        if z.size != corpus.num_tokens:
            raise ValueError("z must be token-parallel with the corpus")
        if z.size and (z.min() < 0 or z.max() >= num_topics):
            raise ValueError("topic id out of range")
        state = cls(corpus.num_docs, num_topics, corpus.vocab_size)
        state.z = z
        m, n = recount(corpus, z, num_topics)
        state.m[:] = m
        state.n[:] = n
        state.n_tot[:] = n.sum(axis=1)
        state._rebuild_lists()
        return state

    def _rebuild_lists(self):
        for d in range(self.m.shape[0]):
            ks = np.nonzero(self.m[d])[0]
            self.m_count[d] = len(ks)
            self.m_list[d, :len(ks)] = ks
            self.m_pos[d] = -1
            self.m_pos[d, ks] = np.arange(len(ks))
        for k in range(self.K):
            vs = np.nonzero(self.n[k])[0]
            self.n_count[k] = len(vs)
            self.n_list[k, :len(vs)] = vs
            self.n_pos[k] = -1
            self.n_pos[k, vs] = np.arange(len(vs))

    def row_nonzeros(self, k):
        """Sorted nonzero word ids of topic row k with their counts."""
        ids = np.sort(self.n_list[k, :self.n_count[k]]).astype(np.int32)
        return ids, self.n[k, ids].astype(np.int32)

    def validate(self, corpus):
        """Cheap conservation checks; raises ConsistencyError on breach."""
        lengths = corpus.doc_lengths()
        if not np.array_equal(self.m.sum(axis=1), lengths):
            raise ConsistencyError("m rows do not sum to document lengths")
        row = self.n.sum(axis=1)
        if not np.array_equal(row, self.n_tot):
            raise ConsistencyError("n row totals out of sync")
        if int(row.sum()) != corpus.num_tokens:
            raise ConsistencyError("n does not sum to the token count")

    def check_recount(self, corpus):
        """Full rebuild comparison (test oracle)."""
        m, n = recount(corpus, self.z, self.K)
        return np.array_equal(m, self.m) and np.array_equal(n, self.n)


def init_state(corpus, num_topics, seed):
    """Uniform random topic per token, statistics tallied consistently."""
    if num_topics < 1:
        raise ValueError("need at least one topic")
    z = np.empty(corpus.num_tokens, dtype=np.int32)
    state = rng.derive_state(seed, rng.INIT)
    backend.impl.randint_fill(state, num_topics, z)
    return TopicState.from_z(corpus, z, num_topics)


def recount(corpus, z, num_topics):
    """Rebuild (m, n) from scratch by tallying."""
    z = np.asarray(z)
    if z.size and (z.min() < 0 or z.max() >= num_topics):
        raise ValueError("topic id out of range")
    m = np.zeros((corpus.num_docs, num_topics), dtype=np.int32)
    n = np.zeros((num_topics, corpus.vocab_size), dtype=np.int32)
    doc_ids = np.repeat(np.arange(corpus.num_docs),
                        np.diff(corpus.doc_ptr).astype(np.int64))
    np.add.at(m, (doc_ids, z), 1)
    np.add.at(n, (z, corpus.tokens), 1)
    return m, n


class SparsePhi:
    """Column-indexed word-topic probabilities; zeros are structurally absent."""

    def __init__(self, col_ptr, col_topics, col_vals, num_topics, vocab_size):
        self.col_ptr = np.ascontiguousarray(col_ptr, dtype=np.int64)
        self.col_topics = np.ascontiguousarray(col_topics, dtype=np.int32)
        self.col_vals = np.ascontiguousarray(col_vals, dtype=np.float64)
        self.K = num_topics
        self.V = vocab_size

    @property
    def nnz(self):
        return self.col_vals.size

    @classmethod
    def from_dense(cls, phi):
        """Pack a dense K x V matrix as full columns (topics 0..K-1 each)."""
        num_topics, vocab_size = phi.shape
        col_ptr = np.arange(vocab_size + 1, dtype=np.int64) * num_topics
        col_topics = np.tile(np.arange(num_topics, dtype=np.int32), vocab_size)
        col_vals = np.ascontiguousarray(phi.T).ravel()
        return cls(col_ptr, col_topics, col_vals, num_topics, vocab_size)

    @classmethod
    def from_rows(cls, row_ids, row_vals, num_topics, vocab_size):
        """Assemble from per-topic sparse rows (ids ascending within a row)."""
        sizes = [ids.size for ids in row_ids]
        if sum(sizes) == 0:
            return cls(np.zeros(vocab_size + 1, np.int64),
                       np.empty(0, np.int32), np.empty(0, np.float64),
                       num_topics, vocab_size)
        all_v = np.concatenate(row_ids)
        all_k = np.repeat(np.arange(num_topics, dtype=np.int32), sizes)
        all_p = np.concatenate(row_vals)
        order = np.argsort(all_v, kind="stable")   # keeps topics ascending per column
        col_ptr = np.zeros(vocab_size + 1, dtype=np.int64)
        np.cumsum(np.bincount(all_v, minlength=vocab_size), out=col_ptr[1:])
        return cls(col_ptr, all_k[order], all_p[order], num_topics, vocab_size)

    def column(self, v):
        lo, hi = self.col_ptr[v], self.col_ptr[v + 1]
        return self.col_topics[lo:hi], self.col_vals[lo:hi]

    def column_size(self, v):
        return int(self.col_ptr[v + 1] - self.col_ptr[v])

    def lookup(self, v, k):
        """phi[k, v]; exactly 0.0 for structurally absent entries."""
        topics, vals = self.column(v)
        i = np.searchsorted(topics, k)
        if i < topics.size and topics[i] == k:
            return float(vals[i])
        return 0.0

    def row_sums(self):
        out = np.zeros(self.K)
        np.add.at(out, self.col_topics, self.col_vals)
        return out

    def to_dense(self):
        out = np.zeros((self.K, self.V))
        cols = np.repeat(np.arange(self.V),
                         np.diff(self.col_ptr).astype(np.int64))
        out[self.col_topics, cols] = self.col_vals
        return out


class ATableSet:
    """Per-word alias tables over phi[:, v] * alpha with their sums sigma_a."""

    def __init__(self, phi, sigma_a, prob, alias):
        self.phi = phi
        self.sigma_a = sigma_a
        self.prob = prob
        self.alias = alias

    def sample(self, v, rng_):
        """Topic draw proportional to phi[k, v] * alpha[k] (test surface)."""
        lo = int(self.phi.col_ptr[v])
        n = self.phi.column_size(v)
        if n == 0:
            raise ValueError(f"word {v} has an empty column")
        idx = backend.impl.alias_draw(rng_.state, self.prob[lo:lo + n],
                                      self.alias[lo:lo + n])
        return int(self.phi.col_topics[lo + idx])


def rebuild_a_tables(phi, alpha):
    """Build the word-global prior bucket: one sparse table per word type."""
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    if alpha.size != phi.K:
        raise ValueError("alpha must have one entry per topic")
    sigma_a = np.zeros(phi.V)
    prob = np.empty(phi.nnz)
    alias = np.empty(phi.nnz, np.int32)
    maxcol = int(np.diff(phi.col_ptr).max()) if phi.V else 0
    pbuf = np.empty(max(maxcol, 1))
    small = np.empty(max(maxcol, 1), np.int32)
    large = np.empty(max(maxcol, 1), np.int32)
    backend.impl.build_atables(phi.col_ptr, phi.col_topics, phi.col_vals,
                               alpha, sigma_a, prob, alias, pbuf, small, large)
    return ATableSet(phi, sigma_a, prob, alias)


# ------------------------------------------------------------------ snapshots

def save_snapshot(directory, meta, m, n):
    """Write the model snapshot: flat manifest plus sparse triplet files."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "model.txt"), "w", encoding="utf-8") as f:
        for key, value in meta.items():
            f.write(f"{key} = {value}\n")
    with open(os.path.join(directory, "n.txt"), "w", encoding="utf-8") as f:
        for k, v in zip(*np.nonzero(n)):
            f.write(f"{k} {v} {n[k, v]}\n")
    with open(os.path.join(directory, "m.txt"), "w", encoding="utf-8") as f:
        for d, k in zip(*np.nonzero(m)):
            f.write(f"{d} {k} {m[d, k]}\n")


def load_snapshot(directory):
    """Read a snapshot back; returns (meta, m, n)."""
    meta = {}
    with open(os.path.join(directory, "model.txt"), encoding="utf-8") as f:
        for line in f:
            if "=" in line:
                key, _, value = line.partition("=")
                meta[key.strip()] = value.strip()
    num_topics = int(meta["K"])
    vocab_size = int(meta["V"])
    num_docs = int(meta["D"])
    n = np.zeros((num_topics, vocab_size), dtype=np.int32)
    with open(os.path.join(directory, "n.txt"), encoding="utf-8") as f:
        for line in f:
            if line.strip():
                k, v, c = map(int, line.split())
                n[k, v] = c
    m = np.zeros((num_docs, num_topics), dtype=np.int32)
    with open(os.path.join(directory, "m.txt"), encoding="utf-8") as f:
        for line in f:
            if line.strip():
                d, k, c = map(int, line.split())
                m[d, k] = c
    return meta, m, n
