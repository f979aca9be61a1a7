"""Gibbs samplers: the urn-based variant, its Dirichlet-draw parent, and the
fully collapsed baseline.

Iterations are bulk-synchronous with two barriers: phase A draws the
word-topic rows (parallel over topics) and rebuilds the per-word alias
tables; phase B resamples topic indicators over disjoint document shards,
buffering topic-word count deltas that are merged at the barrier.  Every
phase draws from streams derived from (seed, phase, iteration, index), so
trajectories depend only on the seed and the shard rule, never on thread
scheduling.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from . import backend, diagnostics, rng
from .randdist import PoissonAliasCache
from .stats import (ATableSet, ConsistencyError, SparsePhi, TopicState,
                    init_state, rebuild_a_tables)

VARIANTS = ("pu", "pc", "collapsed")

# counter slots filled by the token kernels
COUNTER_FIELDS = ("b_bucket_work", "sparsity_bound", "a_bucket_hits",
                  "fallback_count")


@dataclass
class SamplerConfig:
    variant: str = "pu"
    K: int = 10
    alpha: object = 0.1          # positive scalar, or one value per topic
    beta: float = 0.01
    iterations: int = 1000
    seed: int = 0
    workers: int = 1
    L: int = PoissonAliasCache.DEFAULT_LIMIT

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.L < 0:
            raise ValueError("L must be >= 0")
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        if alpha.size not in (1, self.K) or np.any(alpha <= 0):
            raise ValueError("alpha must be a positive scalar or K-vector")

    def alpha_vector(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        if alpha.size == 1:
            return np.full(self.K, float(alpha[0]))
        return np.ascontiguousarray(alpha)

    def scalar_alpha(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        if alpha.size != 1:
            raise ValueError("this operation needs a symmetric (scalar) alpha")
        return float(alpha[0])


@dataclass
class IterationMetrics:
    iteration: int
    log_joint: float
    phi_phase_seconds: float
    z_phase_seconds: float
    b_bucket_work: int
    sparsity_bound: int
    a_bucket_hits: int
    fallback_count: int
    phi_redraws: int = 0
    n_deltas: int = 0


def make_shards(doc_ptr, n_shards):
    """Contiguous document blocks balanced by token count (the shard rule)."""
    num_docs = len(doc_ptr) - 1
    total = int(doc_ptr[-1])
    shards = []
    lo = 0
    for s in range(1, n_shards + 1):
        target = (s * total) // n_shards
        hi = lo
        while hi < num_docs and doc_ptr[hi + 1] <= target:
            hi += 1
        if s == n_shards:
            hi = num_docs
        shards.append((lo, hi))
        lo = hi
    return shards


# ------------------------------------------------------------- phi-phase draws

def _ppu_row(state, ids, counts, beta, vocab_size, cache):
    """One urn row with buffer-overflow retry (state restored, never resampled)."""
    expected_block = beta * (vocab_size - ids.size)
    cap = ids.size + max(64, int(2.0 * expected_block
                                 + 10.0 * math.sqrt(expected_block + 1.0)))
    while True:
        saved = state.copy()
        out_ids = np.empty(cap, np.int32)
        out_counts = np.empty(cap, np.int64)
        nz_ids = np.empty(ids.size, np.int32)
        nz_counts = np.empty(ids.size, np.int64)
        rank_buf = np.empty(cap, np.int64)
        n_out, total, redraws = backend.impl.ppu_row_draw(
            state, ids, counts, beta, vocab_size, cache.offsets, cache.prob,
            cache.alias, cache.limit, out_ids, out_counts, nz_ids, nz_counts,
            rank_buf)
        if n_out >= 0:
            return out_ids[:n_out], out_counts[:n_out], total, redraws
        state[:] = saved
        cap *= 2


def draw_phi_pu(n, beta, cache, rng_=None, seed=None, iteration=0,
                executor=None):
    """Sparse word-topic rows from the urn with rates beta + count.

    ``n`` is a TopicState or a dense (K, V) count matrix.  Pass ``rng_`` for a
    single sequential stream, or ``seed`` to derive one stream per row (the
    parallel path used inside iterations).
    """
    if beta != cache.beta:
        raise ValueError("cache was built for a different beta")
    if hasattr(n, "row_nonzeros"):
        num_topics, vocab_size = n.K, n.V
        row_nz = n.row_nonzeros
    else:
        n = np.ascontiguousarray(n, dtype=np.int32)
        num_topics, vocab_size = n.shape

        def row_nz(k):
            ids = np.nonzero(n[k])[0].astype(np.int32)
            return ids, n[k, ids]

    redraws = 0
    row_ids = [None] * num_topics
    row_vals = [None] * num_topics

    def one(k):
        if rng_ is not None:
            st = rng_.state
        else:
            st = rng.derive_state(seed, rng.PHI, iteration, k)
        ids, counts = row_nz(k)
        out_ids, out_counts, total, rd = _ppu_row(st, ids, counts, beta,
                                                  vocab_size, cache)
        return k, out_ids, out_counts / total, rd

    if executor is not None and rng_ is None:
        results = executor.map(one, range(num_topics))
    else:
        results = map(one, range(num_topics))
    for k, ids, vals, rd in results:
        row_ids[k] = ids
        row_vals[k] = vals
        redraws += rd
    phi = SparsePhi.from_rows(row_ids, row_vals, num_topics, vocab_size)
    return phi, redraws


def draw_phi_pc(n, beta, rng_=None, seed=None, iteration=0, executor=None):
    """Dense word-topic rows: each row Dirichlet with concentration n_k + beta."""
    if hasattr(n, "n"):
        n = n.n
    n = np.ascontiguousarray(n, dtype=np.int32)
    num_topics, vocab_size = n.shape
    phi = np.empty((num_topics, vocab_size))

    def one(k):
        if rng_ is not None:
            st = rng_.state
        else:
            st = rng.derive_state(seed, rng.PHI, iteration, k)
        backend.impl.gamma_row(st, n[k], beta, phi[k])

    if executor is not None and rng_ is None:
        list(executor.map(one, range(num_topics)))
    else:
        for k in range(num_topics):
            one(k)
    return phi


# ------------------------------------------------------------------ token draw

def draw_z_token(word, m_row, phi, alpha, a_tables, rng_, counters=None):
    """Draw one topic proportional to phi[k, word] * (alpha_k + m_row[k]).

    ``m_row`` must already exclude the token being resampled.  The draw
    splits into the precomputed prior bucket (alias-sampled) and the
    document bucket, iterating whichever of the phi column and the document
    topic list is smaller.  ``counters`` is an int64[4] array accumulating
    (b_bucket_work, sparsity_bound, a_bucket_hits, fallback_count).
    """
    if isinstance(phi, np.ndarray):
        phi = SparsePhi.from_dense(phi)
    num_topics = phi.K
    alpha_vec = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    if alpha_vec.size == 1:
        alpha_vec = np.full(num_topics, float(alpha_vec[0]))
    m_row = np.ascontiguousarray(m_row, dtype=np.int32)
    m = m_row[None, :].copy()
    ks = np.nonzero(m_row)[0].astype(np.int32)
    m_list = np.zeros((1, num_topics), np.int32)
    m_list[0, :ks.size] = ks
    m_count = np.array([ks.size], np.int32)
    if counters is None:
        counters = np.zeros(4, np.int64)
    return backend.impl.z_token_draw(
        rng_.state, int(word), 0, m, m_list, m_count, phi.col_ptr,
        phi.col_topics, phi.col_vals, a_tables.prob, a_tables.alias,
        a_tables.sigma_a, alpha_vec, float(alpha_vec.sum()),
        int(m_row.sum()), np.empty(num_topics, np.int32),
        np.empty(num_topics), counters)


def collapsed_token_probs(n, n_tot, m_row, word, alpha, beta):
    """Normalized full-conditional of the collapsed sampler (oracle form)."""
    n = np.asarray(n)
    alpha_vec = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    if alpha_vec.size == 1:
        alpha_vec = np.full(n.shape[0], float(alpha_vec[0]))
    w = ((n[:, word] + beta) / (np.asarray(n_tot) + n.shape[1] * beta)
         * (np.asarray(m_row) + alpha_vec))
    return w / w.sum()


# ------------------------------------------------------------------ iterations

def run_iteration(state, corpus, config, iteration, cache=None, executor=None,
                  n_shards=None, compute_log_joint=True):
    """One bulk-synchronous sweep of the pu or pc variant.

    ``compute_log_joint=False`` skips the trace metric (reported as nan) for
    tight loops that only need the chain itself.
    """
    if config.variant == "collapsed":
        return collapsed_iteration(state, corpus, config, iteration,
                                   compute_log_joint=compute_log_joint)
    if config.variant == "pu" and cache is None:
        cache = PoissonAliasCache(config.beta, config.L)
    alpha_vec = config.alpha_vector()
    scalar_alpha = config.scalar_alpha()   # the trace metric needs symmetry
    seed = config.seed

    t0 = perf_counter()
    phi_redraws = 0
    if config.variant == "pu":
        phi, phi_redraws = draw_phi_pu(state, config.beta, cache, seed=seed,
                                       iteration=iteration, executor=executor)
    else:
        dense = draw_phi_pc(state.n, config.beta, seed=seed,
                            iteration=iteration, executor=executor)
        phi = SparsePhi.from_dense(dense)
    atables = rebuild_a_tables(phi, alpha_vec)
    t1 = perf_counter()

    shards = make_shards(corpus.doc_ptr, n_shards or config.workers)
    alpha_sum = float(alpha_vec.sum())
    jobs = []
    for s, (lo, hi) in enumerate(shards):
        ntok = int(corpus.doc_ptr[hi] - corpus.doc_ptr[lo])
        jobs.append({
            "stream": rng.derive_state(seed, rng.Z, iteration, s),
            "range": (lo, hi),
            "delta_k": np.empty(max(2 * ntok, 1), np.int32),
            "delta_v": np.empty(max(2 * ntok, 1), np.int32),
            "delta_c": np.empty(max(2 * ntok, 1), np.int32),
            "counters": np.zeros(4, np.int64),
            "scratch_k": np.empty(config.K, np.int32),
            "scratch_w": np.empty(config.K),
        })

    def sweep(job):
        lo, hi = job["range"]
        job["n_deltas"] = backend.impl.z_sweep(
            job["stream"], lo, hi, corpus.doc_ptr, corpus.tokens, state.z,
            state.m, state.m_list, state.m_count, state.m_pos, phi.col_ptr,
            phi.col_topics, phi.col_vals, atables.prob, atables.alias,
            atables.sigma_a, alpha_vec, alpha_sum, job["delta_k"],
            job["delta_v"], job["delta_c"], job["counters"],
            job["scratch_k"], job["scratch_w"])

    if executor is not None and len(jobs) > 1:
        list(executor.map(sweep, jobs))
    else:
        for job in jobs:
            sweep(job)

    total_deltas = 0
    for job in jobs:   # merge in shard order; integer merge is order-free anyway
        nd = job["n_deltas"]
        backend.impl.apply_deltas(state.n, state.n_list, state.n_count,
                                  state.n_pos, state.n_tot, job["delta_k"],
                                  job["delta_v"], job["delta_c"], nd)
        total_deltas += nd
    t2 = perf_counter()

    counters = np.zeros(4, np.int64)
    for job in jobs:
        counters += job["counters"]
    if counters[0] > counters[1]:
        raise ConsistencyError(
            f"bucket work {counters[0]} exceeded the sparsity bound {counters[1]}")
    state.validate(corpus)
    if compute_log_joint:
        lj = diagnostics.log_joint_from_counts(
            state.m, state.n, corpus.doc_lengths(), scalar_alpha, config.beta)
    else:
        lj = math.nan
    return IterationMetrics(
        iteration=iteration, log_joint=lj, phi_phase_seconds=t1 - t0,
        z_phase_seconds=t2 - t1, b_bucket_work=int(counters[0]),
        sparsity_bound=int(counters[1]), a_bucket_hits=int(counters[2]),
        fallback_count=int(counters[3]), phi_redraws=phi_redraws,
        n_deltas=total_deltas)


def collapsed_iteration(state, corpus, config, iteration,
                        compute_log_joint=True):
    """One strictly sequential sweep of the fully collapsed baseline."""
    alpha_vec = config.alpha_vector()
    scalar_alpha = config.scalar_alpha()
    stream = rng.derive_state(config.seed, rng.Z, iteration, 0)
    scratch = np.empty(config.K)
    t0 = perf_counter()
    backend.impl.collapsed_sweep(
        stream, corpus.doc_ptr, corpus.tokens, state.z, state.m, state.m_list,
        state.m_count, state.m_pos, state.n, state.n_list, state.n_count,
        state.n_pos, state.n_tot, alpha_vec, config.beta, scratch)
    t1 = perf_counter()
    state.validate(corpus)
    if compute_log_joint:
        lj = diagnostics.log_joint_from_counts(
            state.m, state.n, corpus.doc_lengths(), scalar_alpha, config.beta)
    else:
        lj = math.nan
    return IterationMetrics(
        iteration=iteration, log_joint=lj, phi_phase_seconds=0.0,
        z_phase_seconds=t1 - t0, b_bucket_work=0, sparsity_bound=0,
        a_bucket_hits=0, fallback_count=0)


class Trainer:
    """Drives a full run: owns the state, the Poisson cache, the thread pool."""

    def __init__(self, corpus, config):
        self.corpus = corpus
        self.config = config
        self.state = init_state(corpus, config.K, config.seed)
        self.cache = (PoissonAliasCache(config.beta, config.L)
                      if config.variant == "pu" else None)
        self.executor = (ThreadPoolExecutor(max_workers=config.workers)
                         if config.workers > 1 else None)
        self.iteration = 0
        self.history = []

    def step(self):
        if self.config.variant == "collapsed":
            metrics = collapsed_iteration(self.state, self.corpus, self.config,
                                          self.iteration)
        else:
            metrics = run_iteration(self.state, self.corpus, self.config,
                                    self.iteration, cache=self.cache,
                                    executor=self.executor)
        self.iteration += 1
        self.history.append(metrics)
        return metrics

    def run(self):
        for _ in range(self.config.iterations):
            self.step()
        return self.history

    def close(self):
        if self.executor is not None:
            self.executor.shutdown()
            self.executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
