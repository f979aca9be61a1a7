"""Bag-of-words corpora: UCI-format I/O, rare-word filtering, synthesis.

The on-disk format is the UCI bag-of-words layout: a docword file whose
first three lines give D, W and NNZ, followed by one ``docId wordId count``
triple per line (all 1-indexed), plus a vocabulary file with one UTF-8 word
per line (line i names word id i-1).  Internally word ids are 0-based and
counts are expanded into one token slot per occurrence.

A Corpus is immutable after construction and safe to share across workers.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import backend, rng


class CorpusError(ValueError):
    """Base class for corpus data errors."""


class UciFormatError(CorpusError):
    """Malformed UCI docword/vocabulary input."""


class WordIdRangeError(CorpusError):
    """A triple references a word id outside the declared vocabulary."""


class EmptyVocabularyError(CorpusError):
    """Filtering removed every word."""


@dataclass(frozen=True)
class Vocabulary:
    """Ordered, unique word strings; index is the word id."""

    words: tuple

    def __post_init__(self):
        if len(self.words) == 0:
            raise EmptyVocabularyError("vocabulary is empty")
        if len(set(self.words)) != len(self.words):
            raise CorpusError("vocabulary contains duplicate words")

    @property
    def size(self):
        return len(self.words)

    def __len__(self):
        return len(self.words)


@dataclass(frozen=True)
class Corpus:
    """Tokenized corpus: concatenated token word ids plus document offsets."""

    vocab: Vocabulary
    tokens: np.ndarray       # int32[N], word id per token occurrence
    doc_ptr: np.ndarray      # int64[D+1], doc d owns tokens[doc_ptr[d]:doc_ptr[d+1]]
    _hash: str = field(default="", compare=False)

    def __post_init__(self):
        if self.tokens.size and int(self.tokens.max()) >= self.vocab.size:
            raise WordIdRangeError("token word id out of range")
        if self.tokens.size and int(self.tokens.min()) < 0:
            raise WordIdRangeError("negative token word id")
        if int(self.doc_ptr[-1]) != self.tokens.size:
            raise CorpusError("doc_ptr does not cover the token array")
        self.tokens.setflags(write=False)
        self.doc_ptr.setflags(write=False)

    @property
    def num_docs(self):
        return len(self.doc_ptr) - 1

    @property
    def num_tokens(self):
        return int(self.doc_ptr[-1])

    @property
    def vocab_size(self):
        return self.vocab.size

    def doc(self, d):
        """Word ids of document d (read-only view)."""
        return self.tokens[self.doc_ptr[d]:self.doc_ptr[d + 1]]

    def doc_lengths(self):
        return np.diff(self.doc_ptr)

    @property
    def docs(self):
        return [self.doc(d) for d in range(self.num_docs)]

    def fingerprint(self):
        """Stable sha256 over the token layout and vocabulary."""
        h = hashlib.sha256()
        h.update(self.doc_ptr.astype(np.int64).tobytes())
        h.update(self.tokens.astype(np.int32).tobytes())
        h.update("\n".join(self.vocab.words).encode("utf-8"))
        return h.hexdigest()

    def __eq__(self, other):
        return (isinstance(other, Corpus)
                and self.vocab.words == other.vocab.words
                and np.array_equal(self.tokens, other.tokens)
                and np.array_equal(self.doc_ptr, other.doc_ptr))


def _make_corpus(words, doc_token_lists):
    tokens = (np.concatenate(doc_token_lists)
              if doc_token_lists else np.empty(0, np.int32))
    lengths = [len(t) for t in doc_token_lists]
    doc_ptr = np.zeros(len(lengths) + 1, dtype=np.int64)
    np.cumsum(lengths, out=doc_ptr[1:])
    return Corpus(Vocabulary(tuple(words)), tokens.astype(np.int32), doc_ptr)


def _read_header_int(line, lineno, name):
    try:
        value = int(line.strip())
    except ValueError:
        raise UciFormatError(f"line {lineno}: expected integer {name}, "
                             f"got {line.strip()!r}") from None
    if value < 0:
        raise UciFormatError(f"line {lineno}: {name} must be nonnegative")
    return value


def read_uci_bow(docword_stream, vocab_stream, rare_word_limit=10):
    """Read a UCI bag-of-words corpus and drop rare words.

    Words whose total corpus frequency is below ``rare_word_limit`` are
    removed and the vocabulary re-indexed densely; documents emptied by the
    filter are kept (possibly with length zero) so document ids are stable.
    """
    lines = iter(enumerate(docword_stream, start=1))

    def next_line():
        for lineno, raw in lines:
            if raw.strip():
                return lineno, raw
        return None, None

    header = []
    for name in ("D", "W", "NNZ"):
        lineno, raw = next_line()
        if raw is None:
            raise UciFormatError(f"missing header line for {name}")
        header.append(_read_header_int(raw, lineno, name))
    num_docs, num_words, nnz = header

    vocab_words = [line.rstrip("\n") for line in vocab_stream]
    while vocab_words and not vocab_words[-1].strip():
        vocab_words.pop()
    if len(vocab_words) != num_words:
        raise UciFormatError(
            f"vocabulary has {len(vocab_words)} words, header says {num_words}")

    per_doc = [[] for _ in range(num_docs)]
    counts = np.zeros(num_words, dtype=np.int64)
    seen = 0
    for lineno, raw in lines:
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 3:
            raise UciFormatError(f"line {lineno}: expected 'docId wordId count'")
        try:
            d, w, c = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise UciFormatError(f"line {lineno}: non-integer triple") from None
        if not 1 <= d <= num_docs:
            raise UciFormatError(f"line {lineno}: docId {d} outside 1..{num_docs}")
        if not 1 <= w <= num_words:
            raise WordIdRangeError(f"line {lineno}: wordId {w} outside 1..{num_words}")
        if c < 0:
            raise UciFormatError(f"line {lineno}: negative count")
        per_doc[d - 1].append((w - 1, c))
        counts[w - 1] += c
        seen += 1
    if seen != nnz:
        raise UciFormatError(f"header declares {nnz} triples, found {seen}")

    keep = counts >= rare_word_limit
    if not keep.any():
        raise EmptyVocabularyError(
            f"rare word limit {rare_word_limit} removes the whole vocabulary")
    new_id = np.cumsum(keep) - 1
    words = [w for w, k in zip(vocab_words, keep) if k]

    doc_token_lists = []
    for entries in per_doc:
        toks = []
        for w, c in entries:
            if keep[w]:
                toks.extend([int(new_id[w])] * c)
        doc_token_lists.append(np.asarray(toks, dtype=np.int32))
    return _make_corpus(words, doc_token_lists)


def write_uci_bow(corpus, docword_stream, vocab_stream):
    """Serialize a corpus back to the UCI layout (triples sorted by doc, word)."""
    rows = []
    for d in range(corpus.num_docs):
        words, counts = np.unique(corpus.doc(d), return_counts=True)
        for w, c in zip(words, counts):
            rows.append((d + 1, int(w) + 1, int(c)))
    docword_stream.write(f"{corpus.num_docs}\n{corpus.vocab_size}\n{len(rows)}\n")
    for d, w, c in rows:
        docword_stream.write(f"{d} {w} {c}\n")
    for word in corpus.vocab.words:
        vocab_stream.write(word + "\n")


@dataclass(frozen=True)
class SynthTruth:
    """Ground truth of a synthetic corpus, for diagnostics."""

    z: np.ndarray        # int32[N], topic per token
    theta: np.ndarray    # float64[D, K]
    phi: np.ndarray      # float64[K, V]


def synth_corpus(num_topics, vocab_size, num_docs, doc_len, alpha, beta, seed):
    """Generate a corpus from the standard topic-mixture process.

    Draws phi_k ~ Dir(beta 1_V) and theta_d ~ Dir(alpha 1_K), then one topic
    and one word per token.  Deterministic given the seed.
    """
    if min(num_topics, vocab_size, num_docs, doc_len) < 1:
        raise ValueError("all counts must be positive")
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    state = rng.derive_state(seed, rng.SYNTH)

    phi = np.empty((num_topics, vocab_size))
    backend.impl.dirichlet_fill(state, np.full(vocab_size, float(beta)), phi)
    theta = np.empty((num_docs, num_topics))
    backend.impl.dirichlet_fill(state, np.full(num_topics, float(alpha)), theta)

    phi_tables = []
    for k in range(num_topics):
        prob = np.empty(vocab_size)
        alias = np.empty(vocab_size, np.int32)
        backend.impl.alias_build(phi[k], prob, alias)
        phi_tables.append((prob, alias))

    z = np.empty(num_docs * doc_len, dtype=np.int32)
    tokens = np.empty(num_docs * doc_len, dtype=np.int32)
    theta_prob = np.empty(num_topics)
    theta_alias = np.empty(num_topics, np.int32)
    zbuf = np.empty(doc_len, np.int32)
    wbuf = np.empty(1, np.int32)
    for d in range(num_docs):
        backend.impl.alias_build(theta[d], theta_prob, theta_alias)
        backend.impl.alias_draw_fill(state, theta_prob, theta_alias, zbuf)
        lo = d * doc_len
        z[lo:lo + doc_len] = zbuf
        for i in range(doc_len):
            prob, alias = phi_tables[zbuf[i]]
            backend.impl.alias_draw_fill(state, prob, alias, wbuf)
            tokens[lo + i] = wbuf[0]

    words = [f"w{v:06d}" for v in range(vocab_size)]
    doc_ptr = np.arange(num_docs + 1, dtype=np.int64) * doc_len
    corpus = Corpus(Vocabulary(tuple(words)), tokens, doc_ptr)
    return corpus, SynthTruth(z=z, theta=theta, phi=phi)
