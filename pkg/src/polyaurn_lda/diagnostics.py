"""Run diagnostics: collapsed log-joint, topic coherence, effective sample
size, and top-word extraction.

All operations are pure over snapshots of the sampler state.  The log-joint
assumes symmetric scalar priors (the vector extension is deliberately left
out); it is validated by the conditional-ratio identity rather than by any
absolute reference value.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .stats import recount

TRACE_HEADER = ("iteration", "log_joint", "phi_seconds", "z_seconds",
                "b_work", "bound", "fallbacks")


@dataclass
class TraceSeries:
    values: np.ndarray
    label: str = ""


def log_joint_from_counts(m, n, doc_lengths, alpha, beta):
    """Collapsed log p(w, z) from the sufficient statistics.

    Sums log-Gamma over nonzero counts only; zero entries contribute in
    closed form.
    """
    m = np.asarray(m)
    n = np.asarray(n)
    num_docs, num_topics = m.shape
    vocab_size = n.shape[1]

    n_nz = n[n > 0]
    n_row = n.sum(axis=1)
    word_part = (float(gammaln(n_nz + beta).sum())
                 + (n.size - n_nz.size) * float(gammaln(beta))
                 - float(gammaln(n_row + vocab_size * beta).sum()))
    word_part += num_topics * (float(gammaln(vocab_size * beta))
                               - vocab_size * float(gammaln(beta)))

    m_nz = m[m > 0]
    doc_part = (float(gammaln(m_nz + alpha).sum())
                + (m.size - m_nz.size) * float(gammaln(alpha))
                - float(gammaln(np.asarray(doc_lengths) + num_topics * alpha).sum()))
    doc_part += num_docs * (float(gammaln(num_topics * alpha))
                            - num_topics * float(gammaln(alpha)))
    return word_part + doc_part


def log_joint(corpus, z, alpha, beta, num_topics=None):
    """Collapsed log p(w, z), recounting the statistics from scratch."""
    z = np.asarray(z)
    if num_topics is None:
        num_topics = int(z.max()) + 1 if z.size else 1
    m, n = recount(corpus, z, num_topics)
    return log_joint_from_counts(m, n, corpus.doc_lengths(), alpha, beta)


def top_words(weights, m):
    """Per-topic ids of the m largest entries; ties break to the lower id."""
    weights = np.asarray(weights)
    num_topics, vocab_size = weights.shape
    m = min(m, vocab_size)
    out = []
    for k in range(num_topics):
        order = np.lexsort((np.arange(vocab_size), -weights[k]))
        out.append(order[:m].astype(int))
    return out


def _doc_presence(corpus, word_ids):
    """Boolean matrix: docs x candidate words, True when the word occurs."""
    word_ids = np.asarray(word_ids)
    col = {int(w): i for i, w in enumerate(word_ids)}
    present = np.zeros((corpus.num_docs, word_ids.size), dtype=bool)
    for d in range(corpus.num_docs):
        for w in np.unique(corpus.doc(d)):
            i = col.get(int(w))
            if i is not None:
                present[d, i] = True
    return present


def topic_coherence(n, corpus, m=10):
    """Co-occurrence coherence of each topic's top-m words.

    For top words v_1..v_m of a topic (by descending count), the score is
    the sum over ordered pairs of log((D(v_i, v_j) + 1) / D(v_j)) with j < i,
    where D counts documents containing the word(s).
    """
    if m < 2:
        raise ValueError("need at least two top words")
    n = np.asarray(n)
    tops = top_words(n, m)
    for k, ids in enumerate(tops):
        pos = np.count_nonzero(n[k][ids] > 0)
        if pos < 2:
            raise ValueError(f"topic {k} has fewer than two words with "
                             "nonzero counts")
        tops[k] = ids[:pos]    # zero-count tail never co-occurs; drop it
    cand = np.unique(np.concatenate(tops))
    present = _doc_presence(corpus, cand)
    docfreq = present.sum(axis=0)
    cofreq = (present.T.astype(np.int64) @ present.astype(np.int64))
    index = {int(w): i for i, w in enumerate(cand)}

    scores = np.zeros(n.shape[0])
    for k, ids in enumerate(tops):
        total = 0.0
        for i in range(1, len(ids)):
            for j in range(i):
                a = index[int(ids[i])]
                b = index[int(ids[j])]
                total += np.log((cofreq[a, b] + 1.0) / docfreq[b])
        scores[k] = total
    return scores


def ess(trace):
    """Effective sample size via initial-positive-sequence truncation.

    A constant trace is defined to have ESS equal to its length; the
    integrated autocorrelation time is floored at 1, so 0 < ESS <= length.
    """
    values = trace.values if isinstance(trace, TraceSeries) else trace
    x = np.asarray(values, dtype=np.float64)
    length = x.size
    if length < 10:
        raise ValueError("trace too short for an ESS estimate")
    x = x - x.mean()
    var0 = float(x @ x) / length
    if var0 == 0.0:
        return float(length)
    nfft = 1 << (2 * length - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:length].real / length
    rho = acov / acov[0]
    s = 0.0
    m = 0
    while 2 * m + 1 < length:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        s += pair
        m += 1
    tau = max(1.0, 2.0 * s - 1.0)
    return float(length / tau)


def write_trace_csv(path, history):
    """Metrics CSV, one row per iteration."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_HEADER)
        for it in history:
            writer.writerow([it.iteration, repr(it.log_joint),
                             repr(it.phi_phase_seconds),
                             repr(it.z_phase_seconds), it.b_bucket_work,
                             it.sparsity_bound, it.fallback_count])
