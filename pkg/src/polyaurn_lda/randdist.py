"""Random-variate machinery: alias tables, Gamma/Dirichlet/Poisson draws,
the cached Poisson sampler for rates beta + l, and both constructions of
the normalized-Poisson urn distribution.

Everything is pure given an explicit Rng handle; tables and caches are
immutable after construction and shareable read-only across workers.
"""

from dataclasses import dataclass

import numpy as np

from . import backend, rng


class Rng:
    """A deterministic xoshiro256++ stream addressed by (seed, *path)."""

    def __init__(self, seed=0, *path):
        self.state = rng.derive_state(seed, *path)

    @classmethod
    def from_state(cls, state):
        out = cls.__new__(cls)
        out.state = np.asarray(state, dtype=np.uint64).copy()
        return out

    def uniform(self, size=None):
        if size is None:
            return backend.impl.uniform(self.state)
        out = np.empty(size)
        backend.impl.uniform_fill(self.state, out)
        return out

    def normal(self, size=None):
        if size is None:
            return backend.impl.normal(self.state)
        out = np.empty(size)
        backend.impl.normal_fill(self.state, out)
        return out

    def randint(self, n, size=None):
        if n < 1:
            raise ValueError("n must be >= 1")
        if size is None:
            return backend.impl.randint(self.state, n)
        out = np.empty(size, np.int32)
        backend.impl.randint_fill(self.state, n, out)
        return out


def gamma_sample(shape, scale, rng_, size=None):
    """Gamma(shape, scale) by the Marsaglia-Tsang squeeze method."""
    if shape <= 0 or scale <= 0:
        raise ValueError("shape and scale must be positive")
    if size is None:
        return backend.impl.gamma(rng_.state, float(shape)) * scale
    out = np.empty(size)
    backend.impl.gamma_fill(rng_.state, float(shape), out)
    if scale != 1.0:
        out *= scale
    return out


def dirichlet_sample(concentration, rng_, size=None):
    """Dirichlet draw(s) via normalized IID gammas."""
    conc = np.ascontiguousarray(concentration, dtype=np.float64)
    if conc.ndim != 1 or conc.size == 0 or np.any(conc <= 0):
        raise ValueError("concentration must be a positive vector")
    out = np.empty((1 if size is None else size, conc.size))
    backend.impl.dirichlet_fill(rng_.state, conc, out)
    return out[0] if size is None else out


def poisson_sample(rate, rng_, size=None):
    """Exact Poisson variate(s); inversion below rate 10, rejection above."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if size is None:
        return backend.impl.poisson(rng_.state, float(rate))
    out = np.empty(size, np.int64)
    backend.impl.poisson_fill(rng_.state, float(rate), out)
    return out


class AliasTable:
    """O(1) categorical sampler over a fixed nonnegative weight vector."""

    def __init__(self, weights):
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if not w.sum() > 0:
            raise ValueError("weights must have positive sum")
        self.n = w.size
        self.weights = w
        self.prob = np.empty(self.n)
        self.alias = np.empty(self.n, np.int32)
        backend.impl.alias_build(w, self.prob, self.alias)

    def sample(self, rng_, size=None):
        if size is None:
            return backend.impl.alias_draw(rng_.state, self.prob, self.alias)
        out = np.empty(size, np.int32)
        backend.impl.alias_draw_fill(rng_.state, self.prob, self.alias, out)
        return out

    def reconstructed_probs(self):
        """Category probabilities implied by the table; equals weights/sum."""
        p = self.prob.copy()
        for j in range(self.n):
            if self.alias[j] != j:
                p[self.alias[j]] += 1.0 - self.prob[j]
        return p / self.n


class PoissonAliasCache:
    """Alias tables for Pois(beta + l), l = 0..limit, over truncated supports.

    Each table covers {0..t_l} where the truncation point leaves tail mass
    below ``tail`` (default 1e-12).  Above the limit, draws fall back to a
    rounded gaussian with matching mean and variance.  Only a scalar
    (symmetric) beta is supported.
    """

    DEFAULT_LIMIT = 100

    def __init__(self, beta, limit=DEFAULT_LIMIT, tail=1e-12):
        if beta <= 0:
            raise ValueError("beta must be positive")
        if limit < 0:
            raise ValueError("limit must be nonnegative")
        self.beta = float(beta)
        self.limit = int(limit)
        self.tail = float(tail)
        offsets = [0]
        probs = []
        aliases = []
        pmfs = []
        for l in range(self.limit + 1):
            pmf = self._pmf_table(self.beta + l, tail)
            prob = np.empty(pmf.size)
            alias = np.empty(pmf.size, np.int32)
            backend.impl.alias_build(pmf, prob, alias)
            probs.append(prob)
            aliases.append(alias)
            pmfs.append(pmf)
            offsets.append(offsets[-1] + pmf.size)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.prob = np.concatenate(probs)
        self.alias = np.concatenate(aliases)
        self._pmfs = pmfs

    @staticmethod
    def _pmf_table(lam, tail):
        terms = [np.exp(-lam)]
        cum = terms[0]
        j = 0
        while cum < 1.0 - tail:
            j += 1
            terms.append(terms[-1] * lam / j)
            cum += terms[-1]
        return np.asarray(terms)

    def support_size(self, l):
        return int(self.offsets[l + 1] - self.offsets[l])

    def pmf(self, l):
        """Tabulated pmf of Pois(beta + l) over the truncated support."""
        return self._pmfs[l].copy()

    def sample(self, l, rng_, size=None):
        if l < 0:
            raise ValueError("count must be nonnegative")
        if size is None:
            return backend.impl.cached_poisson(
                rng_.state, self.offsets, self.prob, self.alias, self.beta,
                self.limit, int(l))
        out = np.empty(size, np.int64)
        for i in range(size):
            out[i] = backend.impl.cached_poisson(
                rng_.state, self.offsets, self.prob, self.alias, self.beta,
                self.limit, int(l))
        return out


def poisson_cached_sample(cache, l, rng_, size=None):
    """Draw from Pois(cache.beta + l) through the cache."""
    return cache.sample(l, rng_, size)


@dataclass(frozen=True)
class PPUDraw:
    """One urn draw: sparse nonnegative counts with a positive total."""

    ids: np.ndarray      # int32, indices of nonzero entries, ascending
    counts: np.ndarray   # int64, matching counts (> 0)
    dim: int
    total: int
    redraws: int

    @property
    def probs(self):
        """Dense normalized vector; entries are exactly counts/total."""
        out = np.zeros(self.dim)
        out[self.ids] = self.counts / self.total
        return out


def ppu_sample_direct(concentration, rng_):
    """Independent Poissons per entry, redrawn until the total is nonzero."""
    conc = np.ascontiguousarray(concentration, dtype=np.float64)
    if conc.ndim != 1 or conc.size == 0 or np.any(conc < 0):
        raise ValueError("concentration must be a nonnegative vector")
    if not conc.sum() > 0:
        raise ValueError("concentration must have positive sum")
    counts = np.empty(conc.size, np.int64)
    total, redraws = backend.impl.ppu_direct_counts(rng_.state, conc, counts)
    ids = np.nonzero(counts)[0].astype(np.int32)
    return PPUDraw(ids=ids, counts=counts[ids].copy(), dim=conc.size,
                   total=int(total), redraws=int(redraws))


def ppu_direct_batch(concentration, rng_, size):
    """Normalized urn draws as rows of a dense matrix."""
    conc = np.ascontiguousarray(concentration, dtype=np.float64)
    if conc.ndim != 1 or conc.size == 0 or np.any(conc < 0):
        raise ValueError("concentration must be a nonnegative vector")
    if not conc.sum() > 0:
        raise ValueError("concentration must have positive sum")
    out = np.empty((size, conc.size))
    backend.impl.ppu_direct_fill(rng_.state, conc, out)
    return out


def ppu_sample_hier(varpi, mean_vector, rng_, size=None):
    """Arrival-process construction of the urn.

    Draws a zero-truncated Poisson arrival count, colors each arrival with an
    independent categorical draw from the mean vector, and returns the
    normalized histogram.  Serves as the independent oracle for
    ppu_sample_direct.
    """
    if varpi <= 0:
        raise ValueError("varpi must be positive")
    f = np.ascontiguousarray(mean_vector, dtype=np.float64)
    if f.ndim != 1 or f.size == 0 or np.any(f < 0):
        raise ValueError("mean vector must be nonnegative")
    if abs(f.sum() - 1.0) > 1e-9:
        raise ValueError("mean vector must lie on the simplex")
    fprob = np.empty(f.size)
    falias = np.empty(f.size, np.int32)
    backend.impl.alias_build(f, fprob, falias)
    out = np.empty((1 if size is None else size, f.size))
    backend.impl.ppu_hier_fill(rng_.state, float(varpi), fprob, falias, out)
    return out[0] if size is None else out


def ppu_asymptotic_moments(varpi, mean_vector):
    """Large-concentration mean and covariance of the urn distribution.

    Mean is the mean vector itself; the covariance has diagonal
    F_i (1 - F_i) / varpi and off-diagonal -F_i F_j / varpi.
    """
    if varpi <= 0:
        raise ValueError("varpi must be positive")
    f = np.asarray(mean_vector, dtype=np.float64)
    cov = -np.outer(f, f) / varpi
    np.fill_diagonal(cov, f * (1.0 - f) / varpi)
    return f.copy(), cov
