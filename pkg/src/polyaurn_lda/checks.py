"""Statistical checks of the urn approximation and the sampling primitives.

These back both the ``ppu-check`` CLI subcommand and the acceptance tests:
convergence of the urn distribution to its Dirichlet limit, its
large-concentration moments, agreement of the two urn constructions, and
goodness of fit for alias tables, cached Poisson draws, and gamma moments.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .randdist import (PoissonAliasCache, Rng, dirichlet_sample,
                       poisson_sample, ppu_asymptotic_moments,
                       ppu_direct_batch, ppu_sample_hier)


@dataclass
class CheckResult:
    name: str
    passed: bool
    rows: list = field(default_factory=list)   # (label, value, threshold, ok)


def _row(label, value, threshold, ok):
    return (label, float(value), threshold, bool(ok))


def chi2_two_sample(x, y, max_bins=64, min_expected=5.0):
    """Homogeneity chi-square p-value for two samples, tie-safe.

    Bins are pooled-sample quantile edges (or exact values when the pooled
    support is small); adjacent bins are merged until every expected count
    is at least ``min_expected``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    pooled = np.concatenate([x, y])
    values = np.unique(pooled)
    if values.size <= max_bins:
        edges = values
    else:
        qs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
        edges = np.unique(np.quantile(pooled, qs))
    cx = np.searchsorted(edges, x, side="right")
    cy = np.searchsorted(edges, y, side="right")
    nbins = edges.size + 1
    hx = np.bincount(cx, minlength=nbins).astype(np.float64)
    hy = np.bincount(cy, minlength=nbins).astype(np.float64)

    merged = []
    ax = bx = 0.0
    scale = (hx + hy).sum() / len(pooled)
    for i in range(nbins):
        ax += hx[i]
        bx += hy[i]
        expected = (ax + bx) * min(len(x), len(y)) / len(pooled)
        if expected >= min_expected:
            merged.append((ax, bx))
            ax = bx = 0.0
    if ax + bx > 0:
        if merged:
            lx, ly = merged[-1]
            merged[-1] = (lx + ax, ly + bx)
        else:
            merged.append((ax, bx))
    del scale
    table = np.asarray(merged)
    if table.shape[0] < 2:
        return 1.0
    _, p, _, _ = sps.chi2_contingency(table.T)
    return float(p)


def chi2_gof(counts, probs):
    """One-sample chi-square p-value against exact category probabilities."""
    counts = np.asarray(counts, dtype=np.float64)
    expected = probs * counts.sum()
    keep = expected > 0
    stat = ((counts[keep] - expected[keep]) ** 2 / expected[keep]).sum()
    dof = keep.sum() - 1
    return float(sps.chi2.sf(stat, dof))


def ks_distance(x, y):
    """Two-sample Kolmogorov-Smirnov statistic (a distance, not a test)."""
    return float(sps.ks_2samp(x, y).statistic)


# ------------------------------------------------------------- the urn checks

def urn_dirichlet_convergence(seed=0, draws=100_000,
                              mean_vector=(0.2, 0.3, 0.5),
                              concentrations=(10.0, 100.0, 1000.0, 10_000.0),
                              final_threshold=0.02, slack=1):
    """Max marginal KS distance urn vs Dirichlet must shrink with concentration.

    Passes when the sequence is decreasing up to ``slack`` violations and the
    final distance is below ``final_threshold``.
    """
    f = np.asarray(mean_vector)
    rng_ = Rng(seed, 101)
    distances = []
    rows = []
    for varpi in concentrations:
        urn = ppu_direct_batch(varpi * f, rng_, draws)
        dirichlet = dirichlet_sample(varpi * f, rng_, size=draws)
        d = max(ks_distance(urn[:, j], dirichlet[:, j]) for j in range(f.size))
        distances.append(d)
        rows.append(_row(f"max marginal KS at concentration {varpi:g}", d,
                         f"< {final_threshold} at the top" , True))
    violations = sum(1 for a, b in zip(distances, distances[1:]) if b > a)
    ok_final = distances[-1] < final_threshold
    ok_mono = violations <= slack
    rows.append(_row("non-monotone steps", violations, f"<= {slack}", ok_mono))
    rows.append(_row("final KS distance", distances[-1],
                     f"< {final_threshold}", ok_final))
    return CheckResult("urn-dirichlet convergence", ok_mono and ok_final, rows)


def urn_moments(seed=0, draws=1_000_000, varpi=1000.0,
                mean_vector=(0.2, 0.3, 0.5), rel_tol=0.10):
    """Empirical urn moments against the large-concentration formulas."""
    f = np.asarray(mean_vector)
    rng_ = Rng(seed, 102)
    sample = ppu_direct_batch(varpi * f, rng_, draws)
    mean_target, cov_target = ppu_asymptotic_moments(varpi, f)
    mean = sample.mean(axis=0)
    cov = np.cov(sample.T, bias=True)
    rows = []
    ok = True
    for j in range(f.size):
        se = sample[:, j].std() / np.sqrt(draws)
        good = abs(mean[j] - mean_target[j]) < 3 * se
        ok &= good
        rows.append(_row(f"mean[{j}] error / MC-SE",
                         abs(mean[j] - mean_target[j]) / se, "< 3", good))
    for i in range(f.size):
        for j in range(i, f.size):
            rel = abs(cov[i, j] - cov_target[i, j]) / abs(cov_target[i, j])
            good = rel < rel_tol
            ok &= good
            label = (f"var[{i}] rel err" if i == j
                     else f"cov[{i},{j}] rel err")
            rows.append(_row(label, rel, f"< {rel_tol}", good))
    return CheckResult("urn asymptotic moments", ok, rows)


def urn_construction_equivalence(seed=0, draws=100_000, p_threshold=0.001,
                                 cases=None):
    """Two-sample tests: per-coordinate law of the direct and arrival forms."""
    if cases is None:
        cases = ((10.0, (1 / 3, 1 / 3, 1 / 3)),
                 (100.0, (0.2, 0.3, 0.5)),
                 (1000.0, (0.05, 0.05, 0.9)))
    rng_ = Rng(seed, 103)
    rows = []
    ok = True
    for varpi, f in cases:
        f = np.asarray(f)
        direct = ppu_direct_batch(varpi * f, rng_, draws)
        hier = ppu_sample_hier(varpi, f, rng_, size=draws)
        for j in range(f.size):
            p = chi2_two_sample(direct[:, j], hier[:, j])
            good = p > p_threshold
            ok &= good
            rows.append(_row(f"concentration {varpi:g}, coord {j}: p", p,
                             f"> {p_threshold}", good))
    return CheckResult("urn construction equivalence", ok, rows)


# ------------------------------------------------------- primitive GOF checks

def primitive_gof(seed=0, p_threshold=0.001):
    """Alias tables, cached-vs-plain Poisson, and gamma moments, one seed."""
    rows = []
    ok = True
    rng_ = Rng(seed, 104)

    from .randdist import AliasTable
    weights = np.array([1.0, 2.0, 3.0])
    table = AliasTable(weights)
    draws = table.sample(rng_, size=100_000)
    p = chi2_gof(np.bincount(draws, minlength=3), weights / weights.sum())
    ok &= p > p_threshold
    rows.append(_row("alias (1,2,3) GOF p", p, f"> {p_threshold}",
                     p > p_threshold))

    cache = PoissonAliasCache(0.01, limit=60)
    for l in (0, 5, 50):
        cached = cache.sample(l, rng_, size=100_000).astype(np.float64)
        plain = poisson_sample(0.01 + l, rng_, size=100_000).astype(np.float64)
        p = chi2_two_sample(cached, plain)
        ok &= p > p_threshold
        rows.append(_row(f"cached vs plain Pois(0.01+{l}) p", p,
                         f"> {p_threshold}", p > p_threshold))

    big = cache.sample(200, rng_, size=1_000_000).astype(np.float64)
    for label, value in (("mean", big.mean()), ("var", big.var())):
        rel = abs(value - 200.01) / 200.01
        ok &= rel < 0.01
        rows.append(_row(f"gaussian-tail Pois(200.01) {label} rel err", rel,
                         "< 0.01", rel < 0.01))

    from .randdist import gamma_sample
    for shape in (0.01, 1.0, 100.0):
        sample = gamma_sample(shape, 1.0, rng_, size=1_000_000)
        mean_se = sample.std() / np.sqrt(sample.size)
        good = abs(sample.mean() - shape) < 4 * mean_se
        ok &= good
        rows.append(_row(f"gamma({shape}) mean err / SE",
                         abs(sample.mean() - shape) / mean_se, "< 4", good))
    skew = float(sps.skew(sample))          # shape 100 from the last loop turn
    good = abs(skew - 0.2) < 0.05
    ok &= good
    rows.append(_row("gamma(100) skewness", skew, "2/sqrt(100) +- 0.05", good))
    return CheckResult("sampler primitive GOF", ok, rows)


def run_all(seed=0):
    """The full check suite; returns (all_passed, results)."""
    results = [
        urn_dirichlet_convergence(seed),
        urn_moments(seed),
        urn_construction_equivalence(seed),
        primitive_gof(seed),
    ]
    return all(r.passed for r in results), results


def format_results(results):
    lines = []
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        lines.append(f"[{status}] {result.name}")
        for label, value, threshold, ok in result.rows:
            mark = "ok" if ok else "FAIL"
            lines.append(f"    {label:48s} {value:12.6g}  ({threshold})  {mark}")
    return "\n".join(lines)
