# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling kernels.

Mirrors _pykernels exactly: same xoshiro256++ generator, same variate
algorithms, same word-consumption order, so both backends produce
bit-identical chains.  Hot loops release the GIL.
"""

from libc.stdint cimport uint64_t, int64_t, int32_t
from libc.math cimport sqrt, log, cos, exp, floor, fabs, lgamma
from libc.stdlib cimport qsort

import numpy as np

IMPL = "cython"

cdef double _INV53 = 1.0 / 9007199254740992.0
cdef double _TWO_PI = 6.283185307179586


# ------------------------------------------------------------------ RNG core

cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _next(uint64_t* s) nogil:
    cdef uint64_t out = _rotl(s[0] + s[3], 23) + s[0]
    cdef uint64_t t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return out


cdef inline double _uniform(uint64_t* s) nogil:
    return <double>(_next(s) >> 11) * _INV53


cdef inline double _uniform_pos(uint64_t* s) nogil:
    return <double>((_next(s) >> 11) + 1) * _INV53


cdef inline int64_t _randint(uint64_t* s, int64_t n) nogil:
    cdef uint64_t un = <uint64_t>n
    cdef uint64_t t = (0 - un) % un
    cdef uint64_t x
    while True:
        x = _next(s)
        if x >= t:
            return <int64_t>(x % un)


cdef inline double _normal(uint64_t* s) nogil:
    cdef double u1 = _uniform_pos(s)
    cdef double u2 = _uniform(s)
    return sqrt(-2.0 * log(u1)) * cos(_TWO_PI * u2)


cdef double _gamma(uint64_t* s, double shape) nogil:
    cdef double d, c, x, v, u, x2, g
    if shape < 1.0:
        g = _gamma(s, shape + 1.0)
        u = _uniform_pos(s)
        return g * exp(log(u) / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / sqrt(9.0 * d)
    while True:
        x = _normal(s)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = _uniform_pos(s)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if log(u) < 0.5 * x2 + d * (1.0 - v + log(v)):
            return d * v


cdef int64_t _poisson_ptrs(uint64_t* s, double rate) nogil:
    cdef double b = 0.931 + 2.53 * sqrt(rate)
    cdef double a = -0.059 + 0.02483 * b
    cdef double inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    cdef double v_r = 0.9277 - 3.6224 / (b - 2.0)
    cdef double u, v, us, k
    while True:
        u = _uniform(s) - 0.5
        v = _uniform(s)
        us = 0.5 - fabs(u)
        k = floor((2.0 * a / us + b) * u + rate + 0.43)
        if us >= 0.07 and v <= v_r:
            return <int64_t>k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (log(v) + log(inv_alpha) - log(a / (us * us) + b)
                <= k * log(rate) - rate - lgamma(k + 1.0)):
            return <int64_t>k


cdef int64_t _poisson(uint64_t* s, double rate) nogil:
    cdef double limit, p
    cdef int64_t k
    if rate <= 0.0:
        return 0
    if rate <= 10.0:
        limit = exp(-rate)
        k = 0
        p = 1.0
        while True:
            p *= _uniform(s)
            if p <= limit:
                return k
            k += 1
    return _poisson_ptrs(s, rate)


# ----------------------------------------------------------- python wrappers

def next_u64(uint64_t[::1] state):
    """Advance xoshiro256++ one step and return the 64-bit output."""
    return _next(&state[0])


def uniform(uint64_t[::1] state):
    """Uniform double in [0, 1)."""
    return _uniform(&state[0])


def randint(uint64_t[::1] state, n):
    """Unbiased integer in [0, n) via threshold rejection."""
    return _randint(&state[0], n)


def normal(uint64_t[::1] state):
    """Standard normal via Box-Muller; always consumes two words."""
    return _normal(&state[0])


def gamma(uint64_t[::1] state, double shape):
    """Gamma(shape, 1) by Marsaglia-Tsang squeeze, boosted for shape < 1."""
    return _gamma(&state[0], shape)


def poisson(uint64_t[::1] state, double rate):
    """Poisson variate: sequential inversion below 10, PTRS rejection above."""
    return _poisson(&state[0], rate)


def uniform_fill(uint64_t[::1] state, double[::1] out):
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t i
    with nogil:
        for i in range(out.shape[0]):
            out[i] = _uniform(s)


def normal_fill(uint64_t[::1] state, double[::1] out):
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t i
    with nogil:
        for i in range(out.shape[0]):
            out[i] = _normal(s)


def gamma_fill(uint64_t[::1] state, double shape, double[::1] out):
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t i
    with nogil:
        for i in range(out.shape[0]):
            out[i] = _gamma(s, shape)


def poisson_fill(uint64_t[::1] state, double rate, int64_t[::1] out):
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t i
    with nogil:
        for i in range(out.shape[0]):
            out[i] = _poisson(s, rate)


def randint_fill(uint64_t[::1] state, n, int32_t[::1] out):
    cdef uint64_t* s = &state[0]
    cdef int64_t nn = n
    cdef Py_ssize_t i
    with nogil:
        for i in range(out.shape[0]):
            out[i] = <int32_t>_randint(s, nn)


# ---------------------------------------------------------------- alias tables

cdef void _vose(const double[::1] w, double scale, Py_ssize_t base, Py_ssize_t n,
                double[::1] prob, int32_t[::1] alias, double[::1] pbuf,
                int32_t[::1] small, int32_t[::1] large) nogil:
    cdef Py_ssize_t ns = 0, nl = 0, i
    cdef int32_t sidx, lidx
    cdef double p
    for i in range(n):
        p = w[base + i] * scale
        pbuf[i] = p
        if p < 1.0:
            small[ns] = <int32_t>i
            ns += 1
        else:
            large[nl] = <int32_t>i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        sidx = small[ns]
        nl -= 1
        lidx = large[nl]
        prob[base + sidx] = pbuf[sidx]
        alias[base + sidx] = lidx
        pbuf[lidx] = (pbuf[lidx] + pbuf[sidx]) - 1.0
        if pbuf[lidx] < 1.0:
            small[ns] = lidx
            ns += 1
        else:
            large[nl] = lidx
            nl += 1
    while nl > 0:
        nl -= 1
        i = large[nl]
        prob[base + i] = 1.0
        alias[base + i] = <int32_t>i
    while ns > 0:
        ns -= 1
        i = small[ns]
        prob[base + i] = 1.0
        alias[base + i] = <int32_t>i


def alias_build(const double[::1] weights, double[::1] prob, int32_t[::1] alias):
    """Build a Walker/Vose table for one weight vector (validated by caller)."""
    cdef Py_ssize_t n = weights.shape[0]
    cdef double total = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        total += weights[i]
    cdef double scale = n / total
    pbuf = np.empty(n, dtype=np.float64)
    small = np.empty(n, dtype=np.int32)
    large = np.empty(n, dtype=np.int32)
    cdef double[::1] pb = pbuf
    cdef int32_t[::1] sm = small
    cdef int32_t[::1] lg = large
    _vose(weights, scale, 0, n, prob, alias, pb, sm, lg)


cdef inline int64_t _alias_draw(uint64_t* s, const double[::1] prob,
                                const int32_t[::1] alias, Py_ssize_t base,
                                Py_ssize_t n) nogil:
    cdef int64_t j = _randint(s, n)
    cdef double u = _uniform(s)
    if u < prob[base + j]:
        return j
    return alias[base + j]


def alias_draw(uint64_t[::1] state, const double[::1] prob, const int32_t[::1] alias):
    """One draw: a fair-die index plus one Bernoulli."""
    return _alias_draw(&state[0], prob, alias, 0, prob.shape[0])


def alias_draw_fill(uint64_t[::1] state, const double[::1] prob,
                    const int32_t[::1] alias, int32_t[::1] out):
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t n = prob.shape[0]
    cdef Py_ssize_t i
    with nogil:
        for i in range(out.shape[0]):
            out[i] = <int32_t>_alias_draw(s, prob, alias, 0, n)


# ------------------------------------------------------- dirichlet and the urn

def dirichlet_fill(uint64_t[::1] state, const double[::1] conc, double[:, ::1] out):
    """Fill rows of out with Dir(conc) via normalized gammas."""
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t p = conc.shape[0]
    cdef Py_ssize_t r, j
    cdef double total, g, inv
    with nogil:
        for r in range(out.shape[0]):
            while True:
                total = 0.0
                for j in range(p):
                    g = _gamma(s, conc[j])
                    out[r, j] = g
                    total += g
                if total > 0.0:
                    break
            inv = 1.0 / total
            for j in range(p):
                out[r, j] *= inv


def ppu_direct_counts(uint64_t[::1] state, const double[::1] conc,
                      int64_t[::1] counts):
    """One urn draw as raw counts; returns (total, redraws)."""
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t p = conc.shape[0]
    cdef Py_ssize_t j
    cdef int64_t c, total = 0, redraws = 0
    with nogil:
        while True:
            total = 0
            for j in range(p):
                c = _poisson(s, conc[j])
                counts[j] = c
                total += c
            if total > 0:
                break
            redraws += 1
    return total, redraws


def ppu_direct_fill(uint64_t[::1] state, const double[::1] conc,
                    double[:, ::1] out):
    """Fill rows of out with normalized urn draws; returns total redraws."""
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t p = conc.shape[0]
    counts_arr = np.empty(p, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef Py_ssize_t r, j
    cdef int64_t c, total, redraws = 0
    cdef double inv
    with nogil:
        for r in range(out.shape[0]):
            while True:
                total = 0
                for j in range(p):
                    c = _poisson(s, conc[j])
                    counts[j] = c
                    total += c
                if total > 0:
                    break
                redraws += 1
            inv = 1.0 / total
            for j in range(p):
                out[r, j] = counts[j] * inv
    return redraws


def ppu_hier_fill(uint64_t[::1] state, double varpi, const double[::1] fprob,
                  const int32_t[::1] falias, double[:, ::1] out):
    """Arrival-process construction: Pois+(varpi) arrivals, categorical colors."""
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t p = fprob.shape[0]
    counts_arr = np.empty(p, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef Py_ssize_t r, j
    cdef int64_t pi, t
    cdef double inv
    with nogil:
        for r in range(out.shape[0]):
            while True:
                pi = _poisson(s, varpi)
                if pi > 0:
                    break
            for j in range(p):
                counts[j] = 0
            for t in range(pi):
                counts[_alias_draw(s, fprob, falias, 0, p)] += 1
            inv = 1.0 / pi
            for j in range(p):
                out[r, j] = counts[j] * inv


# -------------------------------------------------------- cached poisson draws

cdef inline int64_t _cached_poisson(uint64_t* s, const int64_t[::1] offsets,
                                    const double[::1] cprob, const int32_t[::1] calias,
                                    double beta, int64_t limit,
                                    int64_t l) nogil:
    cdef Py_ssize_t o
    cdef Py_ssize_t n
    cdef int64_t j
    cdef double u, mu, x, k
    if l <= limit:
        o = offsets[l]
        n = offsets[l + 1] - o
        j = _randint(s, n)
        u = _uniform(s)
        if u < cprob[o + j]:
            return j
        return calias[o + j]
    mu = beta + l
    x = _normal(s) * sqrt(mu) + mu
    k = floor(x + 0.5)
    if k < 0:
        return 0
    return <int64_t>k


def cached_poisson(uint64_t[::1] state, const int64_t[::1] offsets,
                   const double[::1] cprob, const int32_t[::1] calias, double beta,
                   limit, l):
    """Pois(beta + l): alias table for l <= limit, rounded gaussian above."""
    return _cached_poisson(&state[0], offsets, cprob, calias, beta, limit, l)


cdef inline Py_ssize_t _bisect_right(const int32_t[::1] arr, Py_ssize_t n,
                                     int64_t x) nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline int64_t _kth_zero(const int32_t[::1] nz_ids, Py_ssize_t nnz,
                              int64_t nvals, int64_t j) nogil:
    cdef int64_t lo = 0, hi = nvals - 1, mid, zeros_le
    while lo < hi:
        mid = (lo + hi) >> 1
        zeros_le = (mid + 1) - _bisect_right(nz_ids, nnz, mid)
        if zeros_le >= j + 1:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef int _cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef int64_t x = (<const int64_t*>a)[0]
    cdef int64_t y = (<const int64_t*>b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


def ppu_row_draw(uint64_t[::1] state, const int32_t[::1] nz_ids,
                 const int32_t[::1] nz_counts, double beta, nvals,
                 const int64_t[::1] offsets, const double[::1] cprob,
                 const int32_t[::1] calias, limit, int32_t[::1] out_ids,
                 int64_t[::1] out_counts, int32_t[::1] nz_buf_ids,
                 int64_t[::1] nz_buf_counts, int64_t[::1] rank_buf):
    """Draw one sparse topic row of the urn with rates beta + count.

    Returns (entries_written, total, redraws); entries_written == -1 when the
    caller's buffers are too small (caller restores the pre-call state,
    enlarges, retries).
    """
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t nnz = nz_ids.shape[0]
    cdef int64_t nv = nvals
    cdef int64_t lim = limit
    cdef int64_t nzeros = nv - nnz
    cdef Py_ssize_t cap = out_ids.shape[0]
    cdef int64_t redraws = 0, total = 0, nblock = 0, c, r, w
    cdef Py_ssize_t a, t, i, n_out
    cdef bint overflow = False
    with nogil:
        while True:
            a = 0
            total = 0
            for t in range(nnz):
                c = _cached_poisson(s, offsets, cprob, calias, beta, lim,
                                    nz_counts[t])
                if c > 0:
                    nz_buf_ids[a] = nz_ids[t]
                    nz_buf_counts[a] = c
                    a += 1
                    total += c
            nblock = 0
            if nzeros > 0:
                nblock = _poisson(s, beta * nzeros)
                if a + nblock > cap:
                    overflow = True
                    break
                for t in range(nblock):
                    rank_buf[t] = _randint(s, nzeros)
                total += nblock
            if total > 0:
                break
            redraws += 1
        if not overflow:
            if nblock > 1:
                qsort(&rank_buf[0], nblock, sizeof(int64_t), _cmp_i64)
            i = 0
            n_out = 0
            t = 0
            while t < nblock:
                r = rank_buf[t]
                c = 1
                t += 1
                while t < nblock and rank_buf[t] == r:
                    c += 1
                    t += 1
                w = _kth_zero(nz_ids, nnz, nv, r)
                while i < a and nz_buf_ids[i] < w:
                    out_ids[n_out] = nz_buf_ids[i]
                    out_counts[n_out] = nz_buf_counts[i]
                    i += 1
                    n_out += 1
                out_ids[n_out] = <int32_t>w
                out_counts[n_out] = c
                n_out += 1
            while i < a:
                out_ids[n_out] = nz_buf_ids[i]
                out_counts[n_out] = nz_buf_counts[i]
                i += 1
                n_out += 1
    if overflow:
        return -1, 0, redraws
    return n_out, total, redraws


def gamma_row(uint64_t[::1] state, const int32_t[::1] counts_row, double beta,
              double[::1] out):
    """One Dirichlet row with concentration counts_row + beta; returns redraws."""
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t nvals = counts_row.shape[0]
    cdef Py_ssize_t v
    cdef double total, g, inv
    cdef int64_t redraws = 0
    with nogil:
        while True:
            total = 0.0
            for v in range(nvals):
                g = _gamma(s, counts_row[v] + beta)
                out[v] = g
                total += g
            if total > 0.0:
                break
            redraws += 1
        inv = 1.0 / total
        for v in range(nvals):
            out[v] *= inv
    return redraws


# --------------------------------------------------------------- token kernels

def build_atables(const int64_t[::1] col_ptr, const int32_t[::1] col_topics,
                  const double[::1] col_vals, const double[::1] alpha,
                  double[::1] sigma_a, double[::1] aprob,
                  int32_t[::1] aalias, double[::1] pbuf, int32_t[::1] small,
                  int32_t[::1] large):
    """Per-column alias tables over phi[k, v] * alpha[k] plus their sums."""
    cdef Py_ssize_t nvals = col_ptr.shape[0] - 1
    cdef Py_ssize_t v, lo, n, j
    cdef double total, w, scale
    with nogil:
        for v in range(nvals):
            lo = col_ptr[v]
            n = col_ptr[v + 1] - lo
            if n == 0:
                sigma_a[v] = 0.0
                continue
            total = 0.0
            for j in range(n):
                w = col_vals[lo + j] * alpha[col_topics[lo + j]]
                aprob[lo + j] = w
                total += w
            sigma_a[v] = total
            if total <= 0.0:
                for j in range(n):
                    aprob[lo + j] = 1.0
                    aalias[lo + j] = <int32_t>j
                continue
            scale = n / total
            _vose(aprob, scale, lo, n, aprob, aalias, pbuf, small, large)


cdef inline double _col_probe(const int32_t[::1] col_topics, const double[::1] col_vals,
                              Py_ssize_t lo, Py_ssize_t n,
                              int32_t k) nogil:
    cdef Py_ssize_t a = 0, b = n, mid
    cdef int32_t t
    while a < b:
        mid = (a + b) >> 1
        t = col_topics[lo + mid]
        if t == k:
            return col_vals[lo + mid]
        if t < k:
            a = mid + 1
        else:
            b = mid
    return 0.0


cdef inline int32_t _fallback_draw(uint64_t* s, Py_ssize_t d,
                                   const int32_t[:, ::1] m, const double[::1] alpha,
                                   double alpha_sum, int64_t doc_tokens_m1,
                                   Py_ssize_t ntopics) nogil:
    cdef double total = alpha_sum + doc_tokens_m1
    cdef double u = _uniform(s) * total
    cdef double cum = 0.0
    cdef Py_ssize_t k
    for k in range(ntopics):
        cum += alpha[k] + m[d, k]
        if u < cum:
            return <int32_t>k
    return <int32_t>(ntopics - 1)


cdef int32_t _token_draw(uint64_t* s, int32_t v, Py_ssize_t d,
                         const int32_t[:, ::1] m, const int32_t[:, ::1] m_list,
                         const int32_t[::1] m_count, Py_ssize_t ntopics,
                         const int64_t[::1] col_ptr, const int32_t[::1] col_topics,
                         const double[::1] col_vals, const double[::1] aprob,
                         const int32_t[::1] aalias, const double[::1] sigma_a,
                         const double[::1] alpha, double alpha_sum,
                         int64_t doc_tokens_m1, int32_t[::1] scratch_k,
                         double[::1] scratch_w, int64_t[::1] counters) nogil:
    cdef Py_ssize_t lo = col_ptr[v]
    cdef Py_ssize_t cs = col_ptr[v + 1] - lo
    cdef Py_ssize_t mc, j, npairs
    cdef int32_t k, mv, idx
    cdef double sa, sb, w, phi, total, u, uu, target, cum
    cdef int64_t jj
    if cs == 0:
        counters[3] += 1
        return _fallback_draw(s, d, m, alpha, alpha_sum, doc_tokens_m1,
                              ntopics)
    sa = sigma_a[v]
    mc = m_count[d]
    npairs = 0
    sb = 0.0
    if cs <= mc:
        counters[0] += cs
        counters[1] += cs
        for j in range(cs):
            k = col_topics[lo + j]
            mv = m[d, k]
            if mv > 0:
                w = col_vals[lo + j] * mv
                scratch_k[npairs] = k
                scratch_w[npairs] = w
                npairs += 1
                sb += w
    else:
        counters[0] += mc
        counters[1] += mc
        for j in range(mc):
            k = m_list[d, j]
            if cs == ntopics:
                phi = col_vals[lo + k]
            else:
                phi = _col_probe(col_topics, col_vals, lo, cs, k)
            if phi > 0.0:
                w = phi * m[d, k]
                scratch_k[npairs] = k
                scratch_w[npairs] = w
                npairs += 1
                sb += w
    total = sa + sb
    if total <= 0.0:
        counters[3] += 1
        return _fallback_draw(s, d, m, alpha, alpha_sum, doc_tokens_m1,
                              ntopics)
    u = _uniform(s) * total
    if u < sa:
        counters[2] += 1
        jj = _randint(s, cs)
        uu = _uniform(s)
        if uu < aprob[lo + jj]:
            idx = <int32_t>jj
        else:
            idx = aalias[lo + jj]
        return col_topics[lo + idx]
    target = u - sa
    cum = 0.0
    for j in range(npairs):
        cum += scratch_w[j]
        if target < cum:
            return scratch_k[j]
    return scratch_k[npairs - 1]


def z_token_draw(uint64_t[::1] state, v, d, const int32_t[:, ::1] m,
                 const int32_t[:, ::1] m_list, const int32_t[::1] m_count,
                 const int64_t[::1] col_ptr, const int32_t[::1] col_topics,
                 const double[::1] col_vals, const double[::1] aprob,
                 const int32_t[::1] aalias, const double[::1] sigma_a, const double[::1] alpha,
                 double alpha_sum, doc_tokens_m1, int32_t[::1] scratch_k,
                 double[::1] scratch_w, int64_t[::1] counters):
    """Public single-token draw sharing the sweep's code path."""
    return _token_draw(&state[0], v, d, m, m_list, m_count, alpha.shape[0],
                       col_ptr, col_topics, col_vals, aprob, aalias, sigma_a,
                       alpha, alpha_sum, doc_tokens_m1, scratch_k, scratch_w,
                       counters)


def z_sweep(uint64_t[::1] state, d_lo, d_hi, const int64_t[::1] doc_ptr,
            const int32_t[::1] tokens, int32_t[::1] z, int32_t[:, ::1] m,
            int32_t[:, ::1] m_list, int32_t[::1] m_count,
            int32_t[:, ::1] m_pos, const int64_t[::1] col_ptr,
            const int32_t[::1] col_topics, const double[::1] col_vals,
            const double[::1] aprob, const int32_t[::1] aalias, const double[::1] sigma_a,
            const double[::1] alpha, double alpha_sum, int32_t[::1] delta_k,
            int32_t[::1] delta_v, int32_t[::1] delta_c,
            int64_t[::1] counters, int32_t[::1] scratch_k,
            double[::1] scratch_w):
    """Resample every token of docs [d_lo, d_hi); returns n-delta count."""
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t ntopics = alpha.shape[0]
    cdef Py_ssize_t lo = d_lo, hi = d_hi
    cdef Py_ssize_t d, start, end, i, p, last
    cdef int64_t nd = 0, dtm1
    cdef int32_t v, k0, k1, c, cnew, moved
    with nogil:
        for d in range(lo, hi):
            start = doc_ptr[d]
            end = doc_ptr[d + 1]
            dtm1 = end - start - 1
            for i in range(start, end):
                v = tokens[i]
                k0 = z[i]
                c = m[d, k0] - 1
                m[d, k0] = c
                if c == 0:
                    last = m_count[d] - 1
                    p = m_pos[d, k0]
                    moved = m_list[d, last]
                    m_list[d, p] = moved
                    m_pos[d, moved] = <int32_t>p
                    m_count[d] = <int32_t>last
                k1 = _token_draw(s, v, d, m, m_list, m_count, ntopics,
                                 col_ptr, col_topics, col_vals, aprob,
                                 aalias, sigma_a, alpha, alpha_sum, dtm1,
                                 scratch_k, scratch_w, counters)
                cnew = m[d, k1]
                m[d, k1] = cnew + 1
                if cnew == 0:
                    p = m_count[d]
                    m_list[d, p] = k1
                    m_pos[d, k1] = <int32_t>p
                    m_count[d] = <int32_t>(p + 1)
                z[i] = k1
                if k1 != k0:
                    delta_k[nd] = k0
                    delta_v[nd] = v
                    delta_c[nd] = -1
                    nd += 1
                    delta_k[nd] = k1
                    delta_v[nd] = v
                    delta_c[nd] = 1
                    nd += 1
    return nd


cdef inline int32_t _collapsed_draw(uint64_t* s, int32_t v, Py_ssize_t d,
                                    const int32_t[:, ::1] n, const int64_t[::1] n_tot,
                                    const int32_t[:, ::1] m, const double[::1] alpha,
                                    double beta, double vbeta,
                                    double[::1] scratch) nogil:
    cdef Py_ssize_t ntopics = n.shape[0]
    cdef Py_ssize_t k
    cdef double total = 0.0, w, u, cum
    for k in range(ntopics):
        w = (n[k, v] + beta) / (n_tot[k] + vbeta) * (m[d, k] + alpha[k])
        scratch[k] = w
        total += w
    u = _uniform(s) * total
    cum = 0.0
    for k in range(ntopics):
        cum += scratch[k]
        if u < cum:
            return <int32_t>k
    return <int32_t>(ntopics - 1)


def collapsed_token_draw(uint64_t[::1] state, v, d, const int32_t[:, ::1] n,
                         const int64_t[::1] n_tot, const int32_t[:, ::1] m,
                         const double[::1] alpha, double beta,
                         double[::1] scratch):
    """Full-conditional draw (n[k,v]+b)/(n_tot[k]+V b)*(m[d,k]+a_k)."""
    cdef double vbeta = n.shape[1] * beta
    return _collapsed_draw(&state[0], v, d, n, n_tot, m, alpha, beta, vbeta,
                           scratch)


def collapsed_sweep(uint64_t[::1] state, const int64_t[::1] doc_ptr,
                    const int32_t[::1] tokens, int32_t[::1] z, int32_t[:, ::1] m,
                    int32_t[:, ::1] m_list, int32_t[::1] m_count,
                    int32_t[:, ::1] m_pos, int32_t[:, ::1] n,
                    int32_t[:, ::1] n_list, int32_t[::1] n_count,
                    int32_t[:, ::1] n_pos, int64_t[::1] n_tot,
                    const double[::1] alpha, double beta, double[::1] scratch):
    """Strictly sequential sweep updating m and n token by token."""
    cdef uint64_t* s = &state[0]
    cdef Py_ssize_t ndocs = doc_ptr.shape[0] - 1
    cdef double vbeta = n.shape[1] * beta
    cdef Py_ssize_t d, start, end, i, p, last
    cdef int32_t v, k0, k1, c, cnew, moved
    with nogil:
        for d in range(ndocs):
            start = doc_ptr[d]
            end = doc_ptr[d + 1]
            for i in range(start, end):
                v = tokens[i]
                k0 = z[i]
                c = m[d, k0] - 1
                m[d, k0] = c
                if c == 0:
                    last = m_count[d] - 1
                    p = m_pos[d, k0]
                    moved = m_list[d, last]
                    m_list[d, p] = moved
                    m_pos[d, moved] = <int32_t>p
                    m_count[d] = <int32_t>last
                c = n[k0, v] - 1
                n[k0, v] = c
                n_tot[k0] -= 1
                if c == 0:
                    last = n_count[k0] - 1
                    p = n_pos[k0, v]
                    moved = n_list[k0, last]
                    n_list[k0, p] = moved
                    n_pos[k0, moved] = <int32_t>p
                    n_count[k0] = <int32_t>last
                k1 = _collapsed_draw(s, v, d, n, n_tot, m, alpha, beta,
                                     vbeta, scratch)
                cnew = m[d, k1]
                m[d, k1] = cnew + 1
                if cnew == 0:
                    p = m_count[d]
                    m_list[d, p] = k1
                    m_pos[d, k1] = <int32_t>p
                    m_count[d] = <int32_t>(p + 1)
                cnew = n[k1, v]
                n[k1, v] = cnew + 1
                n_tot[k1] += 1
                if cnew == 0:
                    p = n_count[k1]
                    n_list[k1, p] = v
                    n_pos[k1, v] = <int32_t>p
                    n_count[k1] = <int32_t>(p + 1)
                z[i] = k1


def apply_deltas(int32_t[:, ::1] n, int32_t[:, ::1] n_list,
                 int32_t[::1] n_count, int32_t[:, ::1] n_pos,
                 int64_t[::1] n_tot, const int32_t[::1] delta_k,
                 const int32_t[::1] delta_v, const int32_t[::1] delta_c, ndeltas):
    """Merge one shard's buffered n updates (each delta is +1 or -1)."""
    cdef Py_ssize_t nd = ndeltas
    cdef Py_ssize_t i, p, last
    cdef int32_t k, v, c, old, new, moved
    with nogil:
        for i in range(nd):
            k = delta_k[i]
            v = delta_v[i]
            c = delta_c[i]
            old = n[k, v]
            new = old + c
            n[k, v] = new
            n_tot[k] += c
            if old == 0:
                p = n_count[k]
                n_list[k, p] = v
                n_pos[k, v] = <int32_t>p
                n_count[k] = <int32_t>(p + 1)
            elif new == 0:
                last = n_count[k] - 1
                p = n_pos[k, v]
                moved = n_list[k, last]
                n_list[k, p] = moved
                n_pos[k, moved] = <int32_t>p
                n_count[k] = <int32_t>last
