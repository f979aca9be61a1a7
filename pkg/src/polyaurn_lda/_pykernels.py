"""Pure-Python fallback for the sampling kernels.

This module implements exactly the same generator (xoshiro256++) and the
same variate algorithms as the compiled core, consuming random words in
the same order, so either backend reproduces the other's chains bit for
bit.  It is orders of magnitude slower and exists so the package works
without a C toolchain; the compiled module is preferred automatically.

All kernels take the RNG state as a uint64[4] ndarray and mutate it in
place.  Scratch buffers are supplied by the caller so the call signatures
match the compiled versions.
"""

import math

import numpy as np

IMPL = "python"

_M64 = (1 << 64) - 1
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 6.283185307179586


# ------------------------------------------------------------------ RNG core

def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _M64


def next_u64(state):
    """Advance xoshiro256++ one step and return the 64-bit output."""
    s0 = int(state[0])
    s1 = int(state[1])
    s2 = int(state[2])
    s3 = int(state[3])
    out = (_rotl((s0 + s3) & _M64, 23) + s0) & _M64
    t = (s1 << 17) & _M64
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return out


def uniform(state):
    """Uniform double in [0, 1)."""
    return (next_u64(state) >> 11) * _INV53


def _uniform_pos(state):
    """Uniform double in (0, 1]."""
    return ((next_u64(state) >> 11) + 1) * _INV53


def randint(state, n):
    """Unbiased integer in [0, n) via threshold rejection."""
    t = (1 << 64) % n
    while True:
        x = next_u64(state)
        if x >= t:
            return int(x % n)


def normal(state):
    """Standard normal via Box-Muller; always consumes two words."""
    u1 = _uniform_pos(state)
    u2 = uniform(state)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


def gamma(state, shape):
    """Gamma(shape, 1) by Marsaglia-Tsang squeeze, boosted for shape < 1."""
    if shape < 1.0:
        g = gamma(state, shape + 1.0)
        u = _uniform_pos(state)
        return g * math.exp(math.log(u) / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = normal(state)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = _uniform_pos(state)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


def poisson(state, rate):
    """Poisson variate: sequential inversion below 10, PTRS rejection above."""
    if rate <= 0.0:
        return 0
    if rate <= 10.0:
        limit = math.exp(-rate)
        k = 0
        p = 1.0
        while True:
            p *= uniform(state)
            if p <= limit:
                return k
            k += 1
    return _poisson_ptrs(state, rate)


def _poisson_ptrs(state, rate):
    b = 0.931 + 2.53 * math.sqrt(rate)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = uniform(state) - 0.5
        v = uniform(state)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + rate + 0.43)
        if us >= 0.07 and v <= v_r:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= k * math.log(rate) - rate - math.lgamma(k + 1.0)):
            return int(k)


# ----------------------------------------------------------------- batch fills

def uniform_fill(state, out):
    for i in range(out.shape[0]):
        out[i] = uniform(state)


def normal_fill(state, out):
    for i in range(out.shape[0]):
        out[i] = normal(state)


def gamma_fill(state, shape, out):
    for i in range(out.shape[0]):
        out[i] = gamma(state, shape)


def poisson_fill(state, rate, out):
    for i in range(out.shape[0]):
        out[i] = poisson(state, rate)


def randint_fill(state, n, out):
    for i in range(out.shape[0]):
        out[i] = randint(state, n)


# ---------------------------------------------------------------- alias tables

def _vose(w, scale, base, n, prob, alias, pbuf, small, large):
    """Vose construction into prob/alias[base:base+n]; pbuf/small/large scratch."""
    ns = 0
    nl = 0
    for i in range(n):
        p = w[base + i] * scale
        pbuf[i] = p
        if p < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        l = large[nl]
        prob[base + s] = pbuf[s]
        alias[base + s] = l
        pbuf[l] = (pbuf[l] + pbuf[s]) - 1.0
        if pbuf[l] < 1.0:
            small[ns] = l
            ns += 1
        else:
            large[nl] = l
            nl += 1
    while nl > 0:
        nl -= 1
        i = large[nl]
        prob[base + i] = 1.0
        alias[base + i] = i
    while ns > 0:
        ns -= 1
        i = small[ns]
        prob[base + i] = 1.0
        alias[base + i] = i


def alias_build(weights, prob, alias):
    """Build a Walker/Vose table for one weight vector (validated by caller)."""
    n = weights.shape[0]
    total = 0.0
    for i in range(n):
        total += weights[i]
    scale = n / total
    pbuf = np.empty(n, dtype=np.float64)
    small = np.empty(n, dtype=np.int32)
    large = np.empty(n, dtype=np.int32)
    _vose(weights, scale, 0, n, prob, alias, pbuf, small, large)


def alias_draw(state, prob, alias):
    """One draw: a fair-die index plus one Bernoulli."""
    n = prob.shape[0]
    j = randint(state, n)
    u = uniform(state)
    return j if u < prob[j] else int(alias[j])


def alias_draw_fill(state, prob, alias, out):
    for i in range(out.shape[0]):
        out[i] = alias_draw(state, prob, alias)


# ------------------------------------------------------- dirichlet and the urn

def dirichlet_fill(state, conc, out):
    """Fill rows of out with Dir(conc) via normalized gammas."""
    p = conc.shape[0]
    for r in range(out.shape[0]):
        while True:
            total = 0.0
            for j in range(p):
                g = gamma(state, conc[j])
                out[r, j] = g
                total += g
            if total > 0.0:
                break
        inv = 1.0 / total
        for j in range(p):
            out[r, j] *= inv


def ppu_direct_counts(state, conc, counts):
    """One urn draw as raw counts; returns (total, redraws)."""
    p = conc.shape[0]
    redraws = 0
    while True:
        total = 0
        for j in range(p):
            c = poisson(state, conc[j])
            counts[j] = c
            total += c
        if total > 0:
            return total, redraws
        redraws += 1


def ppu_direct_fill(state, conc, out):
    """Fill rows of out with normalized urn draws; returns total redraws."""
    p = conc.shape[0]
    counts = np.empty(p, dtype=np.int64)
    redraws = 0
    for r in range(out.shape[0]):
        total, rd = ppu_direct_counts(state, conc, counts)
        redraws += rd
        inv = 1.0 / total
        for j in range(p):
            out[r, j] = counts[j] * inv
    return redraws


def ppu_hier_fill(state, varpi, fprob, falias, out):
    """Arrival-process construction: Pois+(varpi) arrivals, categorical colors."""
    p = fprob.shape[0]
    counts = np.empty(p, dtype=np.int64)
    for r in range(out.shape[0]):
        while True:
            pi = poisson(state, varpi)
            if pi > 0:
                break
        for j in range(p):
            counts[j] = 0
        for _ in range(pi):
            counts[alias_draw(state, fprob, falias)] += 1
        inv = 1.0 / pi
        for j in range(p):
            out[r, j] = counts[j] * inv


# -------------------------------------------------------- cached poisson draws

def cached_poisson(state, offsets, cprob, calias, beta, limit, l):
    """Pois(beta + l): alias table for l <= limit, rounded gaussian above."""
    if l <= limit:
        o = int(offsets[l])
        n = int(offsets[l + 1]) - o
        j = randint(state, n)
        u = uniform(state)
        return j if u < cprob[o + j] else int(calias[o + j])
    mu = beta + l
    x = normal(state) * math.sqrt(mu) + mu
    k = math.floor(x + 0.5)
    return 0 if k < 0 else int(k)


def _bisect_right(arr, n, x):
    """Count of entries <= x in sorted arr[:n]."""
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _kth_zero(nz_ids, nnz, nvals, j):
    """Word id of the j-th (0-based) position absent from sorted nz_ids."""
    lo = 0
    hi = nvals - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        zeros_le = (mid + 1) - _bisect_right(nz_ids, nnz, mid)
        if zeros_le >= j + 1:
            hi = mid
        else:
            lo = mid + 1
    return lo


def ppu_row_draw(state, nz_ids, nz_counts, beta, nvals, offsets, cprob, calias,
                 limit, out_ids, out_counts, nz_buf_ids, nz_buf_counts, rank_buf):
    """Draw one sparse topic row of the urn with rates beta + count.

    Nonzero positions get individual cached draws; the zero block gets one
    Pois(beta * nzeros) total scattered uniformly (the coloring identity).
    Returns (entries_written, total, redraws), or entries_written == -1 when
    the caller's buffers are too small (caller restores the pre-call state,
    enlarges, retries).
    """
    nnz = nz_ids.shape[0]
    nzeros = nvals - nnz
    cap = out_ids.shape[0]
    redraws = 0
    while True:
        a = 0
        total = 0
        for t in range(nnz):
            c = cached_poisson(state, offsets, cprob, calias, beta, limit,
                               int(nz_counts[t]))
            if c > 0:
                nz_buf_ids[a] = nz_ids[t]
                nz_buf_counts[a] = c
                a += 1
                total += c
        nblock = 0
        if nzeros > 0:
            nblock = poisson(state, beta * nzeros)
            if a + nblock > cap:
                return -1, 0, redraws
            for j in range(nblock):
                rank_buf[j] = randint(state, nzeros)
            total += nblock
        if total > 0:
            break
        redraws += 1
    if nblock > 1:
        rank_buf[:nblock].sort()
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
        w = _kth_zero(nz_ids, nnz, nvals, int(r))
        while i < a and nz_buf_ids[i] < w:
            out_ids[n_out] = nz_buf_ids[i]
            out_counts[n_out] = nz_buf_counts[i]
            i += 1
            n_out += 1
        out_ids[n_out] = w
        out_counts[n_out] = c
        n_out += 1
    while i < a:
        out_ids[n_out] = nz_buf_ids[i]
        out_counts[n_out] = nz_buf_counts[i]
        i += 1
        n_out += 1
    return n_out, total, redraws


def gamma_row(state, counts_row, beta, out):
    """One Dirichlet row with concentration counts_row + beta; returns redraws."""
    nvals = counts_row.shape[0]
    redraws = 0
    while True:
        total = 0.0
        for v in range(nvals):
            g = gamma(state, counts_row[v] + beta)
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

def build_atables(col_ptr, col_topics, col_vals, alpha, sigma_a, aprob, aalias,
                  pbuf, small, large):
    """Per-column alias tables over phi[k, v] * alpha[k] plus their sums."""
    nvals = col_ptr.shape[0] - 1
    for v in range(nvals):
        lo = int(col_ptr[v])
        n = int(col_ptr[v + 1]) - lo
        if n == 0:
            sigma_a[v] = 0.0
            continue
        total = 0.0
        for j in range(n):
            w = col_vals[lo + j] * alpha[col_topics[lo + j]]
            aprob[lo + j] = w           # stash weights, scaled in place below
            total += w
        sigma_a[v] = total
        if total <= 0.0:
            for j in range(n):
                aprob[lo + j] = 1.0
                aalias[lo + j] = j
            continue
        scale = n / total
        _vose(aprob, scale, lo, n, aprob, aalias, pbuf, small, large)


def _col_probe(col_topics, col_vals, lo, n, k):
    """phi[k, v] from the sorted column slice, 0.0 when absent."""
    a = 0
    b = n
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


def _fallback_draw(state, d, m, alpha, alpha_sum, doc_tokens_m1, ntopics):
    """Topic draw proportional to alpha_k + m[d, k] (empty-column path)."""
    total = alpha_sum + doc_tokens_m1
    u = uniform(state) * total
    cum = 0.0
    for k in range(ntopics):
        cum += alpha[k] + m[d, k]
        if u < cum:
            return k
    return ntopics - 1


def _token_draw(state, v, d, m, m_list, m_count, ntopics,
                col_ptr, col_topics, col_vals, aprob, aalias, sigma_a,
                alpha, alpha_sum, doc_tokens_m1, scratch_k, scratch_w, counters):
    lo = int(col_ptr[v])
    cs = int(col_ptr[v + 1]) - lo
    if cs == 0:
        counters[3] += 1
        return _fallback_draw(state, d, m, alpha, alpha_sum, doc_tokens_m1,
                              ntopics)
    sa = sigma_a[v]
    mc = int(m_count[d])
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
        return _fallback_draw(state, d, m, alpha, alpha_sum, doc_tokens_m1,
                              ntopics)
    u = uniform(state) * total
    if u < sa:
        counters[2] += 1
        j = randint(state, cs)
        uu = uniform(state)
        idx = j if uu < aprob[lo + j] else int(aalias[lo + j])
        return int(col_topics[lo + idx])
    target = u - sa
    cum = 0.0
    for j in range(npairs):
        cum += scratch_w[j]
        if target < cum:
            return int(scratch_k[j])
    return int(scratch_k[npairs - 1])


def z_token_draw(state, v, d, m, m_list, m_count,
                 col_ptr, col_topics, col_vals, aprob, aalias, sigma_a,
                 alpha, alpha_sum, doc_tokens_m1, scratch_k, scratch_w, counters):
    """Public single-token draw sharing the sweep's code path."""
    ntopics = alpha.shape[0]
    return _token_draw(state, v, d, m, m_list, m_count, ntopics,
                       col_ptr, col_topics, col_vals, aprob, aalias, sigma_a,
                       alpha, alpha_sum, doc_tokens_m1, scratch_k, scratch_w,
                       counters)


def z_sweep(state, d_lo, d_hi, doc_ptr, tokens, z, m, m_list, m_count, m_pos,
            col_ptr, col_topics, col_vals, aprob, aalias, sigma_a,
            alpha, alpha_sum, delta_k, delta_v, delta_c, counters,
            scratch_k, scratch_w):
    """Resample every token of docs [d_lo, d_hi); returns n-delta count."""
    ntopics = alpha.shape[0]
    nd = 0
    for d in range(d_lo, d_hi):
        start = int(doc_ptr[d])
        end = int(doc_ptr[d + 1])
        dtm1 = end - start - 1
        for i in range(start, end):
            v = int(tokens[i])
            k0 = int(z[i])
            c = m[d, k0] - 1
            m[d, k0] = c
            if c == 0:
                last = m_count[d] - 1
                p = m_pos[d, k0]
                moved = m_list[d, last]
                m_list[d, p] = moved
                m_pos[d, moved] = p
                m_count[d] = last
            k1 = _token_draw(state, v, d, m, m_list, m_count, ntopics,
                             col_ptr, col_topics, col_vals, aprob, aalias,
                             sigma_a, alpha, alpha_sum, dtm1,
                             scratch_k, scratch_w, counters)
            cnew = m[d, k1]
            m[d, k1] = cnew + 1
            if cnew == 0:
                p = m_count[d]
                m_list[d, p] = k1
                m_pos[d, k1] = p
                m_count[d] = p + 1
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


def collapsed_token_draw(state, v, d, n, n_tot, m, alpha, beta, scratch):
    """Full-conditional draw (n[k,v]+b)/(n_tot[k]+V b)*(m[d,k]+a_k)."""
    ntopics = n.shape[0]
    vbeta = n.shape[1] * beta
    total = 0.0
    for k in range(ntopics):
        w = (n[k, v] + beta) / (n_tot[k] + vbeta) * (m[d, k] + alpha[k])
        scratch[k] = w
        total += w
    u = uniform(state) * total
    cum = 0.0
    for k in range(ntopics):
        cum += scratch[k]
        if u < cum:
            return k
    return ntopics - 1


def collapsed_sweep(state, doc_ptr, tokens, z, m, m_list, m_count, m_pos,
                    n, n_list, n_count, n_pos, n_tot, alpha, beta, scratch):
    """Strictly sequential sweep updating m and n token by token."""
    ndocs = doc_ptr.shape[0] - 1
    for d in range(ndocs):
        start = int(doc_ptr[d])
        end = int(doc_ptr[d + 1])
        for i in range(start, end):
            v = int(tokens[i])
            k0 = int(z[i])
            c = m[d, k0] - 1
            m[d, k0] = c
            if c == 0:
                last = m_count[d] - 1
                p = m_pos[d, k0]
                moved = m_list[d, last]
                m_list[d, p] = moved
                m_pos[d, moved] = p
                m_count[d] = last
            c = n[k0, v] - 1
            n[k0, v] = c
            n_tot[k0] -= 1
            if c == 0:
                last = n_count[k0] - 1
                p = n_pos[k0, v]
                moved = n_list[k0, last]
                n_list[k0, p] = moved
                n_pos[k0, moved] = p
                n_count[k0] = last
            k1 = collapsed_token_draw(state, v, d, n, n_tot, m, alpha, beta,
                                      scratch)
            cnew = m[d, k1]
            m[d, k1] = cnew + 1
            if cnew == 0:
                p = m_count[d]
                m_list[d, p] = k1
                m_pos[d, k1] = p
                m_count[d] = p + 1
            cnew = n[k1, v]
            n[k1, v] = cnew + 1
            n_tot[k1] += 1
            if cnew == 0:
                p = n_count[k1]
                n_list[k1, p] = v
                n_pos[k1, v] = p
                n_count[k1] = p + 1
            z[i] = k1


def apply_deltas(n, n_list, n_count, n_pos, n_tot, delta_k, delta_v, delta_c,
                 ndeltas):
    """Merge one shard's buffered n updates (each delta is +1 or -1)."""
    for i in range(ndeltas):
        k = int(delta_k[i])
        v = int(delta_v[i])
        c = int(delta_c[i])
        old = n[k, v]
        new = old + c
        n[k, v] = new
        n_tot[k] += c
        if old == 0:
            p = n_count[k]
            n_list[k, p] = v
            n_pos[k, v] = p
            n_count[k] = p + 1
        elif new == 0:
            last = n_count[k] - 1
            p = n_pos[k, v]
            moved = n_list[k, last]
            n_list[k, p] = moved
            n_pos[k, moved] = p
            n_count[k] = last
