"""Compiled inner loops.

All kernels take centred prefix sums ``cs``/``cs2`` of length ``n + 1`` with
``cs[0] = 0`` and work with 1-based positions unless stated
otherwise: the sum of ``Y`` over ``[a, b)`` is ``cs[b - 1] - cs[a - 1]``.
"""

import numpy as np
from numba import njit

# relative tolerance under which two criterion values count as tied
TIE_RTOL = 1e-10


@njit(cache=True, nogil=True)
def cusum_value(cs, t1, t2, t3):
    d1 = t2 - t1
    d2 = t3 - t2
    right = (cs[t3 - 1] - cs[t2 - 1]) / d2
    left = (cs[t2 - 1] - cs[t1 - 1]) / d1
    return (right - left) * np.sqrt(d1 * d2 / (d1 + d2))


@njit(cache=True, nogil=True)
def _better(v, c, best, bestc, found):
    if not found:
        return True
    scale = max(1.0, abs(best))
    if v < best - TIE_RTOL * scale:
        return True
    if abs(v - best) <= TIE_RTOL * scale and c < bestc:
        return True
    return False


@njit(cache=True, nogil=True)
def dp_backward(cs, cs2, pen_len, beta, kprune, prune_tol):
    """Suffix dynamic programme over segmentations.

    Boundaries are 0-based here: ``a`` in ``0..n`` and a segment ``[a, b)``
    covers ``Y[a:b]``.  ``G[a]`` is the optimal cost of ``Y[a:]`` with each
    segment charged ``rss + pen_len[b - a] + beta``; ``cnt[a]`` the fewest
    segments reaching it and ``choice[a]`` the smallest end achieving it.

    With ``prune_tol >= 0`` a candidate end ``b`` is dropped at ``a`` once
    ``rss(a, b) + pen_len[b-a] - kprune[b-a] + G[b] > G[a] + prune_tol``,
    where ``kprune[m]`` bounds the penalty saving of merging across ``a``.
    A negative ``prune_tol`` disables pruning.
    """
    n = cs.size - 1
    G = np.empty(n + 1)
    cnt = np.empty(n + 1, dtype=np.int64)
    choice = np.empty(n + 1, dtype=np.int64)
    G[n] = 0.0
    cnt[n] = 0
    choice[n] = n
    # candidate ends, stored in decreasing order (newest, smallest last)
    cand = np.empty(n + 1, dtype=np.int64)
    slack = np.empty(n + 1)
    m = 1
    cand[0] = n
    visited = 0
    vals = np.empty(n + 1)
    for a in range(n - 1, -1, -1):
        lo = np.inf
        for j in range(m - 1, -1, -1):
            b = cand[j]
            length = b - a
            sm = cs[b] - cs[a]
            r = (cs2[b] - cs2[a]) - sm * sm / length
            r = max(r, 0.0)
            v = r + pen_len[length] + beta + G[b]
            vals[j] = v
            lo = min(lo, v)
            slack[j] = r + pen_len[length] - kprune[length] + G[b]
        # among near-minimal ends, fewest segments then smallest end
        tol = TIE_RTOL * max(1.0, abs(lo))
        best = np.inf
        bestc = 0
        bestb = -1
        for j in range(m - 1, -1, -1):
            v = vals[j]
            if v <= lo + 2.0 * tol:
                b = cand[j]
                if _better(v, cnt[b] + 1, best, bestc, bestb >= 0):
                    best = v
                    bestc = cnt[b] + 1
                    bestb = b
        visited += m
        G[a] = best
        cnt[a] = bestc
        choice[a] = bestb
        if prune_tol >= 0.0:
            limit = best + prune_tol
            k = 0
            for j in range(m):
                if not slack[j] > limit:
                    cand[k] = cand[j]
                    k += 1
            m = k
        cand[m] = a
        m += 1
    return G, cnt, choice, visited


@njit(cache=True, nogil=True)
def dp_exact(cs, cs2, pen_len, beta):
    """Unpruned :func:`dp_backward`, organised for vectorisation.

    Same recursion and tie-breaking; every end ``b > a`` is a candidate.
    """
    n = cs.size - 1
    G = np.empty(n + 1)
    cnt = np.empty(n + 1, dtype=np.int64)
    choice = np.empty(n + 1, dtype=np.int64)
    G[n] = 0.0
    cnt[n] = 0
    choice[n] = n
    v = np.empty(n + 1)
    for a in range(n - 1, -1, -1):
        ca = cs[a]
        c2a = cs2[a]
        lo = np.inf
        for b in range(a + 1, n + 1):
            sm = cs[b] - ca
            r = (cs2[b] - c2a) - sm * sm / (b - a)
            r = max(r, 0.0)
            x = r + pen_len[b - a] + beta + G[b]
            v[b] = x
            lo = min(lo, x)
        # among near-minimal ends, fewest segments then smallest end
        tol = TIE_RTOL * max(1.0, abs(lo))
        best = np.inf
        bestc = 0
        bestb = -1
        for b in range(a + 1, n + 1):
            x = v[b]
            if x <= lo + 2.0 * tol:
                if _better(x, cnt[b] + 1, best, bestc, bestb >= 0):
                    best = x
                    bestc = cnt[b] + 1
                    bestb = b
        G[a] = best
        cnt[a] = bestc
        choice[a] = bestb
    return G, cnt, choice, (n * (n + 1)) // 2


@njit(cache=True, nogil=True)
def dp_capped(cs, cs2, pen_len, beta, kmax):
    """Exact minimiser over segmentations with at most ``kmax + 1`` segments.

    ``H[k, a]`` is the optimal cost of ``Y[a:]`` split into exactly ``k``
    segments; returns ``H`` and the smallest optimal first end ``choice``.
    """
    n = cs.size - 1
    kseg = min(kmax + 1, n)
    H = np.full((kseg + 1, n + 1), np.inf)
    choice = np.full((kseg + 1, n + 1), -1, dtype=np.int64)
    H[0, n] = 0.0
    for k in range(1, kseg + 1):
        for a in range(n - 1, -1, -1):
            found = False
            best = 0.0
            bestb = -1
            # at least k - 1 observations must remain after the first segment
            for b in range(a + 1, n - (k - 1) + 1):
                if H[k - 1, b] == np.inf:
                    continue
                length = b - a
                sm = cs[b] - cs[a]
                r = (cs2[b] - cs2[a]) - sm * sm / length
                if r < 0.0:
                    r = 0.0
                v = r + pen_len[length] + beta + H[k - 1, b]
                if not found or v < best - TIE_RTOL * max(1.0, abs(best)):
                    best = v
                    bestb = b
                    found = True
            if found:
                H[k, a] = best
                choice[k, a] = bestb
    return H, choice


@njit(cache=True, nogil=True)
def radii(cs, taus, zeta, rs):
    """Smallest radius in ``rs`` whose clamped centred CUSUM is significant.

    Returns ``(r_hat, t1, t3)`` per position, with ``r_hat = -1`` when no
    radius qualifies.
    """
    n = cs.size - 1
    m = taus.size
    out_r = np.full(m, -1, dtype=np.int64)
    out_t1 = np.zeros(m, dtype=np.int64)
    out_t3 = np.zeros(m, dtype=np.int64)
    for i in range(m):
        tau = taus[i]
        for r in rs:
            t1 = max(tau - r, 1)
            t3 = min(tau + r, n + 1)
            d1 = tau - t1
            d2 = t3 - tau
            c = cusum_value(cs, t1, tau, t3)
            thr = np.sqrt(2.0 * np.log(n * (d1 + d2) / (d1 * d2))) + zeta
            if abs(c) > thr:
                out_r[i] = r
                out_t1[i] = t1
                out_t3[i] = t3
                break
            if t1 == 1 and t3 == n + 1:
                break
    return out_r, out_t1, out_t3


@njit(cache=True, nogil=True)
def _score(cs, n, t1, t2, t3, out):
    d1 = t2 - t1
    d2 = t3 - t2
    nn = cusum_value(cs, t1, t2, t3)
    lg = np.log(n * (d1 + d2) / (d1 * d2))
    z = abs(nn) - np.sqrt(2.0 * lg)
    q = 0.25 * nn * nn - 2.0 * lg
    if z > out[0]:
        out[0] = z
    if q > out[1]:
        out[1] = q


@njit(cache=True, nogil=True)
def sup_full(cs):
    """``(sup |N| - sqrt(2 lg), sup N^2/4 - 2 lg)`` over every triad."""
    n = cs.size - 1
    # weights and scale terms depend on the two lengths only
    w = np.empty((n + 1, n + 1))
    s = np.empty((n + 1, n + 1))
    lg2 = np.empty((n + 1, n + 1))
    for d1 in range(1, n + 1):
        for d2 in range(1, n + 1 - d1 + 1):
            w[d1, d2] = np.sqrt(d1 * d2 / (d1 + d2))
            lg = np.log(n * (d1 + d2) / (d1 * d2))
            s[d1, d2] = np.sqrt(2.0 * lg)
            lg2[d1, d2] = 2.0 * lg
    zmax = -np.inf
    qmax = -np.inf
    for t1 in range(1, n):
        for t2 in range(t1 + 1, n + 1):
            d1 = t2 - t1
            left = (cs[t2 - 1] - cs[t1 - 1]) / d1
            for t3 in range(t2 + 1, n + 2):
                d2 = t3 - t2
                nn = ((cs[t3 - 1] - cs[t2 - 1]) / d2 - left) * w[d1, d2]
                z = abs(nn) - s[d1, d2]
                q = 0.25 * nn * nn - lg2[d1, d2]
                if z > zmax:
                    zmax = z
                if q > qmax:
                    qmax = q
    return np.array([zmax, qmax])


@njit(cache=True, nogil=True)
def sup_grid(cs, dyadic):
    """Same statistics with both half-lengths dyadic, clamped at the edges."""
    n = cs.size - 1
    out = np.array([-np.inf, -np.inf])
    for t2 in range(2, n + 1):
        for d1 in dyadic:
            a = min(d1, t2 - 1)
            for d2 in dyadic:
                b = min(d2, n + 1 - t2)
                _score(cs, n, t2 - a, t2, t2 + b, out)
                if b < d2:
                    break
            if a < d1:
                break
    return out


@njit(cache=True, nogil=True)
def sup_centered(cs):
    """Same statistics over the clamped centred triads ``t(tau, r)``."""
    n = cs.size - 1
    out = np.array([-np.inf, -np.inf])
    for tau in range(2, n + 1):
        for r in range(1, n + 1):
            t1 = max(tau - r, 1)
            t3 = min(tau + r, n + 1)
            _score(cs, n, t1, tau, t3, out)
            if t1 == 1 and t3 == n + 1:
                break
    return out


@njit(cache=True, nogil=True)
def _find(nxt, x):
    root = x
    while nxt[root] != root:
        root = nxt[root]
    while nxt[x] != root:
        following = nxt[x]
        nxt[x] = root
        x = following
    return root


@njit(cache=True, nogil=True)
def prune_scan(order, r, lo, hi, n):
    """Keep-mask of the pruning scan.

    ``order`` lists candidates by decreasing radius; ``r < 0`` means an
    infinite radius.  Walking ``order`` backwards, a candidate is dropped if
    its radius is infinite or its interval ``[lo, hi]`` meets an interval of
    any candidate seen before it.  Covered points live in a Fenwick tree;
    ``nxt`` skips already covered points so that each point is inserted once.
    """
    m = order.size
    keep = np.zeros(m, dtype=np.bool_)
    tree = np.zeros(n + 2, dtype=np.int64)
    nxt = np.arange(n + 3)
    for idx in range(m - 1, -1, -1):
        i = order[idx]
        if r[i] < 0:
            continue
        a = lo[i]
        b = hi[i]
        # covered points in [a, b]
        s = 0
        j = b
        while j > 0:
            s += tree[j]
            j -= j & -j
        j = a - 1
        while j > 0:
            s -= tree[j]
            j -= j & -j
        keep[i] = s == 0
        x = _find(nxt, a)
        while x <= b:
            j = x
            while j <= n + 1:
                tree[j] += 1
                j += j & -j
            nxt[x] = x + 1
            x = _find(nxt, x + 1)
    return keep
