"""Hot inner loops, each with a numba kernel and a pure-numpy twin.

The public names at the bottom of this module point at the numba kernels
unless numba is missing or ``VERTIPORT_DISABLE_JIT`` is set to a truthy
value before import. Both variants are always reachable through
``JIT_IMPL`` / ``PY_IMPL`` so tests and the benchmark can compare them.
"""
from __future__ import annotations

import os

import numpy as np

DISABLE_ENV = "VERTIPORT_DISABLE_JIT"

# nonbasic/basic status codes shared with the simplex driver
BASIC = 0
AT_LOWER = 1
AT_UPPER = 2
FREE = 3
FIXED = 4

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _jit_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() in ("1", "true", "yes", "on")


USE_JIT = HAVE_NUMBA and not _jit_disabled()


def _njit(func):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


# ---------------------------------------------------------------------------
# primal pricing


def _price_primal_loop(d, status, weight, tol, block, nblocks, start, bland):
    n = d.shape[0]
    if bland:
        for j in range(n):
            s = status[j]
            if s == AT_LOWER and d[j] < -tol:
                return j, start
            if s == AT_UPPER and d[j] > tol:
                return j, start
            if s == FREE and abs(d[j]) > tol:
                return j, start
        return -1, start
    for step in range(nblocks):
        blk = (start + step) % nblocks
        lo = blk * block
        hi = min(n, lo + block)
        best = -1
        best_v = 0.0
        for j in range(lo, hi):
            s = status[j]
            v = 0.0
            if s == AT_LOWER:
                if d[j] < -tol:
                    v = -d[j] * weight[j]
            elif s == AT_UPPER:
                if d[j] > tol:
                    v = d[j] * weight[j]
            elif s == FREE:
                if abs(d[j]) > tol:
                    v = abs(d[j]) * weight[j]
            if v > best_v:
                best_v = v
                best = j
        if best >= 0:
            return best, (blk + 1) % nblocks
    return -1, start


def _price_primal_np(d, status, weight, tol, block, nblocks, start, bland):
    viol = np.zeros_like(d)
    lower = (status == AT_LOWER) & (d < -tol)
    upper = (status == AT_UPPER) & (d > tol)
    free = (status == FREE) & (np.abs(d) > tol)
    viol[lower] = -d[lower]
    viol[upper] = d[upper]
    viol[free] = np.abs(d[free])
    if bland:
        hits = np.flatnonzero(viol > 0)
        return (int(hits[0]) if hits.size else -1), start
    viol *= weight
    n = d.shape[0]
    for step in range(nblocks):
        blk = (start + step) % nblocks
        seg = viol[blk * block:min(n, (blk + 1) * block)]
        if seg.size and seg.max() > 0:
            return blk * block + int(np.argmax(seg)), (blk + 1) % nblocks
    return -1, start


# ---------------------------------------------------------------------------
# primal ratio test (bounded variables, composite phase 1, Harris two-pass)
#
# returns (r, theta, to_upper): r >= 0 leaving row, r == -1 entering bound
# flip, r == -2 unbounded ray.


def _ratio_primal_loop(xb, alpha, lob, upb, dirn, flip, ftol, ptol, bland, bidx):
    m = xb.shape[0]
    big = np.inf
    # pass 1: relaxed bound on the step
    tmax = big
    for i in range(m):
        rate = -dirn * alpha[i]
        if abs(alpha[i]) <= ptol:
            continue
        x = xb[i]
        if rate < 0.0:
            if x > upb[i] + ftol * (1.0 + abs(upb[i])):
                tgt = upb[i]
            elif x < lob[i] - ftol * (1.0 + abs(lob[i])) or lob[i] == -big:
                continue
            else:
                tgt = lob[i]
            slack = x - tgt
            tol_i = 0.0 if bland else ftol * (1.0 + abs(tgt))
            t = (max(slack, 0.0) + tol_i) / (-rate)
        else:
            if x < lob[i] - ftol * (1.0 + abs(lob[i])):
                tgt = lob[i]
            elif x > upb[i] + ftol * (1.0 + abs(upb[i])) or upb[i] == big:
                continue
            else:
                tgt = upb[i]
            slack = tgt - x
            tol_i = 0.0 if bland else ftol * (1.0 + abs(tgt))
            t = (max(slack, 0.0) + tol_i) / rate
        if t < tmax:
            tmax = t
    if tmax == big and flip == big:
        return -2, big, False
    if flip <= tmax:
        return -1, flip, False
    # pass 2: largest pivot among steps within the relaxed bound
    best = -1
    best_piv = -1.0
    best_t = big
    best_up = False
    best_idx = -1
    for i in range(m):
        rate = -dirn * alpha[i]
        if abs(alpha[i]) <= ptol:
            continue
        x = xb[i]
        if rate < 0.0:
            if x > upb[i] + ftol * (1.0 + abs(upb[i])):
                tgt = upb[i]
                up = True
            elif x < lob[i] - ftol * (1.0 + abs(lob[i])) or lob[i] == -big:
                continue
            else:
                tgt = lob[i]
                up = False
            t = max(x - tgt, 0.0) / (-rate)
        else:
            if x < lob[i] - ftol * (1.0 + abs(lob[i])):
                tgt = lob[i]
                up = False
            elif x > upb[i] + ftol * (1.0 + abs(upb[i])) or upb[i] == big:
                continue
            else:
                tgt = upb[i]
                up = True
            t = max(tgt - x, 0.0) / rate
        if t > tmax:
            continue
        if bland:
            if t < best_t or (t == best_t and bidx[i] < best_idx):
                best, best_t, best_up, best_idx = i, t, up, bidx[i]
        else:
            piv = abs(alpha[i])
            if piv > best_piv:
                best, best_piv, best_t, best_up = i, piv, t, up
    return best, best_t, best_up


def _ratio_primal_np(xb, alpha, lob, upb, dirn, flip, ftol, ptol, bland, bidx):
    rate = -dirn * alpha
    ok = np.abs(alpha) > ptol
    tol_lo = ftol * (1.0 + np.abs(lob))
    tol_up = ftol * (1.0 + np.abs(upb))
    above = xb > upb + tol_up
    below = xb < lob - tol_lo
    dec = ok & (rate < 0)
    inc = ok & (rate > 0)
    tgt = np.full_like(xb, np.nan)
    up = np.zeros(xb.shape, dtype=bool)
    # decreasing variables
    m1 = dec & above
    tgt[m1] = upb[m1]
    up[m1] = True
    m2 = dec & ~above & ~below & np.isfinite(lob)
    tgt[m2] = lob[m2]
    # increasing variables
    m3 = inc & below
    tgt[m3] = lob[m3]
    m4 = inc & ~below & ~above & np.isfinite(upb)
    tgt[m4] = upb[m4]
    up[m4] = True
    cand = ~np.isnan(tgt)
    if not cand.any():
        if flip == np.inf:
            return -2, np.inf, False
        return -1, flip, False
    idx = np.flatnonzero(cand)
    gap = np.maximum(np.abs(xb[idx] - tgt[idx]), 0.0)
    gap = np.where(((rate[idx] < 0) & (xb[idx] >= tgt[idx])) | ((rate[idx] > 0) & (xb[idx] <= tgt[idx])), gap, 0.0)
    arate = np.abs(rate[idx])
    tol_i = 0.0 if bland else ftol * (1.0 + np.abs(tgt[idx]))
    tmax = float(np.min((gap + tol_i) / arate))
    if flip <= tmax:
        return -1, flip, False
    t = gap / arate
    within = t <= tmax
    if bland:
        cand_t = np.where(within, t, np.inf)
        tmin = cand_t.min()
        ties = np.flatnonzero(cand_t == tmin)
        k = ties[np.argmin(bidx[idx[ties]])]
    else:
        piv = np.where(within, np.abs(alpha[idx]), -1.0)
        k = int(np.argmax(piv))
    i = int(idx[k])
    return i, float(t[k]), bool(up[i])


# ---------------------------------------------------------------------------
# dual simplex: leaving row and ratio test


def _dual_leaving_loop(xb, lob, upb, ftol):
    m = xb.shape[0]
    best = -1
    best_v = 0.0
    for i in range(m):
        v = 0.0
        if xb[i] < lob[i] - ftol * (1.0 + abs(lob[i])):
            v = (lob[i] - xb[i]) / (1.0 + abs(lob[i]))
        elif xb[i] > upb[i] + ftol * (1.0 + abs(upb[i])):
            v = (xb[i] - upb[i]) / (1.0 + abs(upb[i]))
        if v > best_v:
            best_v = v
            best = i
    return best


def _dual_leaving_np(xb, lob, upb, ftol):
    with np.errstate(invalid="ignore"):  # inf/inf on infinite bounds, masked below
        below = np.where(xb < lob - ftol * (1.0 + np.abs(lob)), (lob - xb) / (1.0 + np.abs(lob)), 0.0)
        above = np.where(xb > upb + ftol * (1.0 + np.abs(upb)), (xb - upb) / (1.0 + np.abs(upb)), 0.0)
    viol = np.nan_to_num(np.maximum(below, above), nan=0.0)
    if viol.size == 0 or viol.max() <= 0:
        return -1
    return int(np.argmax(viol))


def _ratio_dual_loop(d, arow, status, sgn, dtol, ptol):
    n = d.shape[0]
    tmax = np.inf
    for j in range(n):
        s = status[j]
        a = sgn * arow[j]
        if s == AT_LOWER and a < -ptol:
            t = (max(d[j], 0.0) + dtol) / (-a)
        elif s == AT_UPPER and a > ptol:
            t = (max(-d[j], 0.0) + dtol) / a
        elif s == FREE and abs(a) > ptol:
            t = (abs(d[j]) + dtol) / abs(a)
        else:
            continue
        if t < tmax:
            tmax = t
    if tmax == np.inf:
        return -1
    best = -1
    best_piv = -1.0
    for j in range(n):
        s = status[j]
        a = sgn * arow[j]
        if s == AT_LOWER and a < -ptol:
            t = max(d[j], 0.0) / (-a)
        elif s == AT_UPPER and a > ptol:
            t = max(-d[j], 0.0) / a
        elif s == FREE and abs(a) > ptol:
            t = abs(d[j]) / abs(a)
        else:
            continue
        if t <= tmax and abs(a) > best_piv:
            best_piv = abs(a)
            best = j
    return best


def _ratio_dual_np(d, arow, status, sgn, dtol, ptol):
    a = sgn * arow
    lower = (status == AT_LOWER) & (a < -ptol)
    upper = (status == AT_UPPER) & (a > ptol)
    free = (status == FREE) & (np.abs(a) > ptol)
    cand = lower | upper | free
    if not cand.any():
        return -1
    idx = np.flatnonzero(cand)
    dd = d[idx]
    num = np.where(lower[idx], np.maximum(dd, 0.0), np.where(upper[idx], np.maximum(-dd, 0.0), np.abs(dd)))
    aa = np.abs(a[idx])
    tmax = np.min((num + dtol) / aa)
    piv = np.where(num / aa <= tmax, aa, -1.0)
    return int(idx[int(np.argmax(piv))])


# ---------------------------------------------------------------------------
# product-form eta file


def _eta_ftran_loop(v, rows, etas, count):
    m = v.shape[0]
    for k in range(count):
        r = rows[k]
        vr = v[r] / etas[k, r]
        if vr != 0.0:
            for i in range(m):
                v[i] -= vr * etas[k, i]
        v[r] = vr
    return v


def _eta_ftran_np(v, rows, etas, count):
    for k in range(count):
        r = rows[k]
        vr = v[r] / etas[k, r]
        if vr != 0.0:
            v -= vr * etas[k]
        v[r] = vr
    return v


def _eta_btran_loop(v, rows, etas, count):
    m = v.shape[0]
    for k in range(count - 1, -1, -1):
        r = rows[k]
        acc = 0.0
        for i in range(m):
            acc += v[i] * etas[k, i]
        acc -= v[r] * etas[k, r]
        v[r] = (v[r] - acc) / etas[k, r]
    return v


def _eta_btran_np(v, rows, etas, count):
    for k in range(count - 1, -1, -1):
        r = rows[k]
        acc = float(v @ etas[k]) - v[r] * etas[k, r]
        v[r] = (v[r] - acc) / etas[k, r]
    return v


# ---------------------------------------------------------------------------
# single-target shortest paths on nonnegative weights (array Dijkstra)
#
# in_ptr/in_link index incoming links per head node; returns the distance
# from every node to `target`.


def _dist_to_loop(n, in_ptr, in_link, tails, w, target):
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    dist[target] = 0.0
    for _ in range(n):
        u = -1
        du = np.inf
        for i in range(n):
            if not done[i] and dist[i] < du:
                du = dist[i]
                u = i
        if u < 0:
            break
        done[u] = True
        for e in range(in_ptr[u], in_ptr[u + 1]):
            k = in_link[e]
            t = tails[k]
            nd = du + w[k]
            if nd < dist[t]:
                dist[t] = nd
    return dist


def _dist_to_np(n, in_ptr, in_link, tails, w, target):
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    dist[target] = 0.0
    for _ in range(n):
        masked = np.where(done, np.inf, dist)
        u = int(np.argmin(masked))
        if not np.isfinite(masked[u]):
            break
        done[u] = True
        ks = in_link[in_ptr[u]:in_ptr[u + 1]]
        if ks.size:
            np.minimum.at(dist, tails[ks], dist[u] + w[ks])
    return dist


# ---------------------------------------------------------------------------
# enumeration of selection matrices in lexicographic vec(B) order
#
# A selection is stored as one digit per vertiport: 0 = not selected,
# t >= 1 = capacity option n_c - t (0-based), so counting upward walks
# vec(B) lexicographically. Returns (digits, truncated).


def _enumerate_loop(n_v, n_c, K, A, b, gamma, tol, cap):
    radix = n_c + 1
    total = 1
    for _ in range(n_v):
        total *= radix
    n_b = b.shape[0]
    out = np.zeros((min(total, cap + 1), n_v), dtype=np.int64)
    found = 0
    digits = np.zeros(n_v, dtype=np.int64)
    lhs = np.zeros(n_b)
    for code in range(total):
        rem = code
        for i in range(n_v - 1, -1, -1):
            digits[i] = rem % radix
            rem //= radix
        cost = 0.0
        for r in range(n_b):
            lhs[r] = 0.0
        for i in range(n_v):
            t = digits[i]
            if t > 0:
                j = n_c - t
                cost += K[i, j]
                col = i * n_c + j
                for r in range(n_b):
                    lhs[r] += A[r, col]
        if cost > gamma + tol * (1.0 + abs(gamma)):
            continue
        ok = True
        for r in range(n_b):
            if lhs[r] > b[r] + tol * (1.0 + abs(b[r])):
                ok = False
                break
        if not ok:
            continue
        if found >= cap:
            return out[:found], True
        out[found, :] = digits
        found += 1
    return out[:found], False


def _enumerate_np(n_v, n_c, K, A, b, gamma, tol, cap):
    radix = n_c + 1
    if n_v == 0:
        digits = np.zeros((1, 0), dtype=np.int64)
    else:
        grids = np.indices((radix,) * n_v).reshape(n_v, -1).T
        digits = grids.astype(np.int64)
    sel = digits > 0
    opt = np.where(sel, n_c - digits, 0)
    rows = np.arange(n_v)
    cost = np.where(sel, K[rows[None, :], opt], 0.0).sum(axis=1)
    keep = cost <= gamma + tol * (1.0 + abs(gamma))
    if b.shape[0]:
        cols = rows * n_c + opt
        lhs = np.zeros((digits.shape[0], b.shape[0]))
        for i in range(n_v):
            contrib = A[:, cols[:, i]].T
            lhs += np.where(sel[:, i:i + 1], contrib, 0.0)
        keep &= np.all(lhs <= b + tol * (1.0 + np.abs(b)), axis=1)
    hits = digits[keep]
    if hits.shape[0] > cap:
        return hits[:cap], True
    return hits, False


# ---------------------------------------------------------------------------

_LOOP_FUNCS = {
    "price_primal": _price_primal_loop,
    "ratio_primal": _ratio_primal_loop,
    "dual_leaving": _dual_leaving_loop,
    "ratio_dual": _ratio_dual_loop,
    "eta_ftran": _eta_ftran_loop,
    "eta_btran": _eta_btran_loop,
    "dist_to": _dist_to_loop,
    "enumerate_selections": _enumerate_loop,
}

PY_IMPL = {
    "price_primal": _price_primal_np,
    "ratio_primal": _ratio_primal_np,
    "dual_leaving": _dual_leaving_np,
    "ratio_dual": _ratio_dual_np,
    "eta_ftran": _eta_ftran_np,
    "eta_btran": _eta_btran_np,
    "dist_to": _dist_to_np,
    "enumerate_selections": _enumerate_np,
}

JIT_IMPL = {name: _njit(f) for name, f in _LOOP_FUNCS.items()} if HAVE_NUMBA else dict(PY_IMPL)

_ACTIVE = JIT_IMPL if USE_JIT else PY_IMPL

price_primal = _ACTIVE["price_primal"]
ratio_primal = _ACTIVE["ratio_primal"]
dual_leaving = _ACTIVE["dual_leaving"]
ratio_dual = _ACTIVE["ratio_dual"]
eta_ftran = _ACTIVE["eta_ftran"]
eta_btran = _ACTIVE["eta_btran"]
dist_to = _ACTIVE["dist_to"]
enumerate_selections = _ACTIVE["enumerate_selections"]


def backend() -> str:
    """Name of the active kernel backend: ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_JIT else "numpy"
