"""Pure numpy fallback with the same contract as the compiled kernels."""

import numpy as np


def psi(y):
    y = np.asarray(y, dtype=np.float64)
    a = np.abs(y)
    return np.sign(y) * np.log1p(a + y * y)


def weighted_influence(x, w, alpha, z):
    return float(np.dot(w, psi(alpha * (np.asarray(x) - z))))


def _compress(xs):
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    counts = np.diff(np.r_[starts, xs.shape[0]]).astype(np.float64)
    return xs[starts], counts


def root_sorted(xs, alpha, tol, max_iter):
    xs = np.asarray(xs, dtype=np.float64)
    v, c = _compress(xs)
    if v.shape[0] == 1:
        return float(v[0]), 0
    lo = float(v[0]) - 1.0
    hi = float(v[-1]) + 1.0
    for it in range(max_iter):
        if hi - lo <= tol:
            return 0.5 * (lo + hi), it
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid, it
        fm = float(np.dot(c, psi(alpha * (v - mid))))
        if fm > 0.0:
            lo = mid
        elif fm < 0.0:
            hi = mid
        else:
            return mid, it
    if hi - lo <= tol:
        return 0.5 * (lo + hi), max_iter
    return 0.5 * (lo + hi), -1


def roots_sorted(xs, alphas, tol, max_iter):
    """Vectorized bisection over rows; rows run until their own bracket closes."""
    xs = np.asarray(xs, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    rows = xs.shape[0]
    roots = np.empty(rows)
    iters = np.zeros(rows, dtype=np.int64)
    if rows == 0:
        return roots, iters
    lo = xs[:, 0] - 1.0
    hi = xs[:, -1] + 1.0
    constant = xs[:, 0] == xs[:, -1]
    roots[constant] = xs[constant, 0]
    active = ~constant
    for it in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        l, h = lo[idx], hi[idx]
        mid = 0.5 * (l + h)
        done = (h - l <= tol)
        stalled = ~done & ((mid <= l) | (mid >= h))
        roots[idx[done]] = mid[done]
        roots[idx[stalled]] = mid[stalled]
        iters[idx[done | stalled]] = it
        active[idx[done | stalled]] = False
        go = ~(done | stalled)
        idx, mid = idx[go], mid[go]
        if idx.size == 0:
            break
        fm = psi(alphas[idx, None] * (xs[idx] - mid[:, None])).sum(axis=1)
        pos, neg = fm > 0.0, fm < 0.0
        lo[idx[pos]] = mid[pos]
        hi[idx[neg]] = mid[neg]
        zero = ~(pos | neg)
        roots[idx[zero]] = mid[zero]
        iters[idx[zero]] = it
        active[idx[zero]] = False
    rest = np.flatnonzero(active)
    if rest.size:
        width = hi[rest] - lo[rest]
        roots[rest] = 0.5 * (lo[rest] + hi[rest])
        iters[rest] = np.where(width <= tol, max_iter, -1)
    return roots, iters
