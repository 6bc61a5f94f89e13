"""Pure numpy versions of the compiled kernels (reference and fallback)."""

import numpy as np


def exp_time_gram(lam_r, lam_c, T, t0=0.0):
    s = np.add.outer(np.asarray(lam_r, float), np.asarray(lam_c, float))
    h = T - t0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(-s * t0) * (-np.expm1(-s * h)) / s
    return np.where(s == 0.0, h, out)


def _sin_edge(k, x):
    if x == 0.0:
        return np.zeros_like(k, dtype=float)
    out = np.sin(k * x)
    if x == np.pi:
        out = np.where(k == np.round(k), 0.0, out)
    return out


def sine_overlap_matrix(mr, mc, a, b):
    mr = np.asarray(mr, dtype=np.int64)[:, None]
    mc = np.asarray(mc, dtype=np.int64)[None, :]
    d = (mr - mc).astype(float)
    s = (mr + mc).astype(float)
    same = d == 0
    dd = np.where(same, 1.0, d)
    off = (_sin_edge(dd, b) - _sin_edge(dd, a)) / (2 * dd) - (_sin_edge(s, b) - _sin_edge(s, a)) / (2 * s)
    diag = 0.5 * (b - a) - (_sin_edge(s, b) - _sin_edge(s, a)) / (2 * s)
    return np.where(same, diag, off)


def weighted_time_integrals(s, ab, bexp, nodes, weights):
    s = np.asarray(s, float)
    lw = -ab / nodes ** bexp
    expo = lw[None, :] - np.outer(s, nodes)
    with np.errstate(under="ignore"):
        vals = np.where(expo > -745.0, np.exp(np.maximum(expo, -745.0)), 0.0)
    return vals @ weights


def window_max_count(v, rho):
    v = np.asarray(v, float)
    if v.size == 0:
        return 0, 0
    j = np.searchsorted(v, v + rho, side="left")
    cnt = j - np.arange(v.size)
    at = int(np.argmax(cnt))
    return int(cnt[at]), at


def h5_pair_sup(v, theta, band):
    v = np.asarray(v, float)
    n = v.size
    best, bi, bj = 0.0, 0, 0
    for i in range(n):
        hi = min(n - 1, i + band)
        d = v[i:hi + 1] - v[i]
        r = np.arange(1, hi - i + 2) / (1.0 + d ** theta)
        at = int(np.argmax(r))
        if r[at] > best:
            best, bi, bj = float(r[at]), i, i + at
    return best, bi, bj
