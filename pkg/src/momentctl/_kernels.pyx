# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see ``_kernels_py`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, sin, pow, fabs

cnp.import_array()


def exp_time_gram(double[::1] lam_r, double[::1] lam_c, double T, double t0=0.0):
    cdef Py_ssize_t n = lam_r.shape[0], m = lam_c.shape[0], i, j
    cdef double s, h = T - t0
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            s = lam_r[i] + lam_c[j]
            if s == 0.0:
                o[i, j] = h
            else:
                o[i, j] = exp(-s * t0) * (-expm1(-s * h)) / s
    return out


cdef inline double _sin_edge(double k, double x):
    # sin(k*x) with exact zeros at the interval ends 0 and pi
    if x == 0.0:
        return 0.0
    if x == 3.141592653589793 and k == <long>k:
        return 0.0
    return sin(k * x)


def sine_overlap_matrix(long[::1] mr, long[::1] mc, double a, double b):
    cdef Py_ssize_t n = mr.shape[0], p = mc.shape[0], i, j
    cdef double d, s
    out = np.empty((n, p), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(p):
            if mr[i] == mc[j]:
                s = 2.0 * mr[i]
                o[i, j] = 0.5 * (b - a) - (_sin_edge(s, b) - _sin_edge(s, a)) / (2.0 * s)
            else:
                d = mr[i] - mc[j]
                s = mr[i] + mc[j]
                o[i, j] = ((_sin_edge(d, b) - _sin_edge(d, a)) / (2.0 * d)
                           - (_sin_edge(s, b) - _sin_edge(s, a)) / (2.0 * s))
    return out


def weighted_time_integrals(double[::1] s, double ab, double bexp,
                            double[::1] nodes, double[::1] weights):
    cdef Py_ssize_t n = s.shape[0], q = nodes.shape[0], i, l
    cdef double acc, t, w
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    logw = np.empty(q, dtype=np.float64)
    cdef double[::1] lw = logw
    for l in range(q):
        lw[l] = -ab / pow(nodes[l], bexp)
    for i in range(n):
        acc = 0.0
        for l in range(q):
            w = lw[l] - s[i] * nodes[l]
            if w > -745.0:
                acc += weights[l] * exp(w)
        o[i] = acc
    return out


def window_max_count(double[::1] v, double rho):
    cdef Py_ssize_t n = v.shape[0], i, j = 0, best = 0, at = 0
    for i in range(n):
        if j < i:
            j = i
        while j < n and v[j] < v[i] + rho:
            j += 1
        if j - i > best:
            best = j - i
            at = i
    return best, at


def h5_pair_sup(double[::1] v, double theta, Py_ssize_t band):
    cdef Py_ssize_t n = v.shape[0], i, j, hi, bi = 0, bj = 0
    cdef double r, best = 0.0
    for i in range(n):
        hi = i + band
        if hi > n - 1:
            hi = n - 1
        for j in range(i, hi + 1):
            r = (j - i + 1) / (1.0 + pow(v[j] - v[i], theta))
            if r > best:
                best = r
                bi = i
                bj = j
    return best, bi, bj
