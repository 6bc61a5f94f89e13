"""Kernel dispatch.

The compiled extension is used when it imports; otherwise the numpy
versions are used.  Setting ``MOMENTCTL_PURE=1`` forces the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MOMENTCTL_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _f(x):
    return np.ascontiguousarray(x, dtype=np.float64).reshape(-1)


def _i(x):
    return np.ascontiguousarray(x, dtype=np.int64).reshape(-1)


def exp_time_gram(lam_r, lam_c, T, t0=0.0):
    """Matrix of int_{t0}^T exp(-(l_i + l_j) t) dt."""
    return _impl.exp_time_gram(_f(lam_r), _f(lam_c), float(T), float(t0))


def sine_overlap_matrix(mr, mc, a, b):
    """Matrix of int_a^b sin(m_i x) sin(m_j x) dx."""
    return _impl.sine_overlap_matrix(_i(mr), _i(mc), float(a), float(b))


def weighted_time_integrals(s, ab, bexp, nodes, weights):
    """sum_q w_q exp(-ab / t_q**bexp - s t_q) for each s."""
    return _impl.weighted_time_integrals(_f(s), float(ab), float(bexp), _f(nodes), _f(weights))


def window_max_count(v, rho):
    """Largest number of sorted values in a half-open window of width rho."""
    return _impl.window_max_count(_f(v), float(rho))


def h5_pair_sup(v, theta, band):
    """max over i <= j <= i + band of (j - i + 1) / (1 + (v_j - v_i)**theta)."""
    return _impl.h5_pair_sup(_f(v), float(theta), int(band))


__all__ = ["BACKEND", "exp_time_gram", "sine_overlap_matrix",
           "weighted_time_integrals", "window_max_count", "h5_pair_sup"]
