"""The compiled kernels and the numpy fallback must agree."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentctl import _kernels_py as py
from momentctl import kernels

compiled = pytest.importorskip("momentctl._kernels")

lams = st.lists(st.floats(0.1, 500.0), min_size=1, max_size=12)


@given(lams, lams, st.floats(0.01, 3.0), st.floats(0.0, 0.5))
@settings(max_examples=60, deadline=None)
def test_exp_time_gram_parity(a, b, T, t0):
    t0 = min(t0, 0.9 * T)
    x, y = np.array(a), np.array(b)
    assert np.allclose(compiled.exp_time_gram(x, y, T, t0), py.exp_time_gram(x, y, T, t0),
                       rtol=1e-13, atol=0)


@given(st.lists(st.integers(1, 60), min_size=1, max_size=10), st.floats(0.0, 1.5),
       st.floats(1.6, 3.1))
@settings(max_examples=60, deadline=None)
def test_sine_overlap_parity(m, a, b):
    m = np.array(m, dtype=np.int64)
    assert np.allclose(compiled.sine_overlap_matrix(m, m, a, b), py.sine_overlap_matrix(m, m, a, b),
                       atol=1e-14)


def test_weighted_integrals_parity():
    s = np.linspace(0.0, 300.0, 40)
    t = np.linspace(1e-3, 1.0, 500)
    w = np.full_like(t, t[1] - t[0])
    assert np.allclose(compiled.weighted_time_integrals(s, 1.5, 1.0, t, w),
                       py.weighted_time_integrals(s, 1.5, 1.0, t, w), rtol=1e-13, atol=0)


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=80), st.floats(0.1, 10.0))
@settings(max_examples=60, deadline=None)
def test_count_kernels_parity(v, rho):
    v = np.sort(np.array(v))
    assert tuple(compiled.window_max_count(v, rho)) == tuple(py.window_max_count(v, rho))
    assert tuple(compiled.h5_pair_sup(v, 0.5, v.size)) == pytest.approx(
        tuple(py.h5_pair_sup(v, 0.5, v.size)))


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
