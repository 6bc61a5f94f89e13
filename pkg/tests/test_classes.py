import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentctl.classes import (SpectralSequence, counting_function, group_spectrum,
                               merge_sequences, tensor_params, tensorize, verify_class)
from momentctl.errors import (ContractError, DegeneracyError, DistinctnessError,
                              GroupingError)
from momentctl.spectral1d import transverse_box_spectrum


def test_squares_are_in_class_p1():
    k = np.arange(1, 200, dtype=float)
    rep = verify_class(k * k, 1, 3.0, 0.5)
    assert rep.h3_ok and rep.h3_max_count == 1


def test_window_condition_failure_is_reported():
    rep = verify_class([1.0, 1.5, 2.0, 10.0], 2, 3.0, 0.5)
    assert not rep.h3_ok
    assert rep.h3_max_count == 3
    assert rep.h3_window[0] == 1.0


def test_weak_gap_kappa_bound():
    k = np.arange(1, 100, dtype=float)
    fitted = verify_class(k * k, 1, 3.0, 0.5).kappa_fitted
    assert verify_class(k * k, 1, 3.0, 0.5, kappa=fitted).h5_ok
    assert not verify_class(k * k, 1, 3.0, 0.5, kappa=0.5 * fitted).h5_ok


def test_counting_function():
    assert counting_function([1, 4, 9], 4) == 2
    assert counting_function([1, 4, 9], 0.5) == 0


@given(st.lists(st.floats(0.1, 500.0), min_size=1, max_size=60, unique=True),
       st.integers(1, 3), st.floats(0.5, 5.0))
@settings(max_examples=150, deadline=None)
def test_grouping_invariants(vals, p, rho):
    v = np.sort(np.array(vals))
    if np.any(np.diff(v) <= 1e-9):
        return
    try:
        g = group_spectrum(v, p, rho)
    except GroupingError:
        # p + 1 values chained by gaps <= rho/(2p) fit in a window of width rho/2
        assert verify_class(v, p, rho, 0.5).h3_max_count > p
        return
    c = rho / (2 * p)
    assert g.gap_constant == pytest.approx(c)
    assert np.array_equal(g.values, v)
    for grp in g.groups:
        assert grp.g <= p and grp.diameter <= rho
    assert np.all(g.gaps() > c)


def test_grouping_pairs_coupled_values():
    nu1 = np.arange(1, 11, dtype=float) ** 2 + 1.0
    nu2 = nu1 + 0.01
    merged = merge_sequences(nu1, nu2)
    g = group_spectrum(merged, 2, 3.0)
    assert len(g) == 10
    assert all(grp.g == 2 for grp in g.groups)
    assert [l[0] for l in g.groups[0].labels] == [1, 2]


def test_merge_rejects_coincident_values():
    with pytest.raises(DistinctnessError):
        merge_sequences([1.0, 4.0], [4.0, 9.0])


def test_repeated_values_rejected():
    with pytest.raises(DegeneracyError):
        group_spectrum([1.0, 1.0, 4.0], 2, 3.0)


def test_sequence_validation():
    with pytest.raises(ContractError):
        SpectralSequence([2.0, 1.0])
    with pytest.raises(ContractError):
        SpectralSequence([0.0, 1.0])


def test_tensor_params():
    b, thp = tensor_params(0.5, 0.5)
    assert b == pytest.approx(1.0) and thp == pytest.approx(1.0)
    with pytest.raises(ContractError):
        tensor_params(1.0, 0.5)


def test_tensorize_identity_and_truncation():
    k = np.arange(1, 8, dtype=float)
    g = group_spectrum(SpectralSequence(k * k, theta=0.5), 1, 3.0)
    tr = transverse_box_spectrum(1, 20)
    ms = tensorize(tr, g, 3)
    # sqrt(mu) <= 3 gives m = 1..3, and k <= 3
    assert len(ms) == 9
    for md in ms:
        assert md.lam == md.mu + md.lam1d
        assert md.mu ** 0.5 <= 3 and md.k <= 3
