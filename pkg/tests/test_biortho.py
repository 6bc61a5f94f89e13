import math

import numpy as np
import pytest

from momentctl.biortho import (PrimalFamily, WeightSpec, biortho_time_family,
                               block_moment_solve, check_tPN, choose_epsilon,
                               epsilon_scaling, estimate_spectral_constant, family_gram,
                               fit_envelope, graded_time_rule, restrict_biortho,
                               restriction_sandwich, tensor_biortho_full, tpn_sharp_constant,
                               weighted_norm, weighted_time_matrix)
from momentctl.errors import ConditioningError, ContractError
from momentctl.systems import boundary_system, dolecki_system, heat_system

import oracles

# [DERIVED] sharp constants sup ||u||^2 / ||u||^2_(0, pi/2) over sine packets k <= N,
# from oracles.spectral_constant_mp (mp Gauss quadrature mass matrix, 50 digits).
HALF_CONSTANTS = [2.0, 13.229819972341522, 197.885360013178, 4085.894308897694,
                  96307.44012480632, 2443328.4851256474, 65051212.93916352,
                  1792488576.2187333, 50683026813.328644, 1462175527117.0876,
                  42868201237382.47, 1273528515600360.2]


@pytest.fixture(scope="module")
def dolecki3():
    return dolecki_system(1.0, 3)


def test_time_family_matches_least_norm_oracle(dolecki3):
    fam = biortho_time_family(1, dolecki3.grouped, 1.0, K_max=3, transverse=dolecki3.transverse)
    lam = np.array([md.lam for md in fam.modes])
    obs = [md.obs.value for md in fam.modes]
    assert np.allclose(fam.norms2, oracles.time_least_norm(lam, obs, 1.0), rtol=1e-8)
    assert fam.residual <= 1e-8
    assert fam.diagnostics["lower_bound_min"] >= 1.0 - 1e-9
    assert np.all(fam.diagnostics["envelope_slack"] >= -1e-9)


def test_restricted_family_biorthogonal_by_quadrature(dolecki3):
    modes = dolecki3.modes(3)
    fam = restrict_biortho(PrimalFamily(modes, 1.0, dolecki3.omega), "extended")
    B = oracles.biorthogonality_quadrature(fam, 1.0, fam.box)
    assert np.max(np.abs(B - np.eye(len(modes)))) <= 1e-8
    assert fam.region == "omega"
    # pairing in closed form agrees with the quadrature
    assert np.max(np.abs(fam.pairing() - B)) <= 1e-8


def test_restricted_norms_dominate_full_cylinder_norms(dolecki3):
    modes = dolecki3.modes(2)
    omega = restrict_biortho(PrimalFamily(modes, 1.0, dolecki3.omega), "extended")
    full = restrict_biortho(PrimalFamily(modes, 1.0, ((0.0, math.pi),)), "extended")
    assert np.all(omega.norms2 >= full.norms2 * (1 - 1e-12))


def test_double_precision_guard_or_residual_error():
    sys_ = boundary_system("cos2", 4)
    with pytest.raises(ConditioningError):
        restrict_biortho(PrimalFamily(sys_.modes(4), 1.0, sys_.omega))


def test_primal_family_validates_box(dolecki3):
    with pytest.raises(ContractError):
        PrimalFamily(dolecki3.modes(2), 1.0, ((1.0, 0.5),))
    with pytest.raises(ContractError):
        PrimalFamily(dolecki3.modes(2), -1.0, dolecki3.omega)


def test_full_cylinder_family_support_and_scaling(dolecki3):
    modes = dolecki3.modes(2)
    fam = tensor_biortho_full(modes, 1.0, 0.1, "extended")
    assert fam.support == (0.1, 1.0)
    assert fam.residual <= 1e-8
    q = fam.evaluate(0, np.array([0.05, 0.5]), np.array([[1.0]]))
    assert q[0, 0] == 0.0 and q[1, 0] != 0.0
    sc = epsilon_scaling(modes, 1.0, [0.05, 0.1, 0.15, 0.2], "extended")
    # log ||q^eps||^2 grows like 2 lam eps (plus the milder shrinking-interval effect)
    assert np.allclose(sc["slopes"], sc["two_lambda"], rtol=0.2)
    with pytest.raises(ContractError):
        tensor_biortho_full(modes, 1.0, 0.3)


def test_choose_epsilon():
    assert choose_epsilon(1.0, 1.0, 1.0) == 1.0 / 8.0
    assert choose_epsilon(400.0, 1.0, 1.0) == pytest.approx(0.05)


def test_block_moment_problem(dolecki3):
    f = lambda md: 1.0 / md.lam
    res = block_moment_solve(1, dolecki3.grouped, f, 0.1, 1.0, transverse=dolecki3.transverse,
                             K_max=3, precision="extended")
    want = np.diag([1.0 / md.lam for md in res.modes])
    assert np.max(np.abs(res.moments() - want)) <= 1e-10
    assert np.all(res.evaluate(0, [0.0, 0.05]) == 0.0)
    # independent check of one moment by quadrature
    t, w = oracles.gauss(0.0, 1.0, 40, 10)
    lam = res.modes[1].lam
    m = float(np.sum(w * res.evaluate(1, t) * np.exp(-lam * t)))
    assert m == pytest.approx(1.0 / lam, rel=1e-8)
    assert np.all(res.envelope_K > 0)
    with pytest.raises(ContractError):
        block_moment_solve(1, dolecki3.grouped, f, 0.3, 1.0, transverse=dolecki3.transverse)


def test_fit_envelope_is_tight():
    lr = np.array([1.0, 3.0, 2.0])
    A = np.array([1.0, 2.0, 3.0])
    C, slack = fit_envelope(lr, A)
    assert np.all(slack >= -1e-10)
    assert np.min(slack) == pytest.approx(0.0, abs=1e-9)
    C0, s0 = fit_envelope(lr, A, prefactor=False)
    assert C0 == pytest.approx(1.5)


def test_spectral_constant_full_box_exact():
    rep = estimate_spectral_constant(((0.0, math.pi),), range(1, 8))
    assert rep.beta_hat == 0.0 and all(c == 1.0 for c in rep.constants)


def test_spectral_constant_half_interval_matches_frozen_oracle():
    rep = estimate_spectral_constant(((0.0, math.pi / 2),), range(1, 13), precision="extended")
    assert np.allclose(rep.constants, HALF_CONSTANTS, rtol=1e-9)
    assert rep.r2 >= 0.95


def test_spectral_constant_live_oracle_small_N():
    rep = estimate_spectral_constant(((0.3, 1.1),), range(1, 5))
    for N, c in zip(rep.N, rep.constants):
        assert c == pytest.approx(oracles.spectral_constant_mp(0.3, 1.1, N), rel=1e-8)


def test_graded_rule_integrates_weight():
    t, w = graded_time_rule(0.1, ab=1.88, b=1.0)
    # int_0^T exp(-a/t) dt = T e^{-a/T} - a E1(a/T)
    from scipy.special import exp1
    a, T = 1.88, 0.1
    ref = T * math.exp(-a / T) - a * exp1(a / T)
    assert float(np.sum(w * np.exp(-a / t))) == pytest.approx(ref, rel=1e-12)


def test_weighted_time_matrix_extended_agrees():
    lam = np.array([2.0, 5.0, 17.0])
    W = weighted_time_matrix(lam, lam, 0.5, 1.3, 1.0)
    Wmp = np.vectorize(float)(weighted_time_matrix(lam, lam, 0.5, 1.3, 1.0, precision="extended"))
    assert np.allclose(W, Wmp, rtol=1e-12)


def test_tpn_random_ratios_bounded_by_sharp_constant():
    sys_ = boundary_system("cos2", 2)
    modes = sys_.modes(2)
    w = WeightSpec(0.5, 4.7, modes.b, sys_.omega)
    rng = np.random.default_rng(3)
    res = check_tPN(rng.standard_normal((50, len(modes))), modes, w, 0.2)
    sharp = tpn_sharp_constant(modes, w, 0.2)
    assert res.max_ratio <= sharp * (1 + 1e-6)


def test_weighted_norm_callable_matches_coefficients():
    sys_ = heat_system(2, ((0.3, 1.1),))
    modes = sys_.modes(2)
    w = WeightSpec(0.5, 2.0, modes.b, sys_.omega)
    a = np.array([0.7, -1.2])[: len(modes)]

    def field(t, x):
        return sum(c * np.exp(-md.lam * t) * math.sqrt(2 / math.pi) * np.sin(md.multi[0] * x)
                   for c, md in zip(a, modes))

    by_coeff = float(weighted_norm(a, w, 0.3, modes=modes)[0])
    assert weighted_norm(field, w, 0.3) == pytest.approx(by_coeff, rel=1e-9)
    weighted, restricted = restriction_sandwich(a, modes, w, 0.3)
    assert restricted[0] <= weighted[0]


def test_family_gram_symmetric_positive(dolecki3):
    modes = dolecki3.modes(2)
    G = family_gram(modes, modes, 1.0, dolecki3.omega)
    assert np.allclose(G, G.T, atol=0)
    assert np.min(np.linalg.eigvalsh(G)) > 0
