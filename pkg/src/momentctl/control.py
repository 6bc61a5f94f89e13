"""Minimal-time surrogates, control synthesis and the heat control-cost sweep."""

import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from scipy.linalg import eigh_tridiagonal

from .biortho import (PrimalFamily, _modes, estimate_spectral_constant, family_gram,
                      restrict_biortho)
from .errors import (ApproximateControllabilityError, ConditioningError, ContractError,
                     DependencyError, DistinctnessError, DomainError, NumericError)
from .observation import corrected_trapezoid, window_nodes
from .precision import DEFAULT_DPS, DEFAULT_GUARD, to_float
from .spectral1d import (DEFAULT_GRID_SIZE, DEFAULT_WINDOW_POINTS, dirichlet_laplacian_mode,
                         make_potential, sturm_liouville_eigs)

__all__ = ["MinimalTimeEstimate", "dolecki_T0", "coupled_T0_boundary", "coupled_T0_internal",
           "ControlField", "synthesize_control", "CostSweep", "heat_lr_cost_sweep",
           "epsilon0", "alpha0", "cost_B", "coefficient_vector"]

DISTINCT_TOL = 1e-10
ZERO_SINE_TOL = 1e-14
MOMENT_TOL = 1e-6


# --------------------------------------------------------------------------
# minimal-time surrogates

@dataclass
class MinimalTimeEstimate:
    """Ratios ``-log(quantity_k) / nu_k`` and their tail maxima.

    ``tail_max[i] = max(ratios[i:])`` is the surrogate of the limsup for
    ``k_min = k[i]``; it is nonincreasing in ``k_min``.
    """

    kind: str
    k: np.ndarray
    numerators: np.ndarray
    denominators: np.ndarray
    ratios: np.ndarray
    K: int
    meta: dict = field(default_factory=dict)

    @property
    def tail_max(self):
        return np.maximum.accumulate(self.ratios[::-1])[::-1]

    @property
    def surrogate(self):
        """Maximum over the last decade ``k >= K / 10``."""
        return self.last_decade_max

    @property
    def last_decade_max(self):
        return float(np.max(self.ratios[self.k >= self.K / 10.0]))

    def trend(self, tol=1e-2):
        """``"->0"``, ``"bounded"`` or ``"growing"`` from the tail maxima."""
        tm = self.tail_max
        n = len(tm)
        late = self.last_decade_max
        if late <= tol:
            return "->0"
        half = float(np.max(self.ratios[n // 2:]))
        first = float(np.max(self.ratios[: max(1, n // 2)]))
        return "growing" if half > 1.5 * first and half > tol else "bounded"

    def rows(self):
        return list(zip(self.k.tolist(), self.numerators.tolist(),
                        self.denominators.tolist(), self.ratios.tolist(),
                        self.tail_max.tolist()))

    def to_dict(self):
        return {"kind": self.kind, "K": self.K, "last_decade_max": self.last_decade_max,
                "tail_max_k1": float(self.tail_max[0]), "trend": self.trend(), **self.meta}


def dolecki_T0(x0, K):
    """``-ln|sin(k x0)| / k^2`` for ``k <= K``."""
    x0 = float(x0)
    K = int(K)
    if not (0 < x0 < math.pi):
        raise DomainError("x0 must lie in (0, pi)")
    if K < 10:
        raise ContractError("K must be >= 10")
    k = np.arange(1, K + 1)
    s = np.abs(np.sin(k * x0))
    bad = np.nonzero(s < ZERO_SINE_TOL)[0]
    if bad.size:
        raise ApproximateControllabilityError(
            f"sin({int(k[bad[0]])} x0) vanishes: x0/pi is rational and approximate "
            "controllability fails")
    num = -np.log(s)
    den = (k * k).astype(float)
    return MinimalTimeEstimate("dolecki", k, num, den, num / den, K, {"x0": x0})


def _fd_eigs(q, K, n):
    h = np.pi / n
    x = np.linspace(0.0, np.pi, n + 1)[1:-1]
    d = 2.0 / h ** 2 + q.at(x)
    e = np.full(n - 2, -1.0 / h ** 2)
    return eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, K - 1))


def _gap_grid(K, grid_size):
    return max(int(grid_size), 8 * int(K))


def _spectral_gaps(q, K, grid_size):
    """``nu_k^(2) - nu_k^(1)`` from same-grid differences (extrapolated).

    Discretizing both operators on the same grid cancels the leading
    ``k^4 h^2`` error that dominates each eigenvalue separately.
    """
    c = None if not np.all(q.samples == q.samples[0]) else float(q.samples[0])
    k = np.arange(1, K + 1, dtype=float)
    if c is not None:
        return np.full(K, c), k * k
    zero = make_potential("zero", grid_size)
    n = _gap_grid(K, grid_size)
    g1 = _fd_eigs(q, K, n) - _fd_eigs(zero, K, n)
    g2 = _fd_eigs(q, K, 2 * n) - _fd_eigs(zero, K, 2 * n)
    return (4.0 * g2 - g1) / 3.0, k * k


def _shift_for(q, K, grid_size):
    nu1 = sturm_liouville_eigs(q, 1, max(grid_size, 64))[0]
    return nu1.shift


def coupled_T0_boundary(q, K, grid_size=DEFAULT_GRID_SIZE):
    """``-log|nu_k^(2) - nu_k^(1)| / nu_k^(1)`` for ``k <= K``."""
    q = make_potential(q, grid_size)
    K = int(K)
    if K < 1:
        raise ContractError("K must be >= 1")
    gaps, nu1 = _spectral_gaps(q, K, grid_size)
    shift = _shift_for(q, K, grid_size)
    _check_distinct(gaps)
    num = -np.log(np.abs(gaps))
    den = nu1 + shift
    return MinimalTimeEstimate("boundary", np.arange(1, K + 1), num, den, num / den, K,
                               {"potential": q.name, "qbar": q.mean, "shift": shift})


def _check_distinct(gaps):
    bad = np.nonzero(np.abs(gaps) <= DISTINCT_TOL)[0]
    if bad.size:
        k = int(bad[0]) + 1
        raise DistinctnessError(f"nu_{k}^(1) and nu_{k}^(2) coincide (gap {gaps[bad[0]]:.3g}); "
                                "approximate controllability fails")


def coupled_T0_internal(q, a, b, K, grid_size=DEFAULT_GRID_SIZE,
                        window_points=DEFAULT_WINDOW_POINTS):
    """``-log sqrt(det G_k + Delta_k^2) / nu_k^(1)`` with ``G_k`` the L2(a, b) Gram."""
    q = make_potential(q, grid_size)
    K = int(K)
    if K < 1:
        raise ContractError("K must be >= 1")
    x = window_nodes(a, b, window_points)
    norm = ("internal", a, b)
    gaps, nu1 = _spectral_gaps(q, K, grid_size)
    const = np.all(q.samples == q.samples[0])
    if const:
        det = np.zeros(K)
    else:
        n = _gap_grid(K, grid_size)
        e2 = sturm_liouville_eigs(q, K, n, norm)
        det = np.empty(K)
        for i in range(K):
            e1 = dirichlet_laplacian_mode(i + 1, norm, n)
            ip = corrected_trapezoid(e1.evaluate(x) * e2[i].evaluate(x), x)
            det[i] = min(1.0, max(0.0, 1.0 - ip * ip))
    shift = _shift_for(q, K, grid_size)
    quantity = det + gaps ** 2
    bad = np.nonzero(quantity <= DISTINCT_TOL ** 2)[0]
    if bad.size:
        k = int(bad[0]) + 1
        raise DistinctnessError(f"det G_{k} + Delta_{k}^2 vanishes; approximate "
                                "controllability fails")
    num = -0.5 * np.log(quantity)
    den = nu1 + shift
    return MinimalTimeEstimate("internal", np.arange(1, K + 1), num, den, num / den, K,
                               {"potential": q.name, "window": [float(a), float(b)],
                                "shift": shift, "det_G": det.tolist()})


# --------------------------------------------------------------------------
# control synthesis

def coefficient_vector(y0, modes):
    """Align initial-data coefficients with ``modes``.

    ``y0`` may be an array in mode order, a dict ``(m, k, j) -> value`` (missing
    keys are zero) or a callable ``f(mode)``.
    """
    modes = _modes(modes)
    if y0 is None:
        return np.zeros(len(modes))
    if callable(y0):
        return np.array([float(y0(md)) for md in modes])
    if isinstance(y0, dict):
        return np.array([float(y0.get(md.key, 0.0)) for md in modes])
    v = np.asarray(y0, dtype=float).reshape(-1)
    if v.size != len(modes):
        raise ContractError(f"expected {len(modes)} coefficients, got {v.size}")
    return v


@dataclass
class ControlField:
    """``v = sum_i coeffs[i] Q_i`` on ``(0, T) x omega``; the applied control is ``u(t) = v(T - t)``.

    Attributes
    ----------
    coeffs : ndarray
        Multipliers of the dual elements, ``-(1/b_j) <y0, Phi> e^{-lam T}``.
    primal : ndarray
        Expansion of ``v`` in the primal modes (``family.coeffs.T @ coeffs``).
    """

    system: object
    family: object
    coeffs: np.ndarray
    primal: np.ndarray
    y0: np.ndarray
    T: float
    N: float
    norm2: float
    moment_residual: float
    primal_mp: np.ndarray | None = field(default=None, repr=False)

    @property
    def modes(self):
        return self.family.modes

    @property
    def omega(self):
        return self.family.box

    @property
    def support(self):
        return self.family.support

    @property
    def precision(self):
        return self.family.precision

    def coefficient_map(self):
        return {md.key: float(c) for md, c in zip(self.modes, self.coeffs)}

    def forcing(self, modes, precision=None):
        """``<v, F_b>`` over ``support x omega`` for arbitrary modes (closed form)."""
        modes = _modes(modes)
        precision = precision or ("extended" if self.primal_mp is not None else "double")
        t0 = self.support[0]
        if precision == "extended" and self.primal_mp is not None:
            dps = self.family.dps or DEFAULT_DPS
            G = family_gram(self.modes, modes, self.T, self.omega, t0, "extended", dps)
            with mp.workdps(dps):
                return to_float(np.dot(self.primal_mp, G))
        G = family_gram(self.modes, modes, self.T, self.omega, t0)
        return self.primal @ G

    def transverse_factors(self, t, dps=None):
        """Time profiles ``h_m(t)`` with ``v(t, x') = sum_m psi_m(x') h_m(t)``.

        Returns a dict ``multi -> array`` of shape ``(len(t),)`` for scalar
        observations or ``(len(t), p)`` for windowed ones.  The sums over
        modes sharing ``m`` cancel heavily, so they are formed with the
        extended coefficients when available.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        by_m = {}
        for l, md in enumerate(self.modes):
            by_m.setdefault(md.multi, []).append(l)
        scalar = self.modes[0].obs.kind == "scalar"
        lam = np.array([md.lam for md in self.modes])
        out = {}
        if self.primal_mp is None:
            g = np.exp(-np.outer(t, lam)) * self.primal[None, :]
            for multi, idx in by_m.items():
                if scalar:
                    out[multi] = g[:, idx] @ np.array([self.modes[l].obs.value for l in idx])
                else:
                    out[multi] = g[:, idx] @ np.vstack([self.modes[l].obs.values for l in idx])
            return out
        dps = dps or self.family.dps or DEFAULT_DPS
        with mp.workdps(dps):
            tm = [mp.mpf(float(x)) for x in t]
            for multi, idx in by_m.items():
                if scalar:
                    coef = [(mp.mpf(float(lam[l])), self.primal_mp[l] * mp.mpf(self.modes[l].obs.value))
                            for l in idx]
                    out[multi] = np.array([float(mp.fsum(c * mp.exp(-lv * x) for lv, c in coef))
                                           for x in tm])
                else:
                    V = np.vstack([self.modes[l].obs.values for l in idx])
                    G = np.array([[float(self.primal_mp[l] * mp.exp(-mp.mpf(float(lam[l])) * x))
                                   for l in idx] for x in tm])
                    out[multi] = G @ V
        return out

    def evaluate(self, t, xprime, applied=False):
        """``v(t, x')`` (or ``u(t, x') = v(T - t, x')`` when ``applied``).

        Shape ``(len(t), n)`` for scalar observations, ``(len(t), n, p)`` for
        windowed ones.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tt = self.T - t if applied else t
        X = np.atleast_2d(np.asarray(xprime, dtype=float))
        inside_t = (tt >= self.support[0]) & (tt <= self.support[1])
        inside_x = np.ones(X.shape[0], dtype=bool)
        for ax, (a, b) in enumerate(self.omega):
            inside_x &= (X[:, ax] >= a) & (X[:, ax] <= b)
        out = None
        for multi, h in self.transverse_factors(tt).items():
            psi = np.ones(X.shape[0])
            for ax, n in enumerate(multi):
                psi *= math.sqrt(2.0 / math.pi) * np.sin(n * X[:, ax])
            term = np.outer(h, psi) if h.ndim == 1 else np.einsum("tp,x->txp", h, psi)
            out = term if out is None else out + term
        mask = inside_t[:, None] & inside_x[None, :]
        return out * (mask if out.ndim == 2 else mask[..., None])

    def to_dict(self):
        return {"system": self.system.to_dict(), "T": self.T, "N": self.N,
                "precision": self.precision, "norm2": self.norm2,
                "moment_residual": self.moment_residual,
                "support": list(self.support),
                "coefficients": [{"m": md.m, "k": md.k, "j": md.j, "lambda": md.lam,
                                  "y0": float(y), "dual_coeff": float(c),
                                  "primal_coeff": float(p)}
                                 for md, y, c, p in zip(self.modes, self.y0, self.coeffs,
                                                        self.primal)]}


def synthesize_control(system, y0, T, N, family=None, precision="double",
                       guard=DEFAULT_GUARD, dps=DEFAULT_DPS, moment_tol=MOMENT_TOL):
    """Moment-method control ``v = sum -(1/b_j) <y0, Phi> e^{-lam T} Q``.

    Raises
    ------
    ApproximateControllabilityError
        A control factor ``b_j`` vanishes.
    DependencyError
        ``family`` does not match the retained modes.
    NumericError
        Moment residual above ``moment_tol``.
    """
    if not T > 0:
        raise ContractError("T must be positive")
    system.check_factors()
    modes = system.modes(N)
    if family is None:
        family = restrict_biortho(PrimalFamily(modes, T, system.omega), precision, guard, dps)
    elif [md.key for md in family.modes] != modes.keys() or family.T != T:
        raise DependencyError("dual family does not match the retained modes or horizon")
    bvec = system.b_vector(family.modes)
    if np.any(bvec == 0):
        raise ApproximateControllabilityError("a control factor b_j vanishes")
    y = coefficient_vector(y0, family.modes)
    lam = np.array([md.lam for md in family.modes])
    c = -y * np.exp(-lam * T) / bvec
    primal = family.coeffs.T @ c
    primal_mp = None
    if family.coeffs_mp is not None:
        with mp.workdps(family.dps):
            c_mp = np.array([-mp.mpf(float(yi)) * mp.exp(-mp.mpf(float(li)) * mp.mpf(float(T)))
                             / mp.mpf(float(bi)) for yi, li, bi in zip(y, lam, bvec)], dtype=object)
            primal_mp = np.dot(family.coeffs_mp.T, c_mp)
            primal = to_float(primal_mp)
            G = family_gram(family.modes, family.modes, family.T, family.box,
                            family.support[0], "extended", family.dps)
            norm2 = float(np.dot(primal_mp, np.dot(G, primal_mp)))
    else:
        norm2 = float(primal @ family.gram @ primal)
    field_ = ControlField(system, family, c, primal, y, float(T), float(N), norm2, 0.0, primal_mp)
    forcing = field_.forcing(family.modes)
    res = float(np.max(np.abs(bvec * forcing + np.exp(-lam * T) * y))) if len(y) else 0.0
    field_.moment_residual = res
    if res > moment_tol:
        raise NumericError(f"moment residual {res:.3g} above {moment_tol:.3g}", residual=res)
    return field_


# --------------------------------------------------------------------------
# heat control cost

def cost_B(T, beta, theta1, C_hat=1.0):
    """``B(beta, T)`` from the isomorphism constant (``C_hat`` user supplied)."""
    return (C_hat * (T + 1.0) / T ** (theta1 + 1.5)
            * (math.sqrt(T) * (1.0 + T ** (theta1 + 1.0)) + 2.0 * beta + math.sqrt(T)))


def alpha0(T, beta, theta1, C_hat=1.0):
    """``2 beta + sqrt(T delta_0)`` with ``delta_0 = max(1, 2 ln(2 B))``."""
    delta0 = max(1.0, 2.0 * math.log(2.0 * cost_B(T, beta, theta1, C_hat)))
    return 2.0 * beta + math.sqrt(T * delta0)


def epsilon0(T, beta, theta1, C_hat=1.0, alpha=None):
    """Minimizer of ``exp(alpha beta / eps) (T - eps)^{-(theta1 + 1)}`` on ``(0, T)``."""
    a = alpha0(T, beta, theta1, C_hat) if alpha is None else float(alpha)
    ab = a * beta
    sigma = theta1 + 1.0
    return 2.0 * T * ab / (math.sqrt(ab * ab + 4.0 * sigma * T * ab) + ab)


@dataclass
class CostSweep:
    omega: tuple
    N: float
    beta: float
    theta1: float
    rows: list

    def to_dict(self):
        return {"omega": [list(iv) for iv in self.omega], "N": self.N, "beta": self.beta,
                "theta1": self.theta1, "rows": self.rows}


def heat_lr_cost_sweep(omega, T_list, N, beta=None, dim=1, precision="double",
                       guard=DEFAULT_GUARD, dps=DEFAULT_DPS, C_hat=1.0):
    """``K(T) = sum_m e^{-2 mu_m T} ||Q_m||^2`` and ``T ln K(T)`` over ``T_list``.

    Conditioning failures at a given T are recorded (``K = None``), not raised.
    """
    from .systems import heat_system
    sys = heat_system(N, omega, dim)
    modes = sys.modes(N)
    theta1 = dim / 2.0
    if beta is None:
        # the transverse Gram is small; extended precision keeps the fit cheap and exact
        beta = estimate_spectral_constant(sys.omega, list(range(1, int(N) + 1)), dim,
                                          "extended", guard, dps).slope
    rows = []
    for T in T_list:
        T = float(T)
        row = {"T": T, "n_modes": len(modes)}
        try:
            fam = restrict_biortho(PrimalFamily(modes, T, sys.omega), precision, guard, dps)
        except (ConditioningError, NumericError) as exc:
            row.update({"K": None, "TlnK": None, "error": str(exc)})
        else:
            mu = np.array([md.mu for md in modes])
            K = float(np.sum(np.exp(-2.0 * mu * T) * fam.norms2))
            row.update({"K": K, "TlnK": T * math.log(K), "cond": fam.cond,
                        "residual": fam.residual})
        if beta > 0:
            e0 = epsilon0(T, beta, theta1, C_hat)
            row.update({"alpha0": alpha0(T, beta, theta1, C_hat), "eps0": e0, "eps0_over_T": e0 / T})
        rows.append(row)
    return CostSweep(sys.omega, float(N), float(beta), theta1, rows)
