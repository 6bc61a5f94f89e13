"""Minimal-norm biorthogonal families, block moments and weighted norms.

A primal mode ``F_i(t, x') = exp(-lam_i t) psi_{m_i}(x') o_i`` is described
by a :class:`~momentctl.classes.TensorMode`.  Every family built here is
represented by a coefficient matrix ``C`` in the span of the primal modes
restricted to a region; the dual of mode ``i`` is ``Q_i = sum_l C[i, l] F_l``
on ``(t0, T) x region`` and zero elsewhere.  With ``G`` the Gram matrix of
the primal modes on that region, ``C = G^{-1}`` yields the unique
biorthogonal family of least norm inside the span, and the squared norms are
the diagonal of ``G^{-1}``.
"""

import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from scipy.optimize import brentq

from . import kernels
from .classes import TensorMode, TensorModeSet, tensor_params
from .errors import ConditioningError, ContractError, NumericError
from .gram import (divided_differences, exp_time_matrix, gram_M_k,
                   transverse_overlap_matrix)
from .observation import ObservationVector, cross_gram
from .precision import (DEFAULT_DPS, DEFAULT_GUARD, check_precision, identity_residual,
                        spd_inverse, to_float, to_mp)

__all__ = ["PrimalFamily", "BiorthFamily", "SpectralConstantReport", "WeightSpec",
           "BlockMomentResult", "TPNResult", "full_box", "as_box", "family_gram",
           "estimate_spectral_constant", "biortho_time_family", "block_moment_solve",
           "tensor_biortho_full", "epsilon_scaling", "choose_epsilon", "restrict_biortho",
           "graded_time_rule", "weighted_time_matrix", "weighted_norm", "check_tPN",
           "tpn_sharp_constant", "restriction_sandwich", "fit_envelope",
           "group_inverse_diagonals"]

DEFAULT_TOL = 1e-8
DEFAULT_PANELS = 40
DEFAULT_ORDER = 16
DEFAULT_RATIO = 0.5


# --------------------------------------------------------------------------
# geometry helpers

def full_box(dim):
    return tuple((0.0, math.pi) for _ in range(int(dim)))


def as_box(omega, dim=None):
    """Normalize ``(a, b)`` or ``((a1, b1), ...)`` to a tuple of intervals."""
    if omega is None:
        if dim is None:
            raise ContractError("window or dimension required")
        return full_box(dim)
    omega = tuple(omega)
    if len(omega) == 2 and not isinstance(omega[0], (tuple, list, np.ndarray)):
        omega = (omega,)
    box = tuple((float(a), float(b)) for a, b in omega)
    if dim is not None and len(box) != dim:
        raise ContractError(f"window has {len(box)} axes, transverse dimension is {dim}")
    for a, b in box:
        if not (0.0 <= a < b <= math.pi):
            raise ContractError(f"empty or invalid window interval ({a}, {b})")
    return box


def _is_full(box):
    return all(a == 0.0 and b == math.pi for a, b in box)


def _modes(modes):
    if isinstance(modes, TensorModeSet):
        return list(modes.modes)
    if isinstance(modes, TensorMode):
        return [modes]
    return list(modes)


def _lam(modes):
    return np.array([md.lam for md in modes], dtype=float)


def _obs_cross(mr, mc, precision, dps):
    obs_r = [md.obs if md.obs is not None else ObservationVector.scalar(1.0) for md in mr]
    obs_c = [md.obs if md.obs is not None else ObservationVector.scalar(1.0) for md in mc]
    if precision == "extended" and obs_r and obs_r[0].kind == "scalar":
        with mp.workdps(dps):
            vr = [mp.mpf(o.value) for o in obs_r]
            vc = [mp.mpf(o.value) for o in obs_c]
            out = np.empty((len(vr), len(vc)), dtype=object)
            for i, a in enumerate(vr):
                for j, b in enumerate(vc):
                    out[i, j] = a * b
        return out
    O = cross_gram(obs_r, obs_c)
    return to_mp(O) if precision == "extended" else O


def family_gram(modes_r, modes_c, T, box, t0=0.0, precision="double", dps=DEFAULT_DPS):
    """``<F_i, F_j>`` over ``(t0, T) x box`` (object array when extended)."""
    mr, mc = _modes(modes_r), _modes(modes_c)
    E = exp_time_matrix(_lam(mr), _lam(mc), T, t0, precision, dps)
    S = transverse_overlap_matrix([md.multi for md in mr], [md.multi for md in mc], box,
                                  precision, dps)
    O = _obs_cross(mr, mc, precision, dps)
    if precision == "extended":
        with mp.workdps(dps):
            return E * S * O
    return E * S * O


# --------------------------------------------------------------------------
# envelope diagnostics

def fit_envelope(log_ratio, A, prefactor=True):
    """Smallest ``C`` with ``[log C +] C * A_i >= log_ratio_i`` for every i.

    Returns ``(C, slack)`` where ``slack_i = model_i - log_ratio_i >= 0``.
    The envelopes in the estimates are non-constructive, so the fitted
    constant is a diagnostic only.
    """
    lr = np.asarray(log_ratio, dtype=float)
    A = np.asarray(A, dtype=float)
    ok = np.isfinite(lr)
    if not np.any(ok):
        return float("nan"), np.full(lr.shape, np.nan)
    if not prefactor:
        C = max(0.0, float(np.max(lr[ok] / A[ok])))
        return C, C * A - lr
    best = 0.0
    for r, a in zip(lr[ok], A[ok]):
        g = lambda c: math.log(c) + c * a - r
        lo, hi = 1e-300, 1.0
        while g(hi) < 0:
            hi *= 2.0
        best = max(best, brentq(g, lo, hi, xtol=1e-14, rtol=1e-12))
    return best, np.log(best) + best * A - lr


def group_inverse_diagonals(modes, guard=1e300):
    """``(M_k^{-1})_{jj}`` for each mode, built from the 1-D group data."""
    modes = _modes(modes)
    groups = {}
    for md in modes:
        groups.setdefault(md.k, {})[md.j] = md
    table = {}
    for k, members in groups.items():
        js = sorted(members)
        if js != list(range(1, len(js) + 1)):
            raise ContractError(f"group {k} is only partially retained")
        lam = [members[j].lam1d for j in js]
        obs = [members[j].obs if members[j].obs is not None else ObservationVector.scalar(1.0)
               for j in js]
        gg = gram_M_k(lam, obs, k=k, guard=guard)
        for j in js:
            table[(k, j)] = gg.inv_diag[j - 1]
    return np.array([table[(md.k, md.j)] for md in modes])


def _lambda_first(modes):
    """``lambda_{m,k}^{(1)} = mu_m + min of group k`` per mode."""
    first = {}
    for md in modes:
        first[md.k] = min(first.get(md.k, np.inf), md.lam1d)
    return np.array([md.mu + first[md.k] for md in modes])


# --------------------------------------------------------------------------
# family containers

@dataclass
class PrimalFamily:
    """Primal exponentials ``F_i`` on ``(0, T) x omega``."""

    modes: TensorModeSet
    T: float
    omega: tuple

    def __post_init__(self):
        if not self.T > 0:
            raise ContractError("T must be positive")
        dim = None
        if self.modes.transverse is not None:
            dim = self.modes.transverse.dim
        elif len(self.modes):
            dim = len(self.modes[0].multi)
        self.omega = as_box(self.omega, dim)
        for md in self.modes:
            if md.lam != md.mu + md.lam1d:
                raise ContractError(f"mode {md.key} breaks lam = mu + lam1d")

    def gram(self, precision="double", dps=DEFAULT_DPS):
        return family_gram(self.modes, self.modes, self.T, self.omega, 0.0, precision, dps)


@dataclass
class BiorthFamily:
    """Duals ``Q_i = sum_l coeffs[i, l] F_l`` on ``support x box``.

    Attributes
    ----------
    modes : list of TensorMode
    coeffs : ndarray
        Row ``i`` holds the expansion of ``Q_i`` in the primal modes.
    gram : ndarray
        Gram matrix whose inverse gave ``coeffs`` (region Gram).
    region : {"time", "full", "omega"}
    norms2 : ndarray
        Squared norms of the duals.
    residual : float
        ``max |<Q_i, F_j> - delta_ij|``.
    """

    modes: list
    coeffs: np.ndarray
    gram: np.ndarray
    region: str
    norms2: np.ndarray
    residual: float
    T: float
    box: tuple
    support: tuple
    precision: str = "double"
    cond: float = float("nan")
    coeffs_mp: np.ndarray | None = field(default=None, repr=False)
    dps: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.modes)

    def keys(self):
        return [md.key for md in self.modes]

    def index(self):
        return {md.key: i for i, md in enumerate(self.modes)}

    def pairing(self, other_modes=None, precision=None):
        """Matrix ``<Q_i, F_b>`` over the family's region for arbitrary modes ``F_b``."""
        other = self.modes if other_modes is None else _modes(other_modes)
        precision = precision or self.precision
        t0 = self.support[0]
        if precision == "extended" and self.coeffs_mp is not None:
            G = family_gram(self.modes, other, self.T, self.box, t0, "extended", self.dps)
            with mp.workdps(self.dps):
                return to_float(np.dot(self.coeffs_mp, G))
        G = family_gram(self.modes, other, self.T, self.box, t0)
        return self.coeffs @ G

    def time_coefficients(self, i):
        """``(lam, c)`` such that the time factor of the pairing is sum c e^{-lam t}."""
        return _lam(self.modes), self.coeffs[i]

    def evaluate(self, i, t, xprime):
        """Value of ``Q_i`` at times ``t`` and transverse points ``xprime``.

        ``xprime`` has shape ``(n, d-1)``; the result has shape
        ``(len(t), n)`` for scalar observations and ``(len(t), n, p)`` for
        windowed ones (``p`` window nodes).
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        X = np.atleast_2d(np.asarray(xprime, dtype=float))
        lam = _lam(self.modes)
        inside_t = (t >= self.support[0]) & (t <= self.support[1])
        inside_x = np.ones(X.shape[0], dtype=bool)
        for ax, (a, b) in enumerate(self.box):
            inside_x &= (X[:, ax] >= a) & (X[:, ax] <= b)
        E = np.exp(-np.outer(t, lam)) * self.coeffs[i][None, :]
        psi = np.ones((len(self.modes), X.shape[0]))
        for l, md in enumerate(self.modes):
            for ax, n in enumerate(md.multi):
                psi[l] *= math.sqrt(2.0 / math.pi) * np.sin(n * X[:, ax])
        obs = [md.obs if md.obs is not None else ObservationVector.scalar(1.0)
               for md in self.modes]
        if obs[0].kind == "scalar":
            o = np.array([ob.value for ob in obs])
            out = E @ (psi * o[:, None])
        else:
            V = np.vstack([ob.values for ob in obs])
            out = np.einsum("tl,lx,lp->txp", E, psi, V)
        mask = inside_t[:, None] & inside_x[None, :]
        return out * (mask if out.ndim == 2 else mask[..., None])

    def to_dict(self):
        return {
            "region": self.region, "T": self.T, "support": list(self.support),
            "box": [list(iv) for iv in self.box], "precision": self.precision,
            "cond": self.cond, "residual": self.residual,
            "modes": [{"m": md.m, "multi": list(md.multi), "k": md.k, "j": md.j,
                       "lambda": md.lam, "label": list(md.label) if isinstance(md.label, tuple)
                       else md.label} for md in self.modes],
            "coefficients": {f"{md.m},{md.k},{md.j}": self.coeffs[i].tolist()
                             for i, md in enumerate(self.modes)},
            "norms2": self.norms2.tolist(),
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _invert(G, G_mp, precision, guard, dps, what):
    inv = spd_inverse(G, precision, guard, G_mp=G_mp, dps=dps, what=what)
    res = identity_residual(inv.inv, G, inv.inv_mp, G_mp, dps)
    return inv, res


def _residual_check(res, tol, what, cond):
    if res > tol:
        raise ConditioningError(
            f"{what}: biorthogonality residual {res:.3g} above tolerance {tol:.3g} "
            f"(condition {cond:.3g}); reduce the truncation or use precision='extended'",
            cond=cond)


def _minimal_family(modes, T, box, t0, region, precision, guard, dps, tol, what):
    check_precision(precision)
    G = family_gram(modes, modes, T, box, t0)
    G_mp = family_gram(modes, modes, T, box, t0, "extended", dps) if precision == "extended" else None
    inv, res = _invert(G, G_mp, precision, guard, dps, what)
    _residual_check(res, tol, what, inv.cond)
    norms2 = np.diag(inv.inv).copy()
    return BiorthFamily(list(modes), inv.inv, G, region, norms2, res, float(T), tuple(box),
                        (float(t0), float(T)), precision, inv.cond, inv.inv_mp,
                        dps if precision == "extended" else None)


# --------------------------------------------------------------------------
# spectral-inequality constant

@dataclass
class SpectralConstantReport:
    """Sharp constants of ``||u||^2_{Omega_1} <= C ||u||^2_omega`` on packets."""

    omega: tuple
    N: list
    n_modes: list
    constants: list
    log_over_N: list
    slope: float
    intercept: float
    r2: float
    precision: str

    @property
    def beta_hat(self):
        return self.slope

    def to_dict(self):
        return _jsonable(self.__dict__)


def estimate_spectral_constant(omega, N_list, dim=None, precision="double",
                               guard=DEFAULT_GUARD, dps=DEFAULT_DPS):
    """Largest eigenvalue of the inverse restricted Gram of ``{psi_m : sqrt(mu_m) <= N}``.

    Returns per-N constants, ``log(constant) / N`` and a least-squares line
    ``log(constant) ~ slope * N + intercept`` (``slope`` is reported as the
    fitted beta).
    """
    from .spectral1d import transverse_box_spectrum
    box = as_box(omega, dim)
    dim = len(box)
    N_list = [int(n) for n in N_list]
    if not N_list or min(N_list) < 1:
        raise ContractError("N_list must hold integers >= 1")
    spec = transverse_box_spectrum(dim, max(max(N_list) ** 2 + 0.5, 1.5))
    consts, counts = [], []
    for N in N_list:
        multi = [md.multi for md in spec.modes if md.mu <= N * N]
        counts.append(len(multi))
        S = transverse_overlap_matrix(multi, multi, box)
        if _is_full(box):
            consts.append(1.0)
            continue
        S_mp = transverse_overlap_matrix(multi, multi, box, "extended", dps) \
            if precision == "extended" else None
        inv = spd_inverse(S, precision, guard, G_mp=S_mp, dps=dps,
                          what=f"restricted transverse Gram (N={N})")
        if precision == "extended":
            with mp.workdps(dps):
                ev = mp.eigsy(mp.matrix(inv.inv_mp.tolist()), eigvals_only=True)
                consts.append(float(max(ev)))
        else:
            consts.append(float(np.linalg.eigvalsh(inv.inv)[-1]))
    logs = np.log(consts)
    x = np.asarray(N_list, dtype=float)
    if len(N_list) >= 2 and np.ptp(x) > 0:
        slope, intercept = np.polyfit(x, logs, 1)
        fit = slope * x + intercept
        ss_tot = float(np.sum((logs - logs.mean()) ** 2))
        r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum((logs - fit) ** 2)) / ss_tot
    else:
        slope, intercept, r2 = (0.0, float(logs[0]), 1.0) if len(N_list) else (0.0, 0.0, 1.0)
    if _is_full(box):
        slope, intercept, r2 = 0.0, 0.0, 1.0
    return SpectralConstantReport(box, N_list, counts, consts, (logs / x).tolist(),
                                  float(slope), float(intercept), float(r2), precision)


# --------------------------------------------------------------------------
# time-only families (one transverse mode)

def _time_modes(m, grouped, K_max, mu=None, transverse=None):
    if transverse is not None:
        tm = transverse.mode(m)
        multi, mu = tm.multi, tm.mu
    else:
        if mu is None:
            raise ContractError("mu or transverse spectrum required")
        multi = (int(m),)
    modes = []
    for g in grouped.groups:
        if K_max is not None and g.index > K_max:
            break
        for j in range(g.g):
            lam1d = float(g.values[j])
            obs = None if g.observations is None else g.observations[j]
            modes.append(TensorMode(int(m), tuple(multi), float(mu), g.index, j + 1, lam1d,
                                    float(mu) + lam1d, obs, g.labels[j]))
    if not modes:
        raise ContractError("no groups retained")
    return modes


def biortho_time_family(m, grouped, T, K_max=None, mu=None, transverse=None, theta=None,
                        precision="double", guard=DEFAULT_GUARD, dps=DEFAULT_DPS,
                        tol=DEFAULT_TOL):
    """Least-norm duals to ``exp(-(lam_k^j + mu_m) t) B phi_k^j`` in ``L2(0, T; U2)``."""
    if not T > 0:
        raise ContractError("T must be positive")
    modes = _time_modes(m, grouped, K_max, mu, transverse)
    dim = len(modes[0].multi)
    fam = _minimal_family(modes, T, full_box(dim), 0.0, "time", precision, guard, dps, tol,
                          f"time Gram (m={m})")
    theta = theta if theta is not None else (grouped.theta or 0.5)
    _, thp = tensor_params(0.5, theta)
    minv = group_inverse_diagonals(modes)
    lower = fam.norms2 / minv
    lam1 = _lambda_first(modes)
    C, slack = fit_envelope(np.log(lower), T ** -thp + lam1 ** theta)
    fam.diagnostics = {"Minv_diag": minv, "lower_bound_ratio": lower,
                       "lower_bound_min": float(np.min(lower)), "envelope_C": C,
                       "envelope_slack": slack}
    return fam


# --------------------------------------------------------------------------
# block moment problem

@dataclass
class BlockMomentResult:
    """Solutions ``r_l`` (one per group) of the block moment problem.

    ``r_l(t) = sum_i coeffs[l, i] exp(-lam_i (t - eps))`` on ``(eps, T)``,
    zero on ``(0, eps)``.
    """

    modes: list
    groups: list
    eps: float
    T: float
    targets: np.ndarray
    coeffs: np.ndarray
    norms: np.ndarray
    residual: float
    envelope_K: np.ndarray
    envelope_C: float
    cond: float
    precision: str = "double"

    def evaluate(self, l, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lam = _lam(self.modes)
        out = np.exp(-np.outer(t - self.eps, lam)) @ self.coeffs[l]
        return np.where(t > self.eps, out, 0.0)

    def moments(self):
        """``int_0^T r_l(t) exp(-lam_j t) dt`` for every group ``l`` and mode ``j``."""
        lam = _lam(self.modes)
        E = exp_time_matrix(lam, lam, self.T - self.eps)
        return (self.coeffs @ E) * np.exp(-self.eps * lam)[None, :]


def block_moment_solve(m, grouped, targets, eps, T, mu=None, transverse=None, K_max=None,
                       theta=None, precision="double", guard=DEFAULT_GUARD, dps=DEFAULT_DPS,
                       tol=DEFAULT_TOL):
    """Solve ``int_0^T r_l e^{-lam_{m,k}^j t} dt = f_k^j delta_{kl}`` with ``r_l = 0`` on ``(0, eps)``.

    Parameters
    ----------
    targets : array_like or callable
        Values ``f_k^j`` in retained-mode order (groups by ``k``, then ``j``),
        or a callable ``f(mode) -> float``.
    """
    check_precision(precision)
    if not (0 < eps < T / 4):
        raise ContractError(f"need 0 < eps < T/4, got eps={eps}, T={T}")
    modes = _time_modes(m, grouped, K_max, mu, transverse)
    n = len(modes)
    if callable(targets):
        f = np.array([float(targets(md)) for md in modes])
    else:
        f = np.asarray(targets, dtype=float).reshape(-1)
        if f.size != n:
            raise ContractError(f"expected {n} targets, got {f.size}")
    lam = _lam(modes)
    ks = np.array([md.k for md in modes])
    group_ids = sorted(set(ks.tolist()))
    tau = T - eps
    E = exp_time_matrix(lam, lam, tau)
    E_mp = exp_time_matrix(lam, lam, tau, precision="extended", dps=dps) if precision == "extended" else None
    inv = spd_inverse(E, precision, guard, G_mp=E_mp, dps=dps, what=f"block Gram (m={m})")
    coeffs = np.zeros((len(group_ids), n))
    norms = np.zeros(len(group_ids))
    if precision == "extended":
        with mp.workdps(dps):
            shift = np.array([mp.exp(mp.mpf(eps) * mp.mpf(x)) for x in lam], dtype=object)
            for r, k in enumerate(group_ids):
                rhs = np.array([shift[i] * mp.mpf(f[i]) if ks[i] == k else mp.mpf(0)
                                for i in range(n)], dtype=object)
                a = np.dot(inv.inv_mp, rhs)
                coeffs[r] = to_float(a)
                norms[r] = float(mp.sqrt(max(np.dot(a, np.dot(E_mp, a)), 0)))
            mom = np.array([[float(x) for x in row]
                            for row in np.dot(np.dot(np.array([[mp.mpf(c) for c in row]
                                                               for row in coeffs], dtype=object),
                                                     E_mp), np.diag(1 / shift))])
    else:
        shift = np.exp(eps * lam)
        for r, k in enumerate(group_ids):
            rhs = np.where(ks == k, shift * f, 0.0)
            a = inv.inv @ rhs
            coeffs[r] = a
            norms[r] = math.sqrt(max(float(a @ E @ a), 0.0))
        mom = (coeffs @ E) / shift[None, :]
    want = np.array([[f[i] if ks[i] == k else 0.0 for i in range(n)] for k in group_ids])
    scale = max(1.0, float(np.max(np.abs(f)))) if n else 1.0
    res = float(np.max(np.abs(mom - want))) / scale if n else 0.0
    if res > tol:
        raise ConditioningError(f"block moment residual {res:.3g} above tolerance {tol:.3g} "
                                f"(condition {inv.cond:.3g})", cond=inv.cond)
    # divided-difference envelope K_{m,k}
    Kenv = np.zeros(len(group_ids))
    lam1 = np.zeros(len(group_ids))
    for r, k in enumerate(group_ids):
        idx = np.nonzero(ks == k)[0]
        nodes = np.array([modes[i].lam1d for i in idx])
        vals = np.exp(eps * nodes) * f[idx]
        table = divided_differences(nodes, vals)
        Kenv[r] = float(np.max(np.abs(table.leading())))
        lam1[r] = modes[idx[0]].mu + nodes.min()
    theta = theta if theta is not None else (grouped.theta or 0.5)
    _, thp = tensor_params(0.5, theta)
    mu_m = modes[0].mu
    with np.errstate(divide="ignore"):
        lr = np.where(Kenv > 0, np.log(np.maximum(norms, 1e-300)) - eps * mu_m - np.log(
            np.where(Kenv > 0, Kenv, 1.0)), np.nan)
    lr = np.where(norms > 0, lr, np.nan)
    C0, _ = fit_envelope(lr, T ** -thp + lam1 ** theta)
    return BlockMomentResult(modes, group_ids, float(eps), float(T), f, coeffs, norms, res,
                             Kenv, C0, inv.cond, precision)


# --------------------------------------------------------------------------
# full-cylinder families vanishing on (0, eps)

def choose_epsilon(lam, T, b):
    """``T/8`` if ``T/4 <= lam^{-1/(1+b)}``, else ``lam^{-1/(1+b)}``."""
    r = float(lam) ** (-1.0 / (1.0 + b))
    return T / 8.0 if T / 4.0 <= r else r


def tensor_biortho_full(modes, T, eps, precision="double", guard=DEFAULT_GUARD,
                        dps=DEFAULT_DPS, tol=DEFAULT_TOL):
    """Duals on ``(0, T) x Omega_1`` vanishing on ``(0, eps)``.

    For each transverse index ``m`` the least-norm time duals ``q_hat`` on
    ``(0, T - eps)`` are shifted: ``q(t) = e^{eps lam_i} q_hat(t - eps)``.
    In primal coefficients this is ``C = D C_hat D`` with
    ``D = diag(e^{eps lam})``.
    """
    check_precision(precision)
    mset = modes if isinstance(modes, TensorModeSet) else None
    modes = _modes(modes)
    if not (0 < eps < T / 4):
        raise ContractError(f"need 0 < eps < T/4, got eps={eps}, T={T}")
    n = len(modes)
    dim = len(modes[0].multi)
    box = full_box(dim)
    by_m = {}
    for i, md in enumerate(modes):
        by_m.setdefault(md.m, []).append(i)
    C = np.zeros((n, n))
    C_mp = np.full((n, n), mp.mpf(0), dtype=object) if precision == "extended" else None
    conds = {}
    tau = T - eps
    for m, idx in by_m.items():
        blk = [modes[i] for i in idx]
        lam = _lam(blk)
        G = family_gram(blk, blk, tau, box)
        G_mp = family_gram(blk, blk, tau, box, 0.0, "extended", dps) if precision == "extended" else None
        inv = spd_inverse(G, precision, guard, G_mp=G_mp, dps=dps, what=f"time Gram (m={m})")
        conds[m] = inv.cond
        ix = np.ix_(idx, idx)
        if precision == "extended":
            with mp.workdps(dps):
                d = np.array([mp.exp(mp.mpf(eps) * mp.mpf(x)) for x in lam], dtype=object)
                blockc = inv.inv_mp * np.outer(d, d)
                C_mp[ix] = blockc
                C[ix] = to_float(blockc)
        else:
            d = np.exp(eps * lam)
            C[ix] = inv.inv * np.outer(d, d)
    G_full = family_gram(modes, modes, T, box, eps)
    if precision == "extended":
        G_full_mp = family_gram(modes, modes, T, box, eps, "extended", dps)
        res = identity_residual(C, G_full, C_mp, G_full_mp, dps)
        with mp.workdps(dps):
            norms2 = np.array([float(C_mp[i, i]) for i in range(n)])
    else:
        res = identity_residual(C, G_full)
        norms2 = np.diag(C).copy()
    cond = max(conds.values())
    _residual_check(res, tol, "full-cylinder family", cond)
    fam = BiorthFamily(modes, C, G_full, "full", norms2, res, float(T), box, (float(eps), float(T)),
                       precision, cond, C_mp, dps if precision == "extended" else None)
    theta = mset.theta if mset is not None else 0.5
    thp = mset.theta_prime if mset is not None else tensor_params(0.5, theta)[1]
    minv = group_inverse_diagonals(modes)
    lam = _lam(modes)
    lam1 = _lambda_first(modes)
    lr = np.log(norms2) - 2 * eps * lam - np.log(minv)
    C0, slack = fit_envelope(lr, T ** -thp + lam1 ** theta)
    fam.diagnostics = {"Minv_diag": minv, "envelope_C": C0, "envelope_slack": slack,
                       "block_cond": conds, "eps": eps}
    return fam


def epsilon_scaling(modes, T, eps_list, precision="double", guard=DEFAULT_GUARD,
                    dps=DEFAULT_DPS):
    """Regress ``log ||q_i^eps||^2`` on ``eps`` per mode.

    Returns a dict with the fitted slopes and ``2 lam`` for comparison.
    """
    modes = _modes(modes)
    eps_list = [float(e) for e in eps_list]
    logs = []
    for e in eps_list:
        fam = tensor_biortho_full(modes, T, e, precision, guard, dps)
        logs.append(np.log(fam.norms2))
    logs = np.array(logs)
    slopes = np.polyfit(np.array(eps_list), logs, 1)[0] if len(eps_list) > 1 else np.full(len(modes), np.nan)
    return {"eps": eps_list, "log_norms2": logs, "slopes": slopes, "two_lambda": 2 * _lam(modes)}


# --------------------------------------------------------------------------
# families restricted to omega

def restrict_biortho(primal, precision="double", guard=DEFAULT_GUARD, dps=DEFAULT_DPS,
                     tol=DEFAULT_TOL):
    """Least-norm biorthogonal family in ``L2((0, T) x omega; U2)``.

    Raises
    ------
    ConditioningError
        Restricted Gram above the guard, or residual above ``tol``.
    """
    if not isinstance(primal, PrimalFamily):
        raise ContractError("restrict_biortho expects a PrimalFamily")
    modes = _modes(primal.modes)
    fam = _minimal_family(modes, primal.T, primal.omega, 0.0, "omega", precision, guard, dps,
                          tol, "restricted Gram")
    mset = primal.modes
    b, theta, thp = mset.b, mset.theta, mset.theta_prime
    minv = group_inverse_diagonals(modes)
    lam1 = _lambda_first(modes)
    T = primal.T
    A = T ** -b + T ** -thp + lam1 ** (b / (1 + b)) + lam1 ** theta
    C, slack = fit_envelope(np.log(fam.norms2 / minv), A)
    fam.diagnostics = {"Minv_diag": minv, "envelope_C": C, "envelope_slack": slack,
                       "b": b, "theta": theta, "theta_prime": thp}
    return fam


# --------------------------------------------------------------------------
# weights, graded quadrature and the tPN checker

@dataclass(frozen=True)
class WeightSpec:
    """Weight ``exp(-eta(x') / t^b)`` with ``eta = 0`` on omega, ``alpha*beta`` off it."""

    alpha: float
    beta: float
    b: float
    omega: tuple

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.b > 0):
            raise ContractError("alpha, beta and b must be positive")
        object.__setattr__(self, "omega", as_box(self.omega, len(as_box(self.omega))))

    @property
    def ab(self):
        return float(self.alpha) * float(self.beta)

    def eta(self, xprime):
        X = np.atleast_2d(np.asarray(xprime, dtype=float))
        inside = np.ones(X.shape[0], dtype=bool)
        for ax, (a, b) in enumerate(self.omega):
            inside &= (X[:, ax] >= a) & (X[:, ax] <= b)
        return np.where(inside, 0.0, self.ab)

    def weight(self, t, xprime):
        """Weight on the grid ``t x xprime`` (shape ``(len(t), n)``)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        eta = self.eta(xprime)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            expo = -np.divide.outer(eta, t ** self.b).T
        expo = np.where(eta[None, :] == 0, 0.0, expo)
        return np.exp(expo)


def _graded_edges(T, panels, ratio, ab=0.0, b=1.0, s_max=0.0, max_sub=256, split=1):
    geo = np.concatenate([[0.0], T * ratio ** np.arange(panels, -1, -1)])
    # below t_cut the weight exp(-ab / t^b) underflows
    t_cut = (ab / 745.0) ** (1.0 / b) if ab > 0 else 0.0
    edges = [0.0]
    for lo, hi in zip(geo[:-1], geo[1:]):
        t_ref = max(lo, t_cut, 1e-300)
        rate = s_max + (ab * b / t_ref ** (b + 1.0) if ab > 0 and hi > t_cut else 0.0)
        n_sub = int(min(max_sub, max(1, math.ceil((hi - lo) * rate / 4.0)))) * int(split)
        edges.extend(lo + (hi - lo) * np.arange(1, n_sub + 1) / n_sub)
    return np.array(edges)


def graded_time_rule(T, panels=DEFAULT_PANELS, order=DEFAULT_ORDER, ratio=DEFAULT_RATIO,
                     ab=0.0, b=1.0, s_max=0.0, split=1):
    """Gauss-Legendre rule on ``(0, T)`` with panels graded geometrically toward 0.

    Geometric edges are ``T r^i`` for ``i = 0..panels`` plus ``0``.  Each
    panel is further split uniformly so that neither ``exp(-s_max t)`` nor
    the weight ``exp(-ab / t^b)`` changes by more than about ``e^4`` across a
    sub-panel.
    """
    if not T > 0 or panels < 1 or order < 2 or not (0 < ratio < 1):
        raise ContractError("invalid graded rule parameters")
    edges = _graded_edges(T, panels, ratio, ab, b, s_max, split=split)
    x, w = np.polynomial.legendre.leggauss(int(order))
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (lo + half)[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.reshape(-1), weights.reshape(-1)


def _graded_rule_mp(T, panels, order, ratio, ab, b, s_max, dps):
    edges = _graded_edges(T, panels, ratio, ab, b, s_max)
    with mp.workdps(dps):
        X, W = mp.gauss_quadrature(int(order), "legendre")
        edges = [mp.mpf(float(e)) for e in edges[:-1]] + [mp.mpf(float(T))]
        nodes, weights = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = (hi - lo) / 2
            for x, w in zip(X, W):
                nodes.append(lo + half + half * x)
                weights.append(half * w)
    return nodes, weights


def weighted_time_matrix(lam_r, lam_c, T, ab, b, panels=DEFAULT_PANELS, order=DEFAULT_ORDER,
                         ratio=DEFAULT_RATIO, precision="double", dps=DEFAULT_DPS,
                         check_tol=1e-9):
    """``int_0^T exp(-ab / t^b) exp(-(l_i + l_j) t) dt`` on the graded rule.

    The double path is compared against the same rule with every sub-panel
    split in two; a relative discrepancy above ``check_tol`` raises
    :class:`NumericError`.
    """
    lam_r = np.asarray(lam_r, float)
    lam_c = np.asarray(lam_c, float)
    s = np.add.outer(lam_r, lam_c)
    s_max = float(np.max(s)) if s.size else 0.0
    if precision == "extended":
        nodes, weights = _graded_rule_mp(T, panels, order, ratio, ab, b, s_max, dps)
        with mp.workdps(dps):
            ab_, b_ = mp.mpf(float(ab)), mp.mpf(float(b))
            base = [w * mp.exp(-ab_ / t ** b_) if ab_ > 0 else w for t, w in zip(nodes, weights)]
            keep = [q for q, bw in enumerate(base) if bw != 0]
            Vr = [[mp.exp(-mp.mpf(float(l)) * nodes[q]) for q in keep] for l in lam_r]
            Vc = [[mp.exp(-mp.mpf(float(l)) * nodes[q]) for q in keep] for l in lam_c]
            bw = [base[q] for q in keep]
            Vr = [[v * w for v, w in zip(row, bw)] for row in Vr]
            out = np.empty(s.shape, dtype=object)
            for i, row in enumerate(Vr):
                for j, col in enumerate(Vc):
                    out[i, j] = mp.fdot(row, col)
        return out
    u, inv = np.unique(s.reshape(-1), return_inverse=True)
    rules = [graded_time_rule(T, panels, order, ratio, ab, b, s_max, split=k) for k in (1, 2)]
    w1, w2 = (kernels.weighted_time_integrals(u, ab, b, n, w) for n, w in rules)
    err = float(np.max(np.abs(w1 - w2) / np.maximum(np.abs(w2), 1e-250)))
    if err > check_tol:
        raise NumericError(f"weighted time quadrature did not converge (relative change {err:.3g})",
                           residual=err)
    return w2[inv].reshape(s.shape)


def _span_matrices(modes, weight, T, panels, order, precision="double", dps=DEFAULT_DPS):
    """(W*S_full*O, E*S_omega*O, W*(S_full-S_omega)*O) for the coefficient path."""
    modes = _modes(modes)
    lam = _lam(modes)
    multi = [md.multi for md in modes]
    dim = len(multi[0])
    box = as_box(weight.omega, dim)
    W = weighted_time_matrix(lam, lam, T, weight.ab, weight.b, panels, order,
                             precision=precision, dps=dps)
    E = exp_time_matrix(lam, lam, T, precision=precision, dps=dps)
    Sf = transverse_overlap_matrix(multi, multi, full_box(dim), precision, dps)
    Sw = transverse_overlap_matrix(multi, multi, box, precision, dps)
    O = _obs_cross(modes, modes, precision, dps)
    if precision == "extended":
        with mp.workdps(dps):
            return W * Sf * O, E * Sw * O, W * (Sf - Sw) * O
    return W * Sf * O, E * Sw * O, W * (Sf - Sw) * O


def _quad_forms(A, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.einsum("si,ij,sj->s", X, A, X)


@dataclass
class TPNResult:
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray

    @property
    def max_ratio(self):
        return float(np.max(self.ratio))

    def passed(self, bound=6.0):
        return bool(np.all(self.lhs <= bound * self.rhs))


def check_tPN(coeffs, modes, weight, T, panels=DEFAULT_PANELS, order=DEFAULT_ORDER):
    """Compare ``int_0^T int_{Omega_1} e^{-ab/t^b} |P|^2`` with ``int_0^T int_omega |P|^2``.

    ``coeffs`` holds one coefficient vector per row (``P = sum a_i F_i``).
    """
    L, R, _ = _span_matrices(modes, weight, T, panels, order)
    lhs = _quad_forms(L, coeffs)
    rhs = _quad_forms(R, coeffs)
    return TPNResult(lhs, rhs, lhs / rhs)


def tpn_sharp_constant(modes, weight, T, dps=DEFAULT_DPS, panels=DEFAULT_PANELS,
                       order=DEFAULT_ORDER):
    """``sup_a lhs(a) / rhs(a)`` over the span (generalized eigenvalue, extended precision)."""
    L, R, _ = _span_matrices(modes, weight, T, panels, order, "extended", dps)
    with mp.workdps(dps):
        Rm = mp.matrix(R.tolist())
        Lm = mp.matrix(L.tolist())
        Rm = (Rm + Rm.T) / 2
        Lc = mp.cholesky(Rm)
        Li = mp.inverse(Lc)
        X = Li * Lm * Li.T
        X = (X + X.T) / 2
        ev = mp.eigsy(X, eigvals_only=True)
        return float(max(ev))


def weighted_norm(field, weight, T, modes=None, panels=DEFAULT_PANELS, order=DEFAULT_ORDER,
                  x_order=64):
    """Squared norm in ``L2_eta`` over ``(0, T) x Omega_1``.

    Parameters
    ----------
    field : array_like or callable
        Mode coefficients (requires ``modes``), or ``f(t, x)`` vectorized
        over meshgrid arrays for one transverse dimension (scalar-valued).
    """
    if modes is not None:
        _, R, Woff = _span_matrices(modes, weight, T, panels, order)
        return _quad_forms(R + Woff, field)
    if not callable(field):
        raise ContractError("field must be coefficients with modes, or a callable")
    box = as_box(weight.omega)
    if len(box) != 1:
        raise ContractError("callable fields are supported for one transverse dimension")
    a, b = box[0]
    cuts = sorted({0.0, a, b, math.pi})
    xg, wg = np.polynomial.legendre.leggauss(int(x_order))
    xs, wx = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            half = 0.5 * (hi - lo)
            xs.append(lo + half + half * xg)
            wx.append(half * wg)
    xs, wx = np.concatenate(xs), np.concatenate(wx)
    tn, tw = graded_time_rule(T, panels, order, ab=weight.ab, b=weight.b)
    Wt = weight.weight(tn, xs[:, None])
    Tg, Xg = np.meshgrid(tn, xs, indexing="ij")
    vals = np.asarray(field(Tg, Xg), dtype=float)
    return float(np.einsum("t,x,tx->", tw, wx, Wt * vals ** 2))


def restriction_sandwich(coeffs, modes, weight, T, panels=DEFAULT_PANELS, order=DEFAULT_ORDER):
    """Return ``(weighted, restricted)`` squared norms for each coefficient row."""
    _, R, Woff = _span_matrices(modes, weight, T, panels, order)
    return _quad_forms(R + Woff, coeffs), _quad_forms(R, coeffs)
