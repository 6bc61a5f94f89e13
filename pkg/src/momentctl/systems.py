"""Controlled systems: spectral data, observation vectors and control factors.

Each system is diagonal in a tensor eigenbasis ``Phi_{m,k}^{(j)} = psi_m(x')
phi_k^{(j)}(x)`` and is described by its retained primal modes and the
factor ``b_j`` multiplying the control in the moment equations

    -exp(-lam T) <y0, Phi> = b_j <v, F>_{L2((0,T) x omega; U2)}.

Supported kinds:

``dolecki``
    Pointwise control at ``x0`` of the 2-D heat equation; ``phi_k = sin(kx)``,
    observation ``sin(k x0)``, ``b = 1``.
``boundary``
    Two equations coupled through a Neumann-type boundary control; scalar
    observations ``phi'(0) = 1``.
``internal``
    Two equations controlled on ``(a, b)``; windowed observations.
``heat``
    Heat equation on the transverse box alone (``lam = mu_m``).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .classes import (SpectralSequence, TensorMode, TensorModeSet, group_spectrum,
                      merge_sequences, tensor_params, tensorize)
from .errors import ApproximateControllabilityError, ContractError
from .observation import ObservationVector
from .spectral1d import (DEFAULT_GRID_SIZE, DEFAULT_WINDOW_POINTS, dirichlet_laplacian_mode,
                         make_potential, observation_vector, sturm_liouville_eigs,
                         transverse_box_spectrum)

__all__ = ["ControlSystem", "dolecki_system", "boundary_system", "internal_system",
           "heat_system", "build_system", "SYSTEM_KINDS"]

SYSTEM_KINDS = ("dolecki", "boundary", "internal", "heat")
DEFAULT_OMEGA = ((0.3, 1.1),)


@dataclass
class ControlSystem:
    """Spectral description of a controlled system up to a truncation ``N_max``."""

    kind: str
    transverse: object
    grouped: object
    omega: tuple
    b_factors: tuple = (1.0, 1.0)
    vartheta: float = 0.5
    theta: float = 0.5
    shift: float = 0.0
    N_max: float = 1.0
    meta: dict = field(default_factory=dict)

    def modes(self, N):
        """Retained modes ``mu_m^vartheta <= N``, ``k <= N``."""
        if N > self.N_max + 1e-12:
            raise ContractError(f"system was built for N <= {self.N_max}, got {N}")
        if self.kind == "heat":
            return _heat_modes(self.transverse, N, self.vartheta, self.theta)
        return tensorize(self.transverse, self.grouped, N, self.vartheta, self.theta)

    def b_factor(self, mode):
        comp = mode.label[0] if isinstance(mode.label, tuple) else 1
        return self.b_factors[comp - 1]

    def b_vector(self, modes):
        return np.array([self.b_factor(md) for md in modes])

    def check_factors(self):
        if self.kind in ("boundary", "internal"):
            if self.b_factors[0] * self.b_factors[1] == 0:
                raise ApproximateControllabilityError("need b1 * b2 != 0 for the coupled system")
        elif any(f == 0 for f in self.b_factors[:1]):
            raise ApproximateControllabilityError("control factor must be nonzero")

    def to_dict(self):
        return {"kind": self.kind, "omega": [list(iv) for iv in self.omega],
                "b_factors": list(self.b_factors), "vartheta": self.vartheta,
                "theta": self.theta, "shift": self.shift, "N_max": self.N_max,
                **{k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, list))}}


def _heat_modes(transverse, N, vartheta, theta):
    b, thp = tensor_params(vartheta, theta)
    one = ObservationVector.scalar(1.0)
    modes = [TensorMode(tm.rank, tm.multi, tm.mu, 1, 1, 0.0, tm.mu, one, (1, 1))
             for tm in transverse.modes if tm.mu ** vartheta <= N * (1 + 1e-12)]
    if not modes:
        raise ContractError(f"no modes retained at N={N}")
    return TensorModeSet(modes, float(N), vartheta, theta, b, thp, transverse, None)


def _omega(omega, dim):
    from .biortho import as_box
    return as_box(DEFAULT_OMEGA if omega is None else omega, dim)


def _transverse(dim, N, vartheta):
    return transverse_box_spectrum(dim, max(N ** (1.0 / vartheta), 1.0) + 0.5)


def _constant_value(q):
    s = q.samples
    return float(s[0]) if np.all(s == s[0]) else None


def dolecki_system(x0, N_max, omega=None, vartheta=0.5):
    """Pointwise control at ``x0``: ``F = e^{-(k^2+mu_m) t} psi_m(x') sin(k x0)``."""
    if not (0 < x0 < math.pi):
        raise ContractError("x0 must lie in (0, pi)")
    K = int(math.ceil(N_max)) + 1
    vals = np.arange(1, K + 1, dtype=float) ** 2
    obs = [ObservationVector.scalar(math.sin(k * x0)) for k in range(1, K + 1)]
    for k, o in enumerate(obs, start=1):
        if abs(o.value) < 1e-14:
            raise ApproximateControllabilityError(
                f"sin({k} x0) = 0: x0/pi is rational and approximate controllability fails")
    seq = SpectralSequence(vals, p=1, rho=3.0, theta=0.5, kappa=1.0,
                           labels=[(1, k) for k in range(1, K + 1)], observations=obs)
    grouped = group_spectrum(seq, 1, 3.0)
    return ControlSystem("dolecki", _transverse(1, N_max, vartheta), grouped, _omega(omega, 1),
                         (1.0, 1.0), vartheta, 0.5, 0.0, float(N_max), {"x0": float(x0)})


def _coupled_sequences(q, K, normalization, grid_size):
    """Dirichlet modes (component 1) and Sturm-Liouville modes (component 2)."""
    q = make_potential(q, grid_size)
    c = _constant_value(q)
    if c is not None:
        # constant potential: phi^(2) = phi^(1), nu^(2) = k^2 + c exactly
        e1 = [dirichlet_laplacian_mode(k, normalization, grid_size) for k in range(1, K + 1)]
        nu2 = np.array([e.eigenvalue + c for e in e1])
        shift = 1.0 - nu2[0] if nu2[0] <= 0 else 0.0
        e2 = e1
        nu2 = nu2 + shift
    else:
        e1 = [dirichlet_laplacian_mode(k, normalization, grid_size) for k in range(1, K + 1)]
        e2 = sturm_liouville_eigs(q, K, grid_size, normalization)
        shift = e2[0].shift
        nu2 = np.array([e.eigenvalue for e in e2])
    nu1 = np.array([e.eigenvalue for e in e1]) + shift
    return q, e1, e2, nu1, nu2, shift


def _coupled_system(kind, q, N_max, omega, b_factors, obs_kind, normalization, vartheta,
                    grid_size, window_points):
    K = int(math.ceil(N_max)) + 3
    q, e1, e2, nu1, nu2, shift = _coupled_sequences(q, K, normalization, grid_size)
    o1 = [observation_vector(e, obs_kind, window_points) for e in e1]
    o2 = [observation_vector(e, obs_kind, window_points) for e in e2]
    s1 = SpectralSequence(nu1, labels=[(1, k) for k in range(1, K + 1)], observations=o1)
    s2 = SpectralSequence(nu2, labels=[(2, k) for k in range(1, K + 1)], observations=o2)
    merged = merge_sequences(s1, s2)
    merged = SpectralSequence(merged.values, p=2, rho=3.0, theta=0.5, labels=merged.labels,
                              observations=merged.observations)
    grouped = group_spectrum(merged, 2, 3.0)
    # drop groups that may be incomplete at the end of the computed range
    top = min(nu1[-1], nu2[-1])
    keep = [g for g in grouped.groups if g.values[-1] < top - grouped.gap_constant]
    grouped.groups = keep
    if len(keep) < math.floor(N_max):
        raise ContractError("not enough complete groups for the requested truncation")
    sys = ControlSystem(kind, _transverse(1, N_max, vartheta), grouped, _omega(omega, 1),
                        tuple(float(b) for b in b_factors), vartheta, 0.5, float(shift),
                        float(N_max), {"potential": q.name, "qbar": q.mean})
    sys.check_factors()
    return sys


def boundary_system(q, N_max, omega=None, b_factors=(1.0, 1.0), vartheta=0.5,
                    grid_size=DEFAULT_GRID_SIZE):
    """Boundary-coupled system: scalar observations ``phi'(0) = 1``."""
    return _coupled_system("boundary", q, N_max, omega, b_factors, "boundary", "boundary",
                           vartheta, grid_size, DEFAULT_WINDOW_POINTS)


def internal_system(q, a, b, N_max, omega=None, b_factors=(1.0, 1.0), vartheta=0.5,
                    grid_size=DEFAULT_GRID_SIZE, window_points=DEFAULT_WINDOW_POINTS):
    """Internally coupled system observed on the window ``(a, b)``."""
    norm = ("internal", a, b)
    sys = _coupled_system("internal", q, N_max, omega, b_factors, norm, norm, vartheta,
                          grid_size, window_points)
    sys.meta["window"] = [float(a), float(b)]
    return sys


def heat_system(N_max, omega=None, dim=1, vartheta=0.5):
    """Heat equation on ``(0, pi)^dim`` with ``F_m = e^{-mu_m t} psi_m``."""
    return ControlSystem("heat", _transverse(dim, N_max, vartheta), None, _omega(omega, dim),
                         (1.0, 1.0), vartheta, 0.5, 0.0, float(N_max), {"dim": int(dim)})


def build_system(kind, N_max, **kw):
    """Dispatch on ``kind`` (see :data:`SYSTEM_KINDS`)."""
    if kind == "dolecki":
        return dolecki_system(kw.get("x0", 1.0), N_max, kw.get("omega"), kw.get("vartheta", 0.5))
    if kind == "boundary":
        return boundary_system(kw.get("q", "cos2"), N_max, kw.get("omega"),
                               kw.get("b_factors", (1.0, 1.0)), kw.get("vartheta", 0.5),
                               kw.get("grid_size", DEFAULT_GRID_SIZE))
    if kind == "internal":
        a, b = kw.get("window", (0.0, math.pi))
        return internal_system(kw.get("q", "cos2"), a, b, N_max, kw.get("omega"),
                               kw.get("b_factors", (1.0, 1.0)), kw.get("vartheta", 0.5),
                               kw.get("grid_size", DEFAULT_GRID_SIZE),
                               kw.get("window_points", DEFAULT_WINDOW_POINTS))
    if kind == "heat":
        return heat_system(N_max, kw.get("omega"), kw.get("dim", 1), kw.get("vartheta", 0.5))
    raise ContractError(f"unknown system kind {kind!r}; expected one of {SYSTEM_KINDS}")
