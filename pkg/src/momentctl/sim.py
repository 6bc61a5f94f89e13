"""Exact spectral forward simulation of the controlled systems.

Every system is diagonal in its eigenbasis, so the final state is known
mode by mode::

    <y(T), Phi_b> = e^{-lam_b T} <y0, Phi_b> + b_j <v, F_b>_{L2((0,T) x omega; U2)}

where ``v`` is the control in moment form (the applied control is
``u(t) = v(T - t)``).  When ``v`` is a combination of primal exponentials
(always the case for synthesized controls) the last term is a closed-form
Gram product.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .biortho import _modes, as_box
from .control import coefficient_vector
from .errors import ContractError, ShapeError
from .observation import window_weights

__all__ = ["SimResult", "simulate_forward", "hminus1_norm", "forcing_quadrature"]


@dataclass
class SimResult:
    """Final coefficients of ``y(T)`` split into retained and tail modes."""

    modes: list
    lam: np.ndarray
    initial: np.ndarray
    free: np.ndarray
    forcing: np.ndarray
    final: np.ndarray
    retained: np.ndarray
    T: float
    N: float
    N_sim: float
    meta: dict = field(default_factory=dict)

    @property
    def retained_residual(self):
        r = self.final[self.retained]
        return float(np.max(np.abs(r))) if r.size else 0.0

    @property
    def retained_norm(self):
        return float(np.linalg.norm(self.final[self.retained]))

    @property
    def tail_norm(self):
        return float(np.linalg.norm(self.final[~self.retained]))

    @property
    def tail_free_norm(self):
        return float(np.linalg.norm(self.free[~self.retained]))

    @property
    def l2_norm(self):
        return float(np.linalg.norm(self.final))

    @property
    def hminus1(self):
        return hminus1_norm(self)

    def rows(self):
        return [(md.m, md.k, md.j, md.lam, float(c), bool(r))
                for md, c, r in zip(self.modes, self.final, self.retained)]

    def summary(self):
        return {"T": self.T, "N": self.N, "N_sim": self.N_sim,
                "n_modes": len(self.modes), "n_retained": int(self.retained.sum()),
                "retained_residual": self.retained_residual,
                "retained_norm": self.retained_norm, "tail_norm": self.tail_norm,
                "tail_free_norm": self.tail_free_norm, "l2_norm": self.l2_norm,
                "hminus1_norm": self.hminus1, **self.meta}


def hminus1_norm(result):
    """``sqrt(sum |c|^2 / lam)``."""
    c = np.asarray(result.final if isinstance(result, SimResult) else result[0], dtype=float)
    lam = np.asarray(result.lam if isinstance(result, SimResult) else result[1], dtype=float)
    if c.shape != lam.shape:
        raise ShapeError("one eigenvalue per coefficient required")
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise ShapeError("eigenvalues must be positive and finite")
    return float(math.sqrt(np.sum(c * c / lam)))


def simulate_forward(system, y0, control, T, N_sim=None, N=None):
    """Propagate ``y0`` under ``control`` and return the final mode coefficients.

    Parameters
    ----------
    system : ControlSystem
    y0 : array, dict or callable
        Initial coefficients ``<y0, Phi>`` over the simulated modes (see
        :func:`~momentctl.control.coefficient_vector`; dict keys missing are 0).
    control : ControlField or None
        ``None`` means free decay.
    N_sim : float, optional
        Simulation truncation; defaults to ``2 N``.
    """
    T = float(T)
    if not T > 0:
        raise ContractError("T must be positive")
    if control is not None:
        if abs(control.T - T) > 1e-15 * max(1.0, T):
            raise ContractError(f"control horizon {control.T} differs from T={T}")
        N = control.N
    if N is None:
        raise ContractError("N is required without a control")
    N_sim = 2 * N if N_sim is None else float(N_sim)
    if N_sim < N:
        raise ContractError("N_sim must be >= the control truncation")
    modes = _modes(system.modes(N_sim))
    lam = np.array([md.lam for md in modes])
    y = coefficient_vector(y0, modes)
    free = np.exp(-lam * T) * y
    if control is None:
        forcing = np.zeros_like(free)
    else:
        forcing = system.b_vector(modes) * control.forcing(modes)
    kept = {md.key for md in (control.modes if control is not None else system.modes(N))}
    retained = np.array([md.key in kept for md in modes])
    meta = {"system": system.kind, "precision": control.precision if control is not None else "none"}
    return SimResult(modes, lam, y, free, forcing, free + forcing, retained, T, float(N),
                     float(N_sim), meta)


def _gl(a, b, order, panels=1):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        h = 0.5 * (hi - lo)
        xs.append(lo + h + h * x)
        ws.append(h * w)
    return np.concatenate(xs), np.concatenate(ws)


def forcing_quadrature(control, modes, t_panels=16, t_order=24, x_order=48):
    """``<v, F_b>`` by tensor Gauss quadrature of the sampled control.

    Independent of the closed-form path: ``v`` is evaluated pointwise
    (time factors in the family's precision) and integrated against each
    ``F_b`` on ``support x omega``; the observation pairing uses the window
    quadrature of ``U2``.
    """
    modes = _modes(modes)
    t0, T = control.support
    tn, tw = _gl(t0, T, t_order, t_panels)
    box = as_box(control.omega)
    h = control.transverse_factors(tn)
    xs, wx = [], []
    for a, b in box:
        x, w = _gl(a, b, x_order, 4)
        xs.append(x)
        wx.append(w)

    def psi(multi):
        out = np.ones(1)
        for ax, n in enumerate(multi):
            out = np.multiply.outer(out, math.sqrt(2.0 / math.pi) * np.sin(n * xs[ax]))
        return out.reshape(-1)

    wgrid = np.ones(1)
    for w in wx:
        wgrid = np.multiply.outer(wgrid, w)
    wgrid = wgrid.reshape(-1)
    lam_b = np.array([md.lam for md in modes])
    Eb = np.exp(-np.outer(tn, lam_b)) * tw[:, None]           # (nt, n_b)
    psi_b = np.array([psi(md.multi) for md in modes])         # (n_b, nx)
    obs_b = [md.obs for md in modes]
    scalar = obs_b[0].kind == "scalar"
    if not scalar:
        ref = obs_b[0]
        wwin = window_weights(ref.nodes)
        Vb = np.vstack([o.values for o in obs_b])            # (n_b, p)
    total = np.zeros(len(modes))
    for multi, hm in h.items():
        S = psi_b @ (psi(multi) * wgrid)                      # (n_b,)
        if scalar:
            tpart = hm @ Eb                                   # (n_b,)
            total += tpart * S * np.array([o.value for o in obs_b])
        else:
            proj = (hm * wwin) @ Vb.T                         # (nt, n_b)
            total += np.sum(proj * Eb, axis=0) * S
    return total
