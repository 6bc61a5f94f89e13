"""Precision policy: guarded double solves with an mpmath escape hatch.

Gram matrices of exponentials are exponentially ill-conditioned.  The double
path refuses matrices whose condition estimate exceeds the guard; the
extended path repeats the assembly and the solve with ``mpmath`` at a
configurable number of decimal digits.
"""

from dataclasses import dataclass

import mpmath as mp
import numpy as np
import scipy.linalg as sl

from .errors import ConditioningError, ContractError, RankError

DEFAULT_GUARD = 1e12
DEFAULT_DPS = 60
PRECISIONS = ("double", "extended")


def check_precision(precision):
    if precision not in PRECISIONS:
        raise ContractError(f"precision must be one of {PRECISIONS}, got {precision!r}")
    return precision


def extended_guard(dps):
    """Condition threshold used by the extended path (keeps ~8 digits)."""
    return 10.0 ** (dps - 8)


def to_mp(a):
    """Object array of ``mpf`` with the shape of ``a`` (floats taken as exact)."""
    a = np.asarray(a)
    if a.dtype == object:
        return a
    out = np.empty(a.shape, dtype=object)
    flat = out.reshape(-1)
    for i, x in enumerate(a.reshape(-1)):
        flat[i] = mp.mpf(float(x))
    return out


def to_float(a):
    a = np.asarray(a)
    if a.dtype != object:
        return a.astype(float)
    return np.vectorize(float, otypes=[float])(a) if a.size else np.zeros(a.shape)


def _mp_matrix(a):
    return mp.matrix([[x for x in row] for row in a])


def _from_mp_matrix(M):
    out = np.empty((M.rows, M.cols), dtype=object)
    for i in range(M.rows):
        for j in range(M.cols):
            out[i, j] = M[i, j]
    return out


@dataclass
class SPDInverse:
    """Inverse of a symmetric positive-definite matrix with diagnostics."""

    inv: np.ndarray
    cond: float
    precision: str
    inv_mp: np.ndarray | None = None
    dps: int | None = None


def spd_inverse(G, precision="double", guard=DEFAULT_GUARD, G_mp=None, dps=DEFAULT_DPS,
                what="Gram matrix"):
    """Invert an SPD matrix under the precision policy.

    Parameters
    ----------
    G : ndarray
        Double-precision matrix (always required; used for the guard).
    precision : {"double", "extended"}
    guard : float
        Largest accepted 2-norm condition number for the double path.
    G_mp : object ndarray, optional
        Extended-precision assembly of the same matrix.  Built from ``G`` if
        omitted, which only helps when the entries themselves are exact.
    """
    check_precision(precision)
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if G.shape != (n, n):
        raise ContractError("matrix must be square")
    if n == 0:
        return SPDInverse(np.zeros((0, 0)), 1.0, precision)
    if precision == "double":
        Gs = 0.5 * (G + G.T)
        ev = np.linalg.eigvalsh(Gs)
        if not np.all(np.isfinite(ev)) or ev[-1] <= 0:
            raise RankError(f"{what} is not positive definite")
        cond = float(ev[-1] / ev[0]) if ev[0] > 0 else np.inf
        if ev[0] <= n * np.finfo(float).eps * ev[-1]:
            raise RankError(f"{what} is singular to double precision (cond ~ {cond:.3g}); "
                            "reduce the truncation or use precision='extended'",
                            cond=cond, guard=guard)
        if cond > guard:
            raise ConditioningError(
                f"{what} condition {cond:.3g} exceeds guard {guard:.3g}; "
                "reduce the truncation or use precision='extended'", cond=cond, guard=guard)
        try:
            cf = sl.cho_factor(Gs, lower=True)
        except np.linalg.LinAlgError as exc:
            raise RankError(f"{what}: Cholesky failed ({exc})", cond=cond, guard=guard) from exc
        inv = sl.cho_solve(cf, np.eye(n))
        return SPDInverse(0.5 * (inv + inv.T), cond, precision)

    with mp.workdps(dps):
        A = to_mp(G) if G_mp is None else G_mp
        M = _mp_matrix(A)
        M = (M + M.T) / 2
        try:
            mp.cholesky(M)
        except (ZeroDivisionError, ValueError) as exc:
            raise RankError(f"{what} is not positive definite at {dps} digits") from exc
        Minv = mp.inverse(M)
        cond = mp.mnorm(M, 1) * mp.mnorm(Minv, 1)
        lim = extended_guard(dps)
        if cond > lim:
            raise ConditioningError(f"{what} condition {float(cond):.3g} exceeds the "
                                    f"{dps}-digit guard {lim:.3g}", cond=float(cond), guard=lim)
        inv_mp = _from_mp_matrix((Minv + Minv.T) / 2)
    return SPDInverse(to_float(inv_mp), float(cond), precision, inv_mp=inv_mp, dps=dps)


def mp_dot(A, B, dps=DEFAULT_DPS):
    """Matrix product of object arrays at ``dps`` digits."""
    with mp.workdps(dps):
        return np.dot(A, B)


def identity_residual(C, G, C_mp=None, G_mp=None, dps=DEFAULT_DPS):
    """max |C G - I| in the precision the inputs carry."""
    n = np.asarray(G).shape[0]
    if C_mp is not None and G_mp is not None:
        with mp.workdps(dps):
            P = np.dot(C_mp, G_mp)
            for i in range(n):
                P[i, i] -= 1
            return float(max(abs(x) for x in P.reshape(-1))) if n else 0.0
    P = np.asarray(C) @ np.asarray(G) - np.eye(n)
    return float(np.max(np.abs(P))) if n else 0.0
