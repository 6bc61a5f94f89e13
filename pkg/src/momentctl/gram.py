"""Closed-form inner products, divided differences and group Gram matrices."""

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import kernels
from .errors import ContractError, DegeneracyError, OrderingError
from .observation import ObservationVector, gram as obs_gram, inner as u2_inner
from .precision import DEFAULT_DPS, DEFAULT_GUARD, spd_inverse

__all__ = ["DividedDifferenceTable", "divided_differences", "delta_weights", "GroupGram",
           "gram_M_k", "exp_time_inner", "sine_overlap", "u2_inner", "exp_time_matrix",
           "transverse_overlap_matrix"]

NODE_TOL = 1e-12


# --------------------------------------------------------------------------
# divided differences

@dataclass
class DividedDifferenceTable:
    """Triangular table ``table[i, r] = f[x_i, ..., x_{i+r}]``.

    Values may be scalars or vectors (trailing axes of ``values``).
    """

    nodes: np.ndarray
    values: np.ndarray
    table: np.ndarray

    def __call__(self, i, j):
        """f[x_i, ..., x_j] for 0-based i <= j."""
        return self.table[i, j - i]

    @property
    def top(self):
        return self.table[0, len(self.nodes) - 1]

    def leading(self):
        """f[x_1], f[x_1, x_2], ..., f[x_1, ..., x_n]."""
        return self.table[0]


def divided_differences(nodes, values):
    x = np.asarray(nodes, dtype=float).reshape(-1)
    f = np.asarray(values, dtype=float)
    n = x.size
    if f.shape[0] != n:
        raise ContractError("nodes and values differ in length")
    if n > 1:
        gaps = np.abs(x[:, None] - x[None, :])[~np.eye(n, dtype=bool)]
        if np.min(gaps) <= NODE_TOL:
            raise DegeneracyError("divided differences need pairwise distinct nodes")
    table = np.zeros((n, n) + f.shape[1:])
    table[:, 0] = f
    for r in range(1, n):
        for i in range(n - r):
            table[i, r] = (table[i, r - 1] - table[i + 1, r - 1]) / (x[i] - x[i + r])
    return DividedDifferenceTable(x, f, table)


def delta_weights(eigenvalues):
    """``D[l-1, j-1] = prod_{i<l} (lambda_j - lambda_i)`` (zero for j < l)."""
    lam = np.asarray(eigenvalues, dtype=float).reshape(-1)
    if np.any(np.diff(lam) <= 0):
        raise OrderingError("group eigenvalues must be strictly increasing")
    g = lam.size
    D = np.zeros((g, g))
    for l in range(g):
        for j in range(g):
            D[l, j] = np.prod(lam[j] - lam[:l])
    return D


# --------------------------------------------------------------------------
# group Gram matrices

@dataclass
class GroupGram:
    k: int
    matrix: np.ndarray
    delta: np.ndarray
    inv_diag: np.ndarray
    cond: float
    renumbering: dict

    @property
    def det(self):
        return float(np.linalg.det(self.matrix))


def gram_M_k(eigenvalues, observations, multiplicities=None, k=None, guard=DEFAULT_GUARD):
    """Assemble ``M_k = sum_l Gram(delta_l^1 B phi^1, ..., delta_l^g B phi^g)``.

    Parameters
    ----------
    eigenvalues : sequence of float
        Strictly increasing group eigenvalues.
    observations : list
        One ObservationVector per eigenvalue, or (multiple case) a list of
        ``gamma_j`` ObservationVectors per eigenvalue.
    multiplicities : sequence of int, optional
        ``gamma_j``; inferred from ``observations`` when omitted.

    Notes
    -----
    Rows and columns follow the renumbering ``R(j, i) = gamma_1 + ... +
    gamma_{j-1} + i`` (1-based), returned as ``renumbering[(j, i)]``.
    """
    lam = np.asarray(eigenvalues, dtype=float).reshape(-1)
    D = delta_weights(lam)
    g = lam.size
    if len(observations) != g:
        raise ContractError("one observation entry per eigenvalue required")
    nested = [list(o) if not isinstance(o, ObservationVector) else [o] for o in observations]
    if multiplicities is not None:
        if [len(o) for o in nested] != [int(x) for x in multiplicities]:
            raise ContractError("multiplicities do not match the observation lists")
    flat, owner, ren = [], [], {}
    for j, obs in enumerate(nested):
        for i, o in enumerate(obs):
            ren[(j + 1, i + 1)] = len(flat) + 1
            flat.append(o)
            owner.append(j)
    O = obs_gram(flat)
    owner = np.array(owner)
    W = D.T @ D  # W[j, j'] = sum_l delta_l^j delta_l^j'
    M = O * W[np.ix_(owner, owner)]
    M = 0.5 * (M + M.T)
    inv = spd_inverse(M, "double", guard, what=f"M_{k if k is not None else ''}")
    return GroupGram(k, M, D, np.diag(inv.inv).copy(), inv.cond, ren)


# --------------------------------------------------------------------------
# closed-form kernels

def exp_time_inner(lam, lam2, T):
    """``int_0^T exp(-lam t) exp(-lam2 t) dt`` without overflow."""
    s = float(lam) + float(lam2)
    if s <= 0 or T <= 0:
        raise ContractError("need lam + lam2 > 0 and T > 0")
    return -math.expm1(-s * T) / s


def exp_time_matrix(lam_r, lam_c, T, t0=0.0, precision="double", dps=DEFAULT_DPS):
    """Matrix of ``int_{t0}^T exp(-(l_i + l_j) t) dt`` (object array if extended)."""
    if precision == "double":
        return kernels.exp_time_gram(lam_r, lam_c, T, t0)
    with mp.workdps(dps):
        T, t0 = mp.mpf(float(T)), mp.mpf(float(t0))
        out = np.empty((len(lam_r), len(lam_c)), dtype=object)
        for i, a in enumerate(lam_r):
            for j, b in enumerate(lam_c):
                s = mp.mpf(float(a)) + mp.mpf(float(b))
                out[i, j] = mp.exp(-s * t0) * (-mp.expm1(-s * (T - t0))) / s
    return out


def _sin_edge(k, x):
    if x == 0.0 or (x == math.pi and k == int(k)):
        return 0.0
    return math.sin(k * x)


def sine_overlap(m, n, a, b):
    """``int_a^b sin(m x) sin(n x) dx`` in closed form.

    ``m``, ``n`` may be tuples of equal length with ``(a, b)`` tuples of the
    same length, giving the product over a box.
    """
    if isinstance(m, (tuple, list)):
        out = 1.0
        for mi, ni, ai, bi in zip(m, n, a, b):
            out *= sine_overlap(mi, ni, ai, bi)
        return out
    if m < 1 or n < 1 or not (0 <= a < b <= math.pi):
        raise ContractError("need m, n >= 1 and 0 <= a < b <= pi")
    if m == n:
        s = 2 * m
        return 0.5 * (b - a) - (_sin_edge(s, b) - _sin_edge(s, a)) / (2 * s)
    d, s = m - n, m + n
    return ((_sin_edge(d, b) - _sin_edge(d, a)) / (2 * d)
            - (_sin_edge(s, b) - _sin_edge(s, a)) / (2 * s))


def _sine_overlap_mp(m, n, a, b):
    a, b = mp.mpf(float(a)), mp.mpf(float(b))

    def edge(k, x):
        if x == 0 or (x == mp.mpf(math.pi) and k == int(k)):
            # the double value of pi is treated as the true endpoint
            return mp.mpf(0)
        return mp.sin(k * x)

    if m == n:
        s = 2 * m
        return (b - a) / 2 - (edge(s, b) - edge(s, a)) / (2 * s)
    d, s = m - n, m + n
    return (edge(d, b) - edge(d, a)) / (2 * d) - (edge(s, b) - edge(s, a)) / (2 * s)


def transverse_overlap_matrix(multi_r, multi_c, box, precision="double", dps=DEFAULT_DPS):
    """``int_box psi_m psi_n`` for orthonormal box modes (products of sines).

    ``box`` is a sequence of ``(a, b)`` intervals, one per transverse axis.
    """
    multi_r = [tuple(m) for m in multi_r]
    multi_c = [tuple(m) for m in multi_c]
    d = len(box)
    if precision == "double":
        out = np.ones((len(multi_r), len(multi_c)))
        for ax, (a, b) in enumerate(box):
            mr = np.array([m[ax] for m in multi_r], dtype=np.int64)
            mc = np.array([m[ax] for m in multi_c], dtype=np.int64)
            full = a == 0.0 and b == math.pi
            S = kernels.sine_overlap_matrix(mr, mc, a, b)
            out *= S / (0.5 * math.pi) if not full else np.where(mr[:, None] == mc[None, :], 1.0, 0.0)
        return out
    with mp.workdps(dps):
        half_pi = mp.pi / 2
        out = np.empty((len(multi_r), len(multi_c)), dtype=object)
        for i, mr in enumerate(multi_r):
            for j, mc in enumerate(multi_c):
                v = mp.mpf(1)
                for ax in range(d):
                    a, b = box[ax]
                    if a == 0.0 and b == math.pi:
                        v *= 1 if mr[ax] == mc[ax] else 0
                    else:
                        v *= _sine_overlap_mp(mr[ax], mc[ax], a, b) / half_pi
                out[i, j] = v
    return out
