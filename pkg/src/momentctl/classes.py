"""Spectral classes L(p, rho, theta, kappa), grouping and tensorization."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (ContractError, DegeneracyError, DistinctnessError, GroupingError,
                     ShapeError, TruncationError)

DISTINCT_TOL = 1e-10
DEFAULT_H5_SAMPLES = 10_000


@dataclass
class SpectralSequence:
    """Sorted positive sequence with optional class parameters.

    ``labels`` and ``observations`` (if given) run parallel to ``values`` and
    are carried through merging and grouping.
    """

    values: np.ndarray
    p: int | None = None
    rho: float | None = None
    theta: float | None = None
    kappa: float | None = None
    labels: list | None = None
    observations: list | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size and (np.any(~np.isfinite(v)) or np.any(v <= 0)):
            raise ContractError("sequence values must be finite and positive")
        if np.any(np.diff(v) < 0):
            raise ContractError("sequence values must be sorted")
        self.values = v
        if self.labels is None:
            self.labels = [(1, i + 1) for i in range(v.size)]
        if len(self.labels) != v.size:
            raise ShapeError("labels do not match values")
        if self.observations is not None and len(self.observations) != v.size:
            raise ShapeError("observations do not match values")

    def __len__(self):
        return self.values.size

    def shifted(self, mu):
        return SpectralSequence(self.values + mu, self.p, self.rho, self.theta, self.kappa,
                                list(self.labels), self.observations)


def as_sequence(seq):
    return seq if isinstance(seq, SpectralSequence) else SpectralSequence(np.asarray(seq, float))


def counting_function(seq, r):
    """Number of values <= r (binary search)."""
    return int(np.searchsorted(as_sequence(seq).values, r, side="right"))


@dataclass
class ClassReport:
    p: int
    rho: float
    theta: float
    h3_ok: bool
    h3_max_count: int
    h3_window: tuple | None
    h5_ok: bool
    kappa: float
    kappa_fitted: float
    h5_worst: tuple
    n_values: int
    n_pairs: int

    @property
    def passed(self):
        return self.h3_ok and self.h5_ok

    def to_dict(self):
        return {"p": self.p, "rho": self.rho, "theta": self.theta, "passed": self.passed,
                "h3_ok": self.h3_ok, "h3_max_count": self.h3_max_count,
                "h3_window": list(self.h3_window) if self.h3_window else None,
                "h5_ok": self.h5_ok, "kappa": self.kappa, "kappa_fitted": self.kappa_fitted,
                "h5_worst": list(self.h5_worst), "n_values": self.n_values,
                "n_pairs": self.n_pairs}


def verify_class(seq, p, rho, theta, kappa=None, r_max=None, samples=DEFAULT_H5_SAMPLES):
    """Check the window condition (H3) and the weak-gap condition (H5).

    H3 is checked exactly: the largest count of values in any open window of
    width ``rho`` equals the largest count in ``[v_i, v_i + rho)``.  H5 is
    checked on every pair of values (the supremum of
    ``|N(r1) - N(r2)| / (1 + |r1 - r2|**theta)`` is attained with ``r1`` just
    below one value and ``r2`` at another) plus a uniform grid of
    ``samples`` (r1, r2) pairs.

    When ``kappa`` is None the fitted kappa is used and H5 passes trivially.
    """
    seq = as_sequence(seq)
    v = seq.values
    if r_max is not None:
        v = v[v <= r_max]
    if v.size == 0:
        raise ShapeError("empty sequence")
    if not (int(p) == p and p >= 1 and rho > 0 and 0 < theta < 1):
        raise ContractError("need integer p >= 1, rho > 0 and theta in (0, 1)")
    if kappa is not None and kappa <= 0:
        raise ContractError("kappa must be positive")
    p = int(p)
    count, at = kernels.window_max_count(v, rho)
    h3_ok = count <= p
    h3_window = (float(v[at]), float(v[at] + rho))

    band = v.size if v.size <= 4000 else 4000
    best, bi, bj = kernels.h5_pair_sup(v, theta, band)
    worst = (float(v[bi]), float(v[bj]), bj - bi + 1)
    n_pairs = v.size * (v.size + 1) // 2
    top = float(r_max if r_max is not None else v[-1]) * (1 + 1e-9)
    g = max(2, int(np.sqrt(samples)))
    r = np.linspace(top / g, top, g)
    Nr = np.searchsorted(v, r, side="right")
    dN = np.abs(Nr[:, None] - Nr[None, :])
    ratio = dN / (1.0 + np.abs(r[:, None] - r[None, :]) ** theta)
    i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
    if ratio[i, j] > best:
        best = float(ratio[i, j])
        worst = (float(r[min(i, j)]), float(r[max(i, j)]), int(dN[i, j]))
    n_pairs += g * g
    fitted = float(best)
    kap = fitted if kappa is None else float(kappa)
    h5_ok = fitted <= kap * (1 + 1e-12)
    return ClassReport(p, float(rho), float(theta), h3_ok, int(count),
                       None if h3_ok else h3_window, h5_ok, kap, fitted, worst,
                       int(v.size), int(n_pairs))


# --------------------------------------------------------------------------
# grouping

@dataclass
class Group:
    index: int
    values: np.ndarray
    labels: list
    observations: list | None = None

    @property
    def g(self):
        return self.values.size

    @property
    def diameter(self):
        return float(self.values[-1] - self.values[0])


@dataclass
class GroupedSpectrum:
    """Partition of a sequence into groups G_k.

    Invariants: ``g_k <= p``, diameter ``<= rho`` and consecutive groups at
    distance ``>= gap_constant = rho / (2 p)``.
    """

    groups: list
    p: int
    rho: float
    gap_constant: float
    theta: float | None = None
    kappa: float | None = None

    def __len__(self):
        return len(self.groups)

    @property
    def values(self):
        return np.concatenate([g.values for g in self.groups]) if self.groups else np.zeros(0)

    def gaps(self):
        return np.array([b.values[0] - a.values[-1] for a, b in zip(self.groups, self.groups[1:])])

    def to_dict(self):
        gaps = self.gaps()
        return {"p": self.p, "rho": self.rho, "gap_constant": self.gap_constant,
                "groups": [{"k": g.index, "values": g.values.tolist(),
                            "labels": [list(l) if isinstance(l, tuple) else l for l in g.labels],
                            "diameter": g.diameter,
                            "gap_to_next": float(gaps[i]) if i < gaps.size else None}
                           for i, g in enumerate(self.groups)]}


def group_spectrum(seq, p, rho):
    """Greedy left-to-right grouping with threshold ``rho / (2 p)``."""
    seq = as_sequence(seq)
    v = seq.values
    if v.size == 0:
        raise ShapeError("empty sequence")
    p = int(p)
    if p < 1 or rho <= 0:
        raise ContractError("need p >= 1 and rho > 0")
    if np.any(np.diff(v) <= 0):
        i = int(np.nonzero(np.diff(v) <= 0)[0][0])
        raise DegeneracyError(f"repeated value {v[i]} at positions {i + 1}, {i + 2}")
    c = rho / (2.0 * p)
    breaks = np.nonzero(np.diff(v) > c)[0] + 1
    bounds = np.concatenate([[0], breaks, [v.size]])
    groups = []
    for k, (s, e) in enumerate(zip(bounds[:-1], bounds[1:]), start=1):
        if e - s > p:
            raise GroupingError(f"group {k} on [{v[s]}, {v[e - 1]}] holds {e - s} > p={p} "
                                f"values; a window of width {rho} violates the class assumption")
        obs = None if seq.observations is None else list(seq.observations[s:e])
        groups.append(Group(k, v[s:e].copy(), list(seq.labels[s:e]), obs))
    out = GroupedSpectrum(groups, p, float(rho), c, seq.theta, seq.kappa)
    assert all(g.g <= p and g.diameter <= rho for g in groups)
    assert np.all(out.gaps() >= c)
    return out


def merge_sequences(seq_a, seq_b, tol=DISTINCT_TOL):
    """Merge two sorted sequences, refusing coincident cross pairs.

    Labels default to ``(1, i)`` for ``seq_a`` and ``(2, i)`` for ``seq_b``.
    """
    a, b = as_sequence(seq_a), as_sequence(seq_b)
    la = [(1, l[1] if isinstance(l, tuple) else l) for l in a.labels]
    lb = [(2, l[1] if isinstance(l, tuple) else l) for l in b.labels]
    if len(a) and len(b):
        pos = np.searchsorted(b.values, a.values)
        for cand in (np.clip(pos - 1, 0, len(b) - 1), np.clip(pos, 0, len(b) - 1)):
            hit = np.nonzero(np.abs(b.values[cand] - a.values) <= tol)[0]
            if hit.size:
                i = int(hit[0])
                raise DistinctnessError(
                    f"eigenvalue {float(a.values[i])!r} of the first sequence (index {i + 1}) "
                    f"coincides with {float(b.values[cand[i]])!r} of the second (index {cand[i] + 1}); "
                    "approximate controllability fails")
    vals = np.concatenate([a.values, b.values])
    order = np.argsort(vals, kind="stable")
    labels = la + lb
    obs = None
    if a.observations is not None and b.observations is not None:
        allobs = list(a.observations) + list(b.observations)
        obs = [allobs[i] for i in order]
    return SpectralSequence(vals[order], labels=[labels[i] for i in order], observations=obs)


# --------------------------------------------------------------------------
# tensorization

@dataclass(frozen=True, eq=False)
class TensorMode:
    """One retained mode (m, k, j) with ``lam = mu + lam1d``."""

    m: int
    multi: tuple
    mu: float
    k: int
    j: int
    lam1d: float
    lam: float
    obs: object = field(default=None, repr=False)
    label: object = None

    @property
    def key(self):
        return (self.m, self.k, self.j)


def tensor_params(vartheta, theta):
    if not (0 < vartheta < 1 and 0 < theta < 1):
        raise ContractError("vartheta and theta must lie in (0, 1)")
    b = vartheta * max(1.0 / (1.0 - vartheta), 1.0 / (1.0 - theta))
    return b, theta / (1.0 - theta)


@dataclass
class TensorModeSet:
    modes: list
    N: float
    vartheta: float
    theta: float
    b: float
    theta_prime: float
    transverse: object = None
    grouped: object = None

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def lam(self):
        return np.array([md.lam for md in self.modes])

    @property
    def m(self):
        return np.array([md.m for md in self.modes])

    def keys(self):
        return [md.key for md in self.modes]

    def index(self):
        return {md.key: i for i, md in enumerate(self.modes)}

    def by_m(self):
        out = {}
        for i, md in enumerate(self.modes):
            out.setdefault(md.m, []).append(i)
        return out

    def subset(self, idx):
        return TensorModeSet([self.modes[i] for i in idx], self.N, self.vartheta, self.theta,
                             self.b, self.theta_prime, self.transverse, self.grouped)


def tensorize(transverse, grouped, N, vartheta=0.5, theta=None):
    """Retain modes with ``mu_m**vartheta <= N`` and group index ``k <= N``."""
    if theta is None:
        theta = grouped.theta if grouped.theta is not None else 0.5
    b, thp = tensor_params(vartheta, theta)
    if N < 1:
        raise ContractError("N must be >= 1")
    mu_top = N ** (1.0 / vartheta)
    if transverse.cutoff < mu_top - 1e-9 and (not transverse.modes or
                                               transverse.modes[-1].mu ** vartheta <= N):
        raise TruncationError(f"transverse cutoff {transverse.cutoff} below N^(1/vartheta) = {mu_top}")
    modes = []
    for tm in transverse.modes:
        if tm.mu ** vartheta > N * (1 + 1e-12):
            continue
        for g in grouped.groups:
            if g.index > N:
                break
            for j in range(g.g):
                lam1d = float(g.values[j])
                obs = None if g.observations is None else g.observations[j]
                modes.append(TensorMode(tm.rank, tm.multi, tm.mu, g.index, j + 1, lam1d,
                                        tm.mu + lam1d, obs, g.labels[j]))
    if not modes:
        raise TruncationError(f"no modes retained at N={N}")
    return TensorModeSet(modes, float(N), float(vartheta), float(theta), b, thp,
                         transverse, grouped)
