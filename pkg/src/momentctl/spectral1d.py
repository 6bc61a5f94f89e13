"""One-dimensional and transverse spectral data.

Dirichlet modes of ``-d^2/dx^2`` on (0, pi) are explicit.  Modes of
``-d^2/dx^2 + q`` come from a second-order finite-difference discretization
solved as a symmetric tridiagonal eigenproblem on grids h and h/2, combined
by Richardson extrapolation.

``grid_size`` always counts subintervals of [0, pi]; the default 1024 gives
the shared 1025-point grid.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .errors import (CapacityError, ContractError, DomainError, NumericError,
                     ResolutionError, ShapeError)
from .observation import (DEFAULT_WINDOW_POINTS, ObservationVector, check_window,
                          corrected_trapezoid, window_nodes)

DEFAULT_GRID_SIZE = 1024
DEFAULT_MODE_CAP = 200_000


def uniform_grid(grid_size=DEFAULT_GRID_SIZE):
    return np.linspace(0.0, np.pi, int(grid_size) + 1)


# --------------------------------------------------------------------------
# potentials

@dataclass(frozen=True, eq=False)
class Potential:
    """Potential q sampled on the uniform grid over [0, pi].

    ``func`` (if given) is used to evaluate q off the grid, e.g. on the
    refined Richardson grid; otherwise samples are linearly interpolated.
    """

    samples: np.ndarray = field(repr=False)
    name: str = "custom"
    func: object = field(default=None, repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 3:
            raise ShapeError("potential needs at least 3 samples")
        if not np.all(np.isfinite(s)):
            raise ContractError("potential samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def grid(self):
        return np.linspace(0.0, np.pi, self.samples.size)

    @property
    def mean(self):
        """Trapezoidal mean over (0, pi)."""
        return float(trapezoid(self.samples, self.grid) / np.pi)

    def at(self, x):
        x = np.asarray(x, dtype=float)
        if self.func is not None:
            return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape).copy()
        return np.interp(x, self.grid, self.samples)

    def shifted(self, c):
        f = None if self.func is None else (lambda x, g=self.func: g(x) + c)
        return Potential(self.samples + c, f"{self.name}+{c:g}", f)

    @classmethod
    def from_function(cls, func, name="custom", grid_size=DEFAULT_GRID_SIZE):
        x = uniform_grid(grid_size)
        return cls(np.broadcast_to(func(x), x.shape).astype(float), name, func)

    @classmethod
    def from_csv(cls, path, grid_size=DEFAULT_GRID_SIZE):
        """Read ``x,value`` rows (header and ``#`` comments allowed)."""
        rows = []
        with open(path, newline="") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split(",")
                try:
                    rows.append((float(parts[0]), float(parts[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise ContractError(f"bad potential row: {line!r}")
        if len(rows) < 3:
            raise ShapeError("potential CSV needs at least 3 rows")
        xs, vs = np.array(rows).T
        order = np.argsort(xs)
        xs, vs = xs[order], vs[order]
        if xs[0] > 1e-12 or xs[-1] < np.pi - 1e-9:
            raise ContractError("potential CSV must cover [0, pi]")
        return cls.from_function(lambda x: np.interp(x, xs, vs), f"csv:{path}", grid_size)


def make_potential(spec, grid_size=DEFAULT_GRID_SIZE):
    """Build a potential from ``"zero"``, ``"const:c"``, ``"cos2"`` or a CSV path."""
    if isinstance(spec, Potential):
        return spec
    s = str(spec).strip()
    if s == "zero":
        return Potential.from_function(lambda x: np.zeros_like(x), "zero", grid_size)
    if s.startswith("const:"):
        c = float(s.split(":", 1)[1])
        return Potential.from_function(lambda x: np.full_like(x, c), s, grid_size)
    if s == "cos2":
        return Potential.from_function(lambda x: np.cos(2.0 * x), "cos2", grid_size)
    if s.startswith("csv:"):
        s = s[4:]
    if s.endswith(".csv"):
        return Potential.from_csv(s, grid_size)
    raise ContractError(f"unknown potential spec {spec!r}")


# --------------------------------------------------------------------------
# eigenpairs

def _parse_normalization(normalization):
    if normalization in ("boundary", "l2"):
        return normalization, None
    if isinstance(normalization, (tuple, list)) and normalization and normalization[0] == "internal":
        return "internal", check_window(*normalization[1:3])
    raise ContractError(f"unknown normalization {normalization!r}")


@dataclass(frozen=True, eq=False)
class Eigenpair1D:
    """Dirichlet eigenpair on (0, pi).

    ``samples`` live on the uniform grid with ``grid_size`` subintervals.  For
    explicit sine modes ``scale`` is set and ``evaluate`` is exact; otherwise
    a cubic spline through the samples is used.
    """

    index: int
    eigenvalue: float
    samples: np.ndarray = field(repr=False)
    derivative_at_0: float
    grid_size: int
    normalization: str = "boundary"
    window: tuple | None = None
    shift: float = 0.0
    scale: float | None = None

    @property
    def grid(self):
        return uniform_grid(self.grid_size)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.scale is not None:
            return self.scale * np.sin(self.index * x)
        return CubicSpline(self.grid, self.samples)(x)


def _window_norm2(evaluate, a, b, n_points=DEFAULT_WINDOW_POINTS):
    x = window_nodes(a, b, n_points)
    v = evaluate(x)
    return corrected_trapezoid(v * v, x)


def sine_window_norm2(k, a, b):
    """Closed form of int_a^b sin(kx)^2 dx."""
    return 0.5 * (b - a) - (math.sin(2 * k * b) - math.sin(2 * k * a)) / (4 * k)


def dirichlet_laplacian_mode(k, normalization="boundary", grid_size=DEFAULT_GRID_SIZE):
    """Explicit mode ``nu = k**2``, ``phi = c sin(kx)``.

    Parameters
    ----------
    k : int
    normalization : "boundary" | ("internal", a, b) | "l2"
        ``boundary`` gives ``phi'(0) = 1``; ``internal`` gives unit L2(a, b)
        norm; ``l2`` gives unit L2(0, pi) norm.
    """
    if int(k) != k or k < 1:
        raise DomainError(f"mode index must be a positive integer, got {k}")
    k = int(k)
    kind, win = _parse_normalization(normalization)
    if kind == "boundary":
        c = 1.0 / k
    elif kind == "l2":
        c = math.sqrt(2.0 / math.pi)
    else:
        c = 1.0 / math.sqrt(sine_window_norm2(k, *win))
    x = uniform_grid(grid_size)
    samples = c * np.sin(k * x)
    samples[0] = samples[-1] = 0.0
    samples.setflags(write=False)
    d0 = 1.0 if kind == "boundary" else c * k
    return Eigenpair1D(k, float(k * k), samples, d0, int(grid_size), kind, win, 0.0, c)


def _fd_tridiagonal(q, n):
    h = np.pi / n
    x = np.linspace(0.0, np.pi, n + 1)[1:-1]
    d = 2.0 / h ** 2 + q.at(x)
    e = np.full(n - 2, -1.0 / h ** 2)
    return d, e, h


def sturm_liouville_eigs(q, K, grid_size=DEFAULT_GRID_SIZE, normalization="boundary"):
    """First K Dirichlet eigenpairs of ``-u'' + q u`` on (0, pi).

    Eigenvalues are Richardson-extrapolated from grids h and h/2; the
    eigenfunctions come from grid h.  When the smallest eigenvalue is not
    positive, the whole spectrum is shifted by ``c = 1 - nu_1`` and ``c`` is
    recorded on every returned pair.

    Raises
    ------
    ResolutionError
        ``K > grid_size / 4``.
    NumericError
        LAPACK failure or eigen-residual above tolerance.
    """
    q = make_potential(q, grid_size)
    K = int(K)
    n = int(grid_size)
    if K < 1:
        raise DomainError("K must be >= 1")
    if n < 64:
        raise ResolutionError(f"grid_size must be >= 64, got {n}")
    if K > n / 4:
        raise ResolutionError(f"K={K} too large for grid_size={n} (need K <= grid_size/4)")
    kind, win = _parse_normalization(normalization)

    d, e, h = _fd_tridiagonal(q, n)
    d2, e2, _ = _fd_tridiagonal(q, 2 * n)
    try:
        w, V = eigh_tridiagonal(d, e, select="i", select_range=(0, K - 1))
        w2 = eigh_tridiagonal(d2, e2, eigvals_only=True, select="i", select_range=(0, K - 1))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"tridiagonal eigensolve failed: {exc}") from exc
    # residual of the coarse solve
    AV = d[:, None] * V
    AV[:-1] += e[:, None] * V[1:]
    AV[1:] += e[:, None] * V[:-1]
    res = float(np.max(np.abs(AV - V * w)) / max(1.0, np.max(np.abs(w))))
    if not np.isfinite(res) or res > 1e-8:
        raise NumericError("eigen-residual too large", residual=res)
    nu = (4.0 * w2 - w) / 3.0
    if np.any(np.diff(nu) <= 0):
        raise NumericError("extrapolated eigenvalues are not strictly increasing")
    shift = 0.0
    if nu[0] <= 0:
        shift = 1.0 - nu[0]
        nu = nu + shift

    pairs = []
    for i in range(K):
        u = np.zeros(n + 1)
        u[1:-1] = V[:, i]
        d0 = (-25 * u[0] + 48 * u[1] - 36 * u[2] + 16 * u[3] - 3 * u[4]) / (12 * h)
        if d0 < 0:
            u, d0 = -u, -d0
        nrm = math.sqrt(h * float(u @ u))  # trapezoid; endpoints vanish
        u, d0 = u / nrm, d0 / nrm
        if kind == "boundary":
            c = 1.0 / d0
        elif kind == "l2":
            c = 1.0
        else:
            spl = CubicSpline(np.linspace(0.0, np.pi, n + 1), u)
            c = 1.0 / math.sqrt(_window_norm2(spl, *win))
        u = c * u
        u.setflags(write=False)
        d0 = 1.0 if kind == "boundary" else c * d0
        pairs.append(Eigenpair1D(i + 1, float(nu[i]), u, float(d0), n, kind, win, shift))
    return pairs


def observation_vector(eig, kind="boundary", window_points=DEFAULT_WINDOW_POINTS):
    """Observation of an eigenfunction.

    ``boundary`` gives the scalar ``phi'(0)`` (1 under the boundary
    normalization).  ``("internal", a, b)`` gives the restriction of phi to
    (a, b), sampled on a uniform window grid.
    """
    k, win = _parse_normalization(kind)
    if k == "boundary":
        if eig.normalization != "boundary":
            raise ContractError("boundary observation needs the boundary normalization")
        return ObservationVector.scalar(eig.derivative_at_0)
    if k != "internal":
        raise ContractError(f"unsupported observation kind {kind!r}")
    if eig.normalization != "internal" or eig.window != win:
        raise ContractError(f"internal observation on {win} needs eigenfunctions "
                            f"normalized on that window (got {eig.normalization}, {eig.window})")
    x = window_nodes(*win, window_points)
    return ObservationVector.on_window(eig.evaluate(x), x, win)


# --------------------------------------------------------------------------
# asymptotics

@dataclass
class AsymptoticsReport:
    xi: np.ndarray
    tail_l2: np.ndarray
    eventually_decreasing: bool
    decreasing_from: int | None
    qbar: float


def _values(eigs):
    return np.array([e.eigenvalue if isinstance(e, Eigenpair1D) else float(e) for e in eigs])


def verify_asymptotics(eigs1, eigs2, qbar, tol=1e-9):
    """xi_k = nu2_k - nu1_k - qbar, its tail l2 sums and a decay flag.

    ``decreasing_from`` is the first k (1-based) after which |xi_k| never
    increases by more than ``tol``; the flag checks the windowed average of
    |xi| on the second half of the sequence.
    """
    v1, v2 = _values(eigs1), _values(eigs2)
    if v1.size != v2.size:
        raise ShapeError(f"length mismatch {v1.size} vs {v2.size}")
    if v1.size < 5:
        raise ShapeError("need at least 5 eigenvalues")
    xi = v2 - v1 - qbar
    tail = np.sqrt(np.cumsum((xi ** 2)[::-1])[::-1])
    a = np.abs(xi)
    inc = np.diff(a) > tol
    bad = np.nonzero(inc)[0]
    start = int(bad[-1] + 2) if bad.size else 1
    decreasing_from = start if start < a.size else None
    w = max(2, a.size // 10)
    avg = np.convolve(a, np.ones(w) / w, mode="valid")
    half = avg[avg.size // 2:]
    ok = bool(np.all(np.diff(half) <= tol))
    return AsymptoticsReport(xi, tail, ok, decreasing_from, float(qbar))


# --------------------------------------------------------------------------
# transverse spectrum on boxes (0, pi)^(d-1)

@dataclass(frozen=True)
class TransverseMode:
    rank: int
    multi: tuple
    mu: float


@dataclass
class TransverseSpectrum:
    """Dirichlet spectrum of the box (0, pi)^(d-1), sorted by mu.

    ``psi_m(x') = prod_i sqrt(2/pi) sin(n_i x'_i)``.
    """

    dim: int
    cutoff: float
    modes: list
    kappa1: float
    theta1: float

    @property
    def mu(self):
        return np.array([m.mu for m in self.modes])

    def counting(self, r):
        return int(np.searchsorted(self.mu, r, side="right"))

    def mode(self, m):
        return self.modes[m - 1]

    def evaluate(self, m, points):
        """psi_m at points of shape (n, d-1)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(pts.shape[0])
        for i, n in enumerate(self.mode(m).multi):
            out *= math.sqrt(2.0 / math.pi) * np.sin(n * pts[:, i])
        return out

    def retained(self, N, vartheta=0.5):
        return [m for m in self.modes if m.mu ** vartheta <= N]


def transverse_box_spectrum(d_minus_1, cutoff, cap=DEFAULT_MODE_CAP):
    """Enumerate mu = |n|^2 <= cutoff on (0, pi)^(d-1) with multiplicity."""
    d = int(d_minus_1)
    if d not in (1, 2, 3):
        raise DomainError("d_minus_1 must be 1, 2 or 3")
    if not cutoff > 1:
        raise DomainError("cutoff must exceed 1")
    R = math.sqrt(cutoff)
    est = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * R ** d / 2 ** d
    if est > 2 * cap:
        raise CapacityError(f"about {est:.3g} modes below cutoff exceed cap {cap}")
    nmax = int(math.floor(R))
    rows = []
    for multi in itertools.product(range(1, nmax + 1), repeat=d):
        mu = sum(n * n for n in multi)
        if mu <= cutoff:
            rows.append((mu, multi))
            if len(rows) > cap:
                raise CapacityError(f"mode count exceeds cap {cap}")
    rows.sort()
    modes = [TransverseMode(i + 1, multi, float(mu)) for i, (mu, multi) in enumerate(rows)]
    theta1 = d / 2.0
    mus = np.array([m.mu for m in modes])
    uniq, idx = np.unique(mus, return_index=True)
    counts = np.searchsorted(mus, uniq, side="right")
    kappa1 = float(np.max(counts / uniq ** theta1)) if uniq.size else 0.0
    return TransverseSpectrum(d, float(cutoff), modes, kappa1, theta1)
