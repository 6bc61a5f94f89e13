"""Elements of the observation space U2 and window quadrature."""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import ContractError, DegenerateWindowError

DEFAULT_WINDOW_POINTS = 1025


def check_window(a, b):
    a, b = float(a), float(b)
    if a == b:
        raise DegenerateWindowError(f"degenerate window ({a}, {b})")
    if not (0.0 <= a < b <= np.pi):
        raise ContractError(f"window must satisfy 0 <= a < b <= pi, got ({a}, {b})")
    return a, b


def window_nodes(a, b, n_points=DEFAULT_WINDOW_POINTS):
    a, b = check_window(a, b)
    return np.linspace(a, b, int(n_points))


# Gregory end weights (sixth order) for the first/last five nodes
_GREGORY = np.array([95.0 / 288.0, 317.0 / 240.0, 23.0 / 30.0, 793.0 / 720.0, 157.0 / 160.0])


def corrected_trapezoid(values, nodes):
    """Trapezoidal rule with Gregory end corrections on a uniform grid.

    The corrections cancel the Euler-Maclaurin boundary terms through
    ``h**5``, which matters because window integrals are not over a full
    period.  Grids with fewer than 10 nodes fall back to the plain rule.
    """
    f = np.asarray(values, dtype=float)
    x = np.asarray(nodes, dtype=float)
    if f.size < 10:
        return float(trapezoid(f, x))
    return float(window_weights(x) @ f)


@dataclass(frozen=True, eq=False)
class ObservationVector:
    """An element of U2: a scalar (boundary flux) or a function on (a, b).

    Attributes
    ----------
    kind : {"scalar", "window"}
    value : float
        Scalar value (``kind == "scalar"``).
    values, nodes : ndarray
        Samples on a uniform window grid (``kind == "window"``).
    window : tuple or None
    """

    kind: str
    value: float = 0.0
    values: np.ndarray | None = field(default=None, repr=False)
    nodes: np.ndarray | None = field(default=None, repr=False)
    window: tuple | None = None

    @classmethod
    def scalar(cls, value):
        return cls("scalar", value=float(value))

    @classmethod
    def on_window(cls, values, nodes, window):
        values = np.asarray(values, dtype=float)
        nodes = np.asarray(nodes, dtype=float)
        if values.shape != nodes.shape:
            raise ContractError("window samples and nodes differ in shape")
        values.setflags(write=False)
        nodes.setflags(write=False)
        return cls("window", values=values, nodes=nodes, window=tuple(map(float, window)))

    def norm(self):
        return float(np.sqrt(inner(self, self)))

    def scaled(self, s):
        if self.kind == "scalar":
            return ObservationVector.scalar(s * self.value)
        return ObservationVector.on_window(s * self.values, self.nodes, self.window)


def inner(x, y):
    """Inner product of two observation vectors of the same kind."""
    if x.kind != y.kind:
        raise ContractError(f"cannot pair a {x.kind} observation with a {y.kind} one")
    if x.kind == "scalar":
        return x.value * y.value
    if x.window != y.window or x.nodes.shape != y.nodes.shape or not (
            x.nodes is y.nodes or np.array_equal(x.nodes, y.nodes)):
        raise ContractError("windowed observations live on different grids")
    return corrected_trapezoid(x.values * y.values, x.nodes)


def window_weights(x):
    """Quadrature weights of :func:`corrected_trapezoid` on the uniform nodes ``x``."""
    n_pts = x.size
    h = (x[-1] - x[0]) / (n_pts - 1)
    w = np.full(n_pts, h)
    if n_pts < 10:
        w[0] = w[-1] = 0.5 * h
        return w
    w[:5] = h * _GREGORY
    w[-5:] = h * _GREGORY[::-1]
    return w


def cross_gram(obs_r, obs_c):
    """Matrix of inner products ``<obs_r[i], obs_c[j]>``."""
    obs_r, obs_c = list(obs_r), list(obs_c)
    if not obs_r or not obs_c:
        return np.zeros((len(obs_r), len(obs_c)))
    kinds = {o.kind for o in obs_r + obs_c}
    if len(kinds) > 1:
        raise ContractError("mixed observation kinds")
    if obs_r[0].kind == "scalar":
        return np.outer([o.value for o in obs_r], [o.value for o in obs_c])
    ref = obs_r[0]
    for o in obs_r + obs_c:
        if o.window != ref.window or not np.array_equal(o.nodes, ref.nodes):
            raise ContractError("windowed observations live on different grids")
    w = window_weights(ref.nodes)
    A = np.vstack([o.values for o in obs_r])
    B = np.vstack([o.values for o in obs_c])
    return (A * w) @ B.T


def gram(obs):
    """Gram matrix of a list of observation vectors."""
    G = cross_gram(obs, obs)
    return 0.5 * (G + G.T)
