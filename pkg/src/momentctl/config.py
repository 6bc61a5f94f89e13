"""Experiment configuration (INI file, one section per concern).

Every option has a default; see ``docs/config.md`` for the full list.  The
resolved configuration is hashed (SHA-256 over canonical JSON) and the
hash is embedded in every artifact.
"""

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ContractError
from .precision import PRECISIONS
from .systems import SYSTEM_KINDS

__all__ = ["ExperimentConfig", "load_config", "parse_box", "parse_floats"]


def parse_floats(text):
    text = str(text).strip()
    if not text:
        return []
    try:
        return [float(_pi(x)) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ContractError(f"cannot parse number list {text!r}") from exc


def _pi(x):
    """Accept ``pi``, ``pi/2``, ``2*pi/3`` style literals."""
    x = x.strip().lower().replace(" ", "")
    if "pi" not in x:
        return float(x)
    num, _, den = x.partition("/")
    coef = num.replace("pi", "").rstrip("*") or "1"
    val = float(coef) * math.pi
    return val / float(den) if den else val


def parse_ints(text):
    text = str(text).strip()
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def parse_box(text):
    """``"0.3,1.1"`` or ``"0.3,1.1; 0.2,0.9"`` -> tuple of intervals."""
    axes = [a for a in str(text).split(";") if a.strip()]
    box = []
    for a in axes:
        v = parse_floats(a)
        if len(v) != 2:
            raise ContractError(f"interval needs two numbers, got {a!r}")
        box.append((v[0], v[1]))
    if not box:
        raise ContractError("empty window")
    return tuple(box)


@dataclass
class ExperimentConfig:
    system: str = "boundary"
    potential: str = "cos2"
    grid_size: int = 1024
    dim: int = 1
    omega: tuple = ((0.3, 1.1),)
    window: tuple = (0.0, math.pi / 3)
    x0: float = 1.0
    b1: float = 1.0
    b2: float = 1.0
    T: float = 1.0
    T_list: tuple = (1.0, 0.5, 0.25, 0.125)
    N: float = 4.0
    N_sim: float = 0.0
    K: int = 200
    K_max: int = 0
    vartheta: float = 0.5
    eps: float = 0.0
    precision: str = "double"
    guard: float = 1e12
    dps: int = 60
    tol_biortho: float = 1e-8
    tol_moment: float = 1e-6
    y0: str = "inverse_lambda"
    seed: int = 0
    workers: int = 1
    tpn_alpha: float = 1.0
    tpn_beta: float = 0.0
    tpn_samples: int = 500
    tpn_N: tuple = (1, 2, 3, 4, 5)
    const_N: tuple = tuple(range(1, 13))
    class_p: int = 2
    class_rho: float = 3.0
    class_theta: float = 0.5
    out: str = "out"
    source: str = field(default="", compare=False)

    def validate(self):
        if self.system not in SYSTEM_KINDS:
            raise ContractError(f"system must be one of {SYSTEM_KINDS}, got {self.system!r}")
        if self.precision not in PRECISIONS:
            raise ContractError(f"precision must be one of {PRECISIONS}")
        if not self.T > 0 or any(t <= 0 for t in self.T_list):
            raise ContractError("time horizons must be positive")
        if self.N < 1:
            raise ContractError("N must be >= 1")
        if self.N_sim and self.N_sim < self.N:
            raise ContractError("N_sim must be >= N")
        if not 0 < self.vartheta < 1:
            raise ContractError("vartheta must lie in (0, 1)")
        if self.dim not in (1, 2, 3):
            raise ContractError("dim (transverse dimension) must be 1, 2 or 3")
        if len(self.omega) != self.dim:
            raise ContractError("omega must have one interval per transverse axis")
        for a, b in self.omega:
            if not 0 <= a < b <= math.pi:
                raise ContractError(f"invalid omega interval ({a}, {b})")
        a, b = self.window
        if not 0 <= a < b <= math.pi:
            raise ContractError(f"invalid observation window ({a}, {b})")
        if not 0 < self.x0 < math.pi:
            raise ContractError("x0 must lie in (0, pi)")
        if self.workers < 1 or self.K < 1 or self.tpn_samples < 1:
            raise ContractError("workers, K and tpn.samples must be positive")
        if self.grid_size < 64:
            raise ContractError("grid_size must be >= 64")
        if self.system in ("boundary", "internal", "dolecki") and self.dim != 1:
            raise ContractError(f"the {self.system} system uses one transverse dimension")
        return self

    @property
    def n_sim(self):
        return self.N_sim if self.N_sim else 2 * self.N

    def canonical(self):
        d = asdict(self)
        d.pop("source")
        d.pop("out")
        d.pop("workers")  # parallelism does not change results
        return json.dumps(d, sort_keys=True, default=list)

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def system_kwargs(self):
        return {"x0": self.x0, "q": self.potential, "omega": self.omega,
                "b_factors": (self.b1, self.b2), "vartheta": self.vartheta,
                "grid_size": self.grid_size, "window": self.window, "dim": self.dim}


_SCHEMA = {
    # section: {key: (attribute, parser)}
    "run": {"system": ("system", str), "precision": ("precision", str), "seed": ("seed", int),
            "workers": ("workers", int), "out": ("out", str), "guard": ("guard", float),
            "dps": ("dps", int)},
    "potential": {"spec": ("potential", str), "grid_size": ("grid_size", int)},
    "domain": {"dim": ("dim", int), "omega": ("omega", parse_box),
               "window": ("window", lambda s: parse_box(s)[0]), "x0": ("x0", lambda s: parse_floats(s)[0])},
    "control": {"b1": ("b1", float), "b2": ("b2", float), "y0": ("y0", str)},
    "time": {"T": ("T", float), "T_list": ("T_list", lambda s: tuple(parse_floats(s))),
             "eps": ("eps", float)},
    "truncation": {"N": ("N", float), "N_sim": ("N_sim", float), "K": ("K", int),
                   "K_max": ("K_max", int), "vartheta": ("vartheta", float)},
    "tolerances": {"biortho": ("tol_biortho", float), "moment": ("tol_moment", float)},
    "tpn": {"alpha": ("tpn_alpha", float), "beta": ("tpn_beta", float),
            "samples": ("tpn_samples", int), "N": ("tpn_N", lambda s: tuple(parse_ints(s)))},
    "spectral_const": {"N": ("const_N", lambda s: tuple(parse_ints(s)))},
    "classes": {"p": ("class_p", int), "rho": ("class_rho", float),
                "theta": ("class_theta", float)},
}


def load_config(path=None, overrides=None):
    """Read an INI file (or defaults when ``path`` is None) and validate."""
    cfg = ExperimentConfig()
    if path is not None:
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"))
        cp.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ContractError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ContractError(f"malformed config {path}: {exc}") from exc
        for section in cp.sections():
            if section not in _SCHEMA:
                raise ContractError(f"unknown config section [{section}]")
            for key, raw in cp.items(section):
                if key not in _SCHEMA[section]:
                    raise ContractError(f"unknown key {key!r} in [{section}]")
                attr, parse = _SCHEMA[section][key]
                try:
                    setattr(cfg, attr, parse(raw))
                except (ValueError, IndexError) as exc:
                    raise ContractError(f"bad value for [{section}] {key}: {raw!r}") from exc
        cfg.source = str(path)
    for k, v in (overrides or {}).items():
        if v is not None:
            setattr(cfg, k, v)
    if cfg.dim != len(cfg.omega) and "omega" not in _explicit(path):
        cfg.omega = tuple(cfg.omega[:1]) * cfg.dim
    return cfg.validate()


def _explicit(path):
    if path is None:
        return set()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"))
    cp.optionxform = str
    cp.read(path, encoding="utf-8")
    return {k for s in cp.sections() for k in cp[s]}
