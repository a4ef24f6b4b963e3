"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored; dashes in keys are read as
underscores.  Lists are comma separated.  Unknown keys and invalid values
raise :class:`ConfigError` at parse time.
"""

from dataclasses import dataclass, fields, replace
import math

import numpy as np

from .errors import ConfigError
from .smoother import FAMILIES

__all__ = ["RunConfig", "parse_config", "load_config"]

COMMANDS = ("", "simulate", "fit", "predict", "benchmark")
# settings that change how a run executes but not what it computes; left out of output headers
EXECUTION_KEYS = ("out", "workers", "plot")
_CHOICES = {
    "command": COMMANDS,
    "kernel": FAMILIES,
    "norm": ("chebyshev", "euclidean"),
    "cov_scale": ("index", "none"),
    "phi_inner": ("auto", "H", "G"),
    "index_set": ("offset", "full"),
    "model": ("ssflrd", "sflrd"),
}


@dataclass(frozen=True)
class RunConfig:
    """Every setting of the command-line front end, with defaults.

    ``phi_inner = auto`` resolves to ``H`` for fitting and prediction and to
    ``G`` for the benchmark.  ``a`` is the decay of the simulated fields and
    of the covariance model used in the bandwidth criterion.
    """

    command: str = ""
    out: str = "out"
    curves: str = ""
    responses: str = ""
    fit: str = ""
    # simulation
    n: int = 5
    a: float = 3.0
    p: int = 366
    n_basis: int = 15
    noise_scale: float = 0.01
    seed: int = 0
    holdout: bool = False
    # benchmark
    ns: tuple = (5, 10)
    a_values: tuple = (0.1, 1.0, 3.0, 200.0)
    replications: int = 100
    workers: int = 1
    # tuning and smoothing
    psi_values: tuple = (1e-4, 1e-3, 1e-2, 1e-1)
    w_values: tuple = (1e-4, 1e-3, 1e-2, 1e-1)
    h_values: tuple = tuple(float(h) for h in np.linspace(0.1, 0.9, 8))
    kernel: str = "epanechnikov_radial"
    sigma2: float = 1.0
    norm: str = "chebyshev"
    cov_scale: str = "index"
    coord_factor: float = 1.0
    phi_inner: str = "auto"
    index_set: str = "offset"
    model: str = "ssflrd"
    plot: bool = False

    def __post_init__(self):
        for key, choices in _CHOICES.items():
            if getattr(self, key) not in choices:
                raise ConfigError(f"{key} must be one of {choices}, got {getattr(self, key)!r}")
        for key in ("n", "p", "replications", "workers"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.p < 3:
            raise ConfigError("p must be >= 3")
        if not 1 <= self.n_basis <= 15:
            raise ConfigError("n_basis must be in 1..15")
        if not 0 <= self.noise_scale <= 1:
            raise ConfigError("noise_scale must lie in [0, 1]")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for key in ("a", "sigma2", "coord_factor"):
            _positive(key, getattr(self, key))
        for key in ("a_values", "psi_values", "w_values"):
            if not getattr(self, key):
                raise ConfigError(f"{key} must not be empty")
            for v in getattr(self, key):
                _positive(key, v)
        for v in self.h_values:
            _positive("h_values", v)
        if not self.ns or any(v < 2 for v in self.ns):
            raise ConfigError("ns must list lattice sides >= 2")

    def resolved_phi_inner(self, command: str = None) -> str:
        if self.phi_inner != "auto":
            return self.phi_inner
        return "G" if (command or self.command) == "benchmark" else "H"

    def items(self, execution: bool = True):
        """``(key, text)`` pairs in declaration order.

        ``execution=False`` drops :data:`EXECUTION_KEYS`, as in output headers.
        """
        return [(f.name, _format(getattr(self, f.name))) for f in fields(self)
                if execution or f.name not in EXECUTION_KEYS]

    def to_dict(self, execution: bool = True) -> dict:
        out = {}
        for f in fields(self):
            if not execution and f.name in EXECUTION_KEYS:
                continue
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    def updated(self, **changes) -> "RunConfig":
        """Copy with ``changes`` applied; values may be given as text."""
        return replace(self, **{k: _convert(k, v) for k, v in changes.items()})


def _positive(key, v):
    if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
        raise ConfigError(f"{key} must be positive and finite, got {v!r}")


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_LISTS = {"ns"}


def _scalar(key, text, kind):
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.__name__}") from None
    return text


def _convert(key, value):
    if key not in _TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    kind = _TYPES[key]
    if not isinstance(value, str):
        if kind is tuple and not isinstance(value, tuple):
            value = tuple(value)
        return value
    text = value.strip()
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if kind is tuple:
        parts = [s.strip() for s in text.split(",") if s.strip()]
        return tuple(_scalar(key, s, int if key in _INT_LISTS else float) for s in parts)
    return _scalar(key, text, kind)


def parse_config(text: str, base: RunConfig = None, source: str = "<config>") -> RunConfig:
    """Parse configuration text on top of ``base`` (defaults if None)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            values[key] = _convert(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    try:
        return replace(base or RunConfig(), **values)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path, base: RunConfig = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base, source=str(path))
