"""Flat ``key = value`` run configuration with typed parsing."""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, fields

from . import grid
from .initial import FAMILIES, InitialParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    d: int = 2
    k: int = 1
    box_length: float = 16 * math.pi
    n: int = 256
    n_torus: int = 0  # 0: match the R-axis spacing
    mu: float = 0.05
    order_n: int = 3
    dt: float = 0.0  # 0: half the CFL limit, capped at 0.05
    t_end: float = 1.0
    samples: int = 10
    family: str = "gaussian_bump"
    amplitude: float = 1e-2
    delta: float = 2.0
    big_r: float = 100.0
    sigma: float = 1.0
    auto_small: bool = False
    seed: int = 0
    convention: str = "tensor"
    resolution_check: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        if self.convention not in ("tensor", "index"):
            raise ConfigError("convention must be 'tensor' or 'index'")
        if self.mu < 0 or self.t_end < 0 or self.dt < 0:
            raise ConfigError("mu, dt and t_end must be non-negative")
        if self.samples < 1 or self.order_n < 0:
            raise ConfigError("samples >= 1 and order_n >= 0 required")
        try:
            self.domain()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def domain(self) -> grid.DomainSpec:
        return grid.make_domain(self.d, self.k, self.box_length, self.n, self.n_torus or None)

    def initial_params(self) -> InitialParams:
        return InitialParams(self.amplitude, self.delta, self.big_r, self.sigma, self.seed)

    def sample_times(self) -> list[float]:
        return [self.t_end * i / self.samples for i in range(self.samples + 1)]

    def replace(self, **changes) -> "RunConfig":
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls().replace(**parse_pairs(text))


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return _pi_expr(raw) if "pi" in raw else float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None


def _pi_expr(raw: str) -> float:
    """Accept ``16pi``, ``16*pi`` or ``pi``."""
    s = raw.replace("*", "").strip()
    coef = s[: -2].strip() if s.endswith("pi") else None
    if coef is None:
        raise ValueError(raw)
    return (float(coef) if coef else 1.0) * math.pi


def parse_pairs(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _convert(key, raw)
    return out
