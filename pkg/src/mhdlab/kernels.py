"""The algebraic kernel N1(X) = 1 / (1 + |X|^(d+1)) and the measured constants."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import grid
from .grid import DomainSpec


def n1_radial(r, d: int):
    r = np.asarray(r, dtype=float)
    return 1.0 / (1.0 + r ** (d + 1))


def n1_eval(X) -> np.ndarray | float:
    """N1 at points ``X`` of shape (..., d)."""
    X = np.asarray(X, dtype=float)
    d = X.shape[-1]
    out = n1_radial(np.linalg.norm(X, axis=-1), d)
    return float(out) if out.ndim == 0 else out


def n1_l1_norm(d: int) -> float:
    """Closed form of ||N1||_{L^1(R^d)} for d = 2, 3."""
    if d == 2:
        return 4 * math.pi**2 / (3 * math.sqrt(3))
    if d == 3:
        return math.sqrt(2) * math.pi**2
    raise ValueError("closed form only for d in {2, 3}")


def default_reach(domain: DomainSpec) -> float:
    return 1.5 * max(domain.L[: domain.k])


@functools.lru_cache(maxsize=16)
def n1_kernel(domain: DomainSpec, reach: float | None = None) -> grid.RadialKernel:
    """N1 sampled on the grid and periodised out to ``reach``."""
    reach = default_reach(domain) if reach is None else reach
    d = domain.d
    return grid.sample_radial(domain, lambda r: n1_radial(r, d), reach=reach, name="N1")


def convolve_n1(f: np.ndarray, domain: DomainSpec) -> np.ndarray:
    return grid.periodic_convolve(f, n1_kernel(domain))


class KernelRatioError(ArithmeticError):
    pass


@dataclass(frozen=True)
class C0Estimate:
    value: float
    raw: float
    self_conv_max: float
    self_conv_min: float
    rho_ratio: float
    l1_mass: float
    tail_mass: float


def estimate_c0(domain: DomainSpec, density=None, *, margin: float = 1.05,
                floor: float = 1e-12) -> C0Estimate:
    """Smallest grid constant for the kernel comparability conditions.

    Covers C^-1 N1 <= N1*N1 <= C N1, rho(0) <= C rho(0)*N1 (when a density
    is given) and ||N1||_1 <= C; the result is enlarged by ``margin``.
    """
    K = n1_kernel(domain)
    conv = grid.periodic_convolve(K.values, K)
    if not np.all(np.isfinite(conv)) or np.min(conv) <= 0:
        raise KernelRatioError("N1*N1 not positive on the grid; box too small or kernel truncated")
    ratio = conv / K.values
    rmax, rmin = float(ratio.max()), float(ratio.min())
    rho_ratio = 0.0
    if density is not None:
        for r in (density.rho_p, density.rho_m):
            top = float(np.max(r))
            if top <= 0:
                continue
            smooth = grid.periodic_convolve(r, K)
            sel = r > floor * top
            if np.any(smooth[sel] <= 0):
                raise KernelRatioError("rho(0)*N1 vanishes where rho(0) does not")
            rho_ratio = max(rho_ratio, float(np.max(r[sel] / smooth[sel])))
    raw = max(rmax, 1.0 / rmin, rho_ratio, K.mass)
    return C0Estimate(raw * margin, raw, rmax, rmin, rho_ratio, K.mass, K.tail)


def min_max_split_check(sample_count: int, d: int = 2, *, radius: float = 200.0,
                        rng: np.random.Generator | None = None) -> float:
    """Max of min(N1(Y), N1(X - Y)) / N1(X) over random pairs.

    Radii are drawn log-uniformly up to ``radius`` so that all scales are
    sampled.
    """
    rng = np.random.default_rng(0) if rng is None else rng

    def points(m):
        v = rng.standard_normal((m, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = np.exp(rng.uniform(np.log(1e-3), np.log(radius), size=(m, 1)))
        return v * r

    X = points(sample_count)
    Y = points(sample_count)
    # also probe Y near X / 2, where the ratio peaks
    half = sample_count // 4
    Y[:half] = X[:half] / 2 + 0.05 * rng.standard_normal((half, d))
    num = np.minimum(n1_eval(Y), n1_eval(X - Y))
    ratio = num / n1_eval(X)
    if not np.all(np.isfinite(ratio)):
        raise KernelRatioError("non-finite split ratio")
    return float(ratio.max())


# ------------------------------------------------------------------- ledger


@dataclass
class LedgerEntry:
    value: float
    provenance: str
    domain_hash: str


LEDGER_KEYS = ("c0", "c1", "c_theta", "eps0", "eps1", "c_f")


@dataclass
class ConstantsLedger:
    c0: LedgerEntry
    c1: LedgerEntry
    c_theta: LedgerEntry
    eps0: LedgerEntry
    eps1: LedgerEntry
    c_f: LedgerEntry
    extras: dict = field(default_factory=dict)

    @classmethod
    def derive(cls, *, c0: float, c1: float, c_theta: float, c_f: float, domain_hash: str,
               provenance: dict | None = None) -> "ConstantsLedger":
        """Build a ledger, deriving eps0 = 1/(2 C0^3 C1) and eps1 = eps0/(2 C0^2)."""
        prov = {"c0": "measured: kernel comparability on grid (+5%)",
                "c1": "measured: local energy constant x C_F",
                "c_theta": "measured: max |theta'|^2/theta",
                "c_f": "measured: max F / (rho+ rho-)*N1",
                **(provenance or {})}
        if not c0 > 1:
            raise ValueError(f"C0 must exceed 1, got {c0}")
        if not c1 > 0:
            raise ValueError(f"C1 must be positive, got {c1}")
        eps0 = 1.0 / (2 * c0**3 * c1)
        eps1 = eps0 / (2 * c0**2)
        mk = lambda key, v, p=None: LedgerEntry(float(v), p or prov[key], domain_hash)
        return cls(mk("c0", c0), mk("c1", c1), mk("c_theta", c_theta),
                   mk("eps0", eps0, "derived: 1/(2 C0^3 C1)"),
                   mk("eps1", eps1, "derived: eps0/(2 C0^2)"), mk("c_f", c_f))

    def check(self) -> None:
        vals = {k: getattr(self, k).value for k in LEDGER_KEYS}
        for k, v in vals.items():
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"ledger entry {k} must be finite and positive, got {v}")
        if vals["c0"] <= 1:
            raise ValueError("C0 must exceed 1")
        if not math.isclose(vals["eps0"], 1 / (2 * vals["c0"] ** 3 * vals["c1"]), rel_tol=1e-12):
            raise ValueError("eps0 inconsistent with C0, C1")
        if not math.isclose(vals["eps1"], vals["eps0"] / (2 * vals["c0"] ** 2), rel_tol=1e-12):
            raise ValueError("eps1 inconsistent with eps0, C0")

    def to_dict(self) -> dict:
        out = {k: asdict(getattr(self, k)) for k in LEDGER_KEYS}
        if self.extras:
            out["extras"] = self.extras
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantsLedger":
        entries = {k: LedgerEntry(**data[k]) for k in LEDGER_KEYS}
        return cls(**entries, extras=dict(data.get("extras", {})))

    @classmethod
    def from_json(cls, text: str) -> "ConstantsLedger":
        return cls.from_dict(json.loads(text))

    def value(self, key: str) -> float:
        return getattr(self, key).value
