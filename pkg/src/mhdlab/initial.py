"""Divergence-free initial data with prescribed decay along the R-axes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid
from .energy import DEFAULT_CUTOFF, EnergyDensity, j_functional, rho
from .grid import DomainSpec
from .solver import FieldState

FAMILIES = ("cl_power", "hxy_log", "gaussian_bump", "alfven_linear")
ENVELOPE_RADII = (4.0, 8.0, 16.0)


class EnvelopeError(ValueError):
    """Generated data does not follow the requested decay profile."""


@dataclass(frozen=True)
class InitialParams:
    amplitude: float = 1e-2
    delta: float = 2.0
    big_r: float = 100.0
    sigma: float = 1.0
    seed: int = 0


def _check(family: str, p: InitialParams) -> None:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    if family == "cl_power" and not p.delta > 1:
        raise ValueError("cl_power needs delta > 1")
    if family == "hxy_log" and p.big_r < 100:
        raise ValueError("hxy_log needs big_r >= 100")
    if p.sigma <= 0:
        raise ValueError("sigma must be positive")


def profile(family: str, r: np.ndarray, p: InitialParams) -> np.ndarray:
    """Radial decay profile of |z| along the R-axes, equal to 1 at r = 0."""
    if family == "cl_power":
        return (1.0 + r**2) ** (-p.delta / 2)
    if family == "hxy_log":
        R2 = p.big_r**2
        f = lambda s: (R2 + s) ** -0.5 * np.log(R2 + s) ** -2.0
        return f(r**2) / f(0.0)
    return np.exp(-(r**2) / (2 * p.sigma**2))


def taper(domain: DomainSpec, r: np.ndarray) -> np.ndarray:
    """Steep cut-off keeping the data clear of the box seam on R-axes."""
    scale = 0.38 * min(domain.L[: domain.k])
    return np.exp(-((r / scale) ** 16))


def _radius(domain: DomainSpec) -> np.ndarray:
    X = grid.mesh(domain)
    return np.sqrt(sum(X[a] ** 2 for a in range(domain.k)))


def _component(domain: DomainSpec, family: str, p: InitialParams, rng: np.random.Generator) -> np.ndarray:
    """One Elsasser fluctuation: transverse shear plus a rotational part."""
    X = grid.mesh(domain)
    r = _radius(domain)
    env = profile(family, r, p)
    if family in ("cl_power", "hxy_log"):
        env = env * taper(domain, r)
    u = np.zeros((domain.d,) + domain.shape)
    phase = rng.uniform(0, 2 * np.pi)
    if domain.k < domain.d:
        # shear along a torus direction; depends on R-coordinates only
        u[-1] += env
        # transverse wave riding on the same envelope
        y = X[domain.k]
        psi = 0.5 * env * np.cos(y + phase)
        u[0] += grid.derivative(domain, psi, domain.k)
        u[domain.k] -= grid.derivative(domain, psi, 0)
    else:
        # rotation f(r) (x_1, -x_0): divergence-free for any radial f
        f = env / np.sqrt(1.0 + r**2)
        u[0] += f * X[1]
        u[1] -= f * X[0]
    return grid.leray_project(domain, u)


def generate_initial(family: str, domain: DomainSpec, params: InitialParams | None = None, *,
                     mu: float = 0.0, check_envelope: bool = True, N: int = 3) -> FieldState:
    p = params or InitialParams()
    _check(family, p)
    rng = np.random.default_rng(p.seed)
    if p.amplitude == 0:
        return FieldState.zeros(domain, mu)
    zp = p.amplitude * _component(domain, family, p, rng)
    if family == "alfven_linear":
        zm = np.zeros_like(zp)
    else:
        zm = p.amplitude * _component(domain, family, p, rng)
    state = FieldState(domain, 0.0, zp, zm, mu)
    if check_envelope and family in ("cl_power", "hxy_log"):
        envelope_check(state, family, p, N=N)
    return state


def envelope_ratios(state: FieldState, family: str, p: InitialParams, N: int = 3) -> dict[float, float]:
    """Measured rho+ decay between |x| = 4 and |x| = 8, 16 over the profile's decay.

    Values near 1 mean the envelope follows the profile; the ratios use
    rho+ on the axis-0 line through the origin, averaged over +x and -x.
    """
    dom = state.domain
    dens = rho(state, N, DEFAULT_CUTOFF)
    x = grid.coordinates(dom)[0]
    centre = (slice(None),) + tuple(m // 2 for m in dom.n[1:])
    line = dens.rho_p[centre]

    def sample(s):
        return 0.5 * (np.interp(s, x, line) + np.interp(-s, x, line))

    base = sample(ENVELOPE_RADII[0])
    pbase = profile(family, np.array(ENVELOPE_RADII[0]), p)
    out = {}
    for s in ENVELOPE_RADII[1:]:
        measured = sample(s) / base
        expected = profile(family, np.array(s), p) / pbase
        out[s] = float(measured / expected)
    return out


def envelope_check(state: FieldState, family: str, p: InitialParams, N: int = 3) -> None:
    ratios = envelope_ratios(state, family, p, N)
    bad = {s: v for s, v in ratios.items() if not 0.5 <= v <= 2.0}
    if bad:
        raise EnvelopeError(f"{family} envelope off by more than 2x at |x| = {sorted(bad)}: {bad}")


def auto_rescale(state: FieldState, eps1: float, *, N: int = 3, target: float = 0.9,
                 density: EnergyDensity | None = None) -> tuple[FieldState, float]:
    """Scale z+- so that max(J+, J-) = target * eps1; zero data is returned unchanged."""
    dens = density if density is not None else rho(state, N)
    jmax = max(j_functional(dens))
    if jmax == 0 or not math.isfinite(jmax):
        return state, 1.0
    lam = target * eps1 / jmax
    return state.scaled(lam), lam
