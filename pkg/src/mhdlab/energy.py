"""Local energy densities rho+-, the J functional, F(t, X) and the covering bound."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import grid, solver
from .grid import DomainSpec
from .solver import FieldState, multi_indices, multiplicity


def theta(r):
    """Cut-off: 1 on [0, 1], cos^2(pi (r - 1) / 2) on [1, 2], 0 beyond."""
    r = np.asarray(r, dtype=float)
    ramp = np.cos(0.5 * np.pi * (np.clip(r, 1.0, 2.0) - 1.0)) ** 2
    return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, 0.0, ramp))


def theta_prime(r):
    r = np.asarray(r, dtype=float)
    inside = (r > 1.0) & (r < 2.0)
    return np.where(inside, -0.5 * np.pi * np.sin(np.pi * (np.clip(r, 1.0, 2.0) - 1.0)), 0.0)


@dataclass(frozen=True)
class CutoffProfile:
    fn: Callable = theta
    dfn: Callable = theta_prime
    support: float = 2.0
    C_theta: float = math.pi**2

    @classmethod
    def measured(cls, step: float = 1e-4) -> "CutoffProfile":
        """Default profile with C_theta taken as max |theta'|^2 / theta on a dense sample."""
        r = np.arange(0.0, 2.0 + step, step)
        th = theta(r)
        pos = th > 0
        c = float(np.max(theta_prime(r[pos]) ** 2 / th[pos]))
        return cls(C_theta=c)


DEFAULT_CUTOFF = CutoffProfile()


@functools.lru_cache(maxsize=16)
def _cutoff_kernel(domain: DomainSpec, cutoff: CutoffProfile) -> grid.RadialKernel:
    return grid.sample_radial(domain, cutoff.fn, reach=cutoff.support, name="theta",
                              warn_fraction=None, tail=0.0)


def gradient_powers(domain: DomainSpec, u: np.ndarray, N: int,
                    convention: str = "tensor") -> np.ndarray:
    """Pointwise |grad^k u|^2 for k = 0..N, stacked along a new first axis.

    ``u`` is a scalar field or a vector field with a leading component axis.
    """
    uhat = grid.fft(u, domain)
    ks = grid.wavenumbers(domain)
    kodd = grid.odd_wavenumbers(domain)
    comp_axes = tuple(range(u.ndim - domain.d))
    out = np.empty((N + 1,) + domain.shape)
    out[0] = np.sum(u**2, axis=comp_axes) if comp_axes else u**2
    for order in range(1, N + 1):
        total = np.zeros(domain.shape)
        for a in multi_indices(domain.d, order):
            mult = 1.0
            for axis, e in enumerate(a):
                if e:
                    kk = kodd[axis] if e % 2 else ks[axis]
                    mult = mult * (1j * kk) ** e
            da = grid.ifft(mult * uhat, domain)
            sq = np.sum(da**2, axis=comp_axes) if comp_axes else da**2
            total += multiplicity(a, convention) * sq
        out[order] = total
    return out


def _sqrt_clip(q: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(q, 0.0))


def rho_squared(domain: DomainSpec, u: np.ndarray, N: int, cutoff: CutoffProfile = DEFAULT_CUTOFF,
                convention: str = "tensor") -> np.ndarray:
    """theta-weighted local H^N energy: sum_k int |grad^k u|^2(Y) theta(|X - Y|) dY."""
    dens = gradient_powers(domain, u, N, convention).sum(axis=0)
    return grid.periodic_convolve(dens, _cutoff_kernel(domain, cutoff))


@dataclass(frozen=True, eq=False)
class EnergyDensity:
    domain: DomainSpec
    rho_p: np.ndarray
    rho_m: np.ndarray
    N: int

    def scaled(self, lam: float) -> "EnergyDensity":
        return EnergyDensity(self.domain, abs(lam) * self.rho_p, abs(lam) * self.rho_m, self.N)


def rho(state: FieldState, N: int, cutoff: CutoffProfile = DEFAULT_CUTOFF,
        convention: str = "tensor") -> EnergyDensity:
    """Local energy densities rho+ and rho- of a state."""
    d = state.domain

    def local(u):
        # rho is 1-homogeneous; normalising first keeps tiny and huge fields in range
        scale = float(np.max(np.abs(u))) if u.size else 0.0
        if scale == 0.0 or not np.isfinite(scale):
            return _sqrt_clip(rho_squared(d, u, N, cutoff, convention))
        return scale * _sqrt_clip(rho_squared(d, u / scale, N, cutoff, convention))

    return EnergyDensity(d, local(state.zp), local(state.zm), N)


def line_sup(domain: DomainSpec, f: np.ndarray) -> np.ndarray:
    """Maximum of ``f`` over all coordinates except axis 0."""
    return f.reshape(domain.n[0], -1).max(axis=1)


def j_functional(density: EnergyDensity) -> tuple[float, float]:
    """J = sum over axis-0 slices of (max over the slice of rho) * dx_0."""
    dom = density.domain
    h0 = dom.h[0]
    return (float(line_sup(dom, density.rho_p).sum() * h0),
            float(line_sup(dom, density.rho_m).sum() * h0))


def _ball_norms(domain: DomainSpec, squares: np.ndarray, radius: float) -> np.ndarray:
    return _sqrt_clip(grid.ball_sum(squares, domain, radius))


def f_pairs(N: int) -> list[tuple[int, int]]:
    """Ordered derivative-order pairs (k, j) with k + j <= N + 1 and k, j <= N."""
    return [(k, j) for k in range(N + 1) for j in range(N + 1) if k + j <= N + 1]


@dataclass(frozen=True, eq=False)
class ForcingField:
    product: np.ndarray
    pressure: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.product + self.pressure


def f_components(state: FieldState, N: int, convention: str = "tensor") -> ForcingField:
    dom = state.domain
    mp = _sqrt_clip(gradient_powers(dom, state.zp, N, convention))
    mm = _sqrt_clip(gradient_powers(dom, state.zm, N, convention))
    pairs = f_pairs(N)
    sq = np.stack([(mp[k] * mm[j]) ** 2 for k, j in pairs])
    product = _ball_norms(dom, sq, 2.0).sum(axis=0)
    p = solver.pressure(dom, state.zp, state.zm)
    pp = gradient_powers(dom, p, N + 1, convention)[1:]
    press = _ball_norms(dom, pp, 2.0).sum(axis=0)
    return ForcingField(product, press)


def f_direct(state: FieldState, N: int, convention: str = "tensor") -> np.ndarray:
    """F(X): ball-L^2 norms of derivative products plus pressure derivatives."""
    return f_components(state, N, convention).total


@dataclass(frozen=True, eq=False)
class CoveringResult:
    lhs: np.ndarray
    rhs: np.ndarray
    c_measured: float
    c_bound: float

    @property
    def ok(self) -> bool:
        return self.c_measured <= self.c_bound


def covering_constant(d: int) -> float:
    """Constant 2^d / omega_d from the covering argument."""
    return 2.0**d / grid.ball_volume(d)


def covering_check(domain: DomainSpec, f: np.ndarray, *, slack: float = 0.05) -> CoveringResult:
    """Compare ||f||_{B(X,2)} with int_{B(X,3)} ||f||_{B(Y,1/2)} dY on the grid.

    ``c_bound`` is the proof constant enlarged by ``slack`` for grid
    quadrature of the sharp balls.
    """
    sq = f**2
    lhs = _ball_norms(domain, sq, 2.0)
    inner = _ball_norms(domain, sq, 0.5)
    rhs = grid.ball_sum(inner, domain, 3.0)
    rmax = float(np.max(rhs)) if rhs.size else 0.0
    sel = rhs > 1e-14 * rmax if rmax > 0 else np.zeros(rhs.shape, bool)
    c = float(np.max(lhs[sel] / rhs[sel])) if sel.any() else 0.0
    return CoveringResult(lhs, rhs, c, covering_constant(domain.d) * (1 + slack))
