"""Pseudo-spectral integration of the Elsasser system around B0 = e_0.

With fluctuations ``z+ = v + b - B0`` and ``z- = v - b + B0``::

    d_t z+ = mu Lap z+ + d_0 z+ - (z- . grad) z+ - grad p
    d_t z- = mu Lap z- - d_0 z- - (z+ . grad) z- - grad p
    div z+ = div z- = 0

Diffusion and the +/-B0 drift are integrated exactly through an integrating
factor; the dealiased quadratic term and the pressure use explicit RK2
(Heun) in the integrating-factor variables.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from itertools import combinations_with_replacement
from typing import Iterable, Iterator

import numpy as np

from . import grid
from .grid import DomainSpec


class BlowUpError(FloatingPointError):
    """The solution left the representable / guarded range."""


class CFLError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FieldState:
    domain: DomainSpec
    t: float
    zp: np.ndarray
    zm: np.ndarray
    mu: float

    def __post_init__(self):
        want = (self.domain.d,) + self.domain.shape
        if self.zp.shape != want or self.zm.shape != want:
            raise ValueError(f"fields must have shape {want}")
        if self.mu < 0 or not math.isfinite(self.t) or self.t < 0:
            raise ValueError("need mu >= 0 and finite t >= 0")

    def scaled(self, lam: float) -> "FieldState":
        return replace(self, zp=lam * self.zp, zm=lam * self.zm)

    def at(self, t: float) -> "FieldState":
        return replace(self, t=float(t))

    @classmethod
    def zeros(cls, domain: DomainSpec, mu: float, t: float = 0.0) -> "FieldState":
        z = np.zeros((domain.d,) + domain.shape)
        return cls(domain, t, z, z.copy(), mu)


def background(domain: DomainSpec) -> np.ndarray:
    b0 = np.zeros((domain.d,) + (1,) * domain.d)
    b0[0] = 1.0
    return b0


def elsasser_from_vb(v: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(v, b) -> (z+, z-) with the B0 offsets removed."""
    d = v.shape[0]
    b0 = np.zeros((d,) + (1,) * (v.ndim - 1))
    b0[0] = 1.0
    return v + b - b0, v - b + b0


def vb_from_elsasser(zp: np.ndarray, zm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = zp.shape[0]
    b0 = np.zeros((d,) + (1,) * (zp.ndim - 1))
    b0[0] = 1.0
    return (zp + zm) / 2, (zp - zm) / 2 + b0


# ------------------------------------------------------------------ operators


class _Operators:
    """Spectral tables for one (domain, mu) pair."""

    def __init__(self, domain: DomainSpec, mu: float):
        self.domain = domain
        self.mu = mu
        self.k = grid.wavenumbers(domain)
        self.kodd = grid.odd_wavenumbers(domain)
        self.k2 = grid.k_squared(domain)
        self.inv_k2 = np.zeros_like(self.k2)
        np.divide(1.0, self.k2, out=self.inv_k2, where=self.k2 > 0)
        self.mask = grid.dealias_mask(domain)
        drift = 1j * self.kodd[0]
        # z+ drifts with +d_0, z- with -d_0
        self.lam_p = -mu * self.k2 + drift
        self.lam_m = -mu * self.k2 - drift

    def product_hat(self, zp: np.ndarray, zm: np.ndarray) -> np.ndarray:
        """Dealiased transform of T[j, i] = zm^j zp^i."""
        d = self.domain.d
        prod = zm[:, None] * zp[None, :]
        return grid.fft(prod.reshape((d * d,) + self.domain.shape), self.domain).reshape(
            (d, d) + self.domain.rfft_shape) * self.mask

    def pressure_hat(self, T: np.ndarray) -> np.ndarray:
        # -Lap p = d_i d_j (zm^j zp^i)  =>  p_hat = -k_i k_j T[j,i] / |k|^2
        s = sum(self.k[i] * self.k[j] * T[j, i] for i in range(self.domain.d)
                for j in range(self.domain.d))
        return -s * self.inv_k2

    def nonlinear_hat(self, zp: np.ndarray, zm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nonlinear + pressure tendencies (spectral) and the pressure."""
        d = self.domain.d
        T = self.product_hat(zp, zm)
        p_hat = self.pressure_hat(T)
        # N+^i = -d_j(zm^j zp^i) ; N-^i = -d_j(zp^j zm^i) = -d_j T[i, j]
        n_p = np.stack([-sum(1j * self.kodd[j] * T[j, i] for j in range(d)) for i in range(d)])
        n_m = np.stack([-sum(1j * self.kodd[j] * T[i, j] for j in range(d)) for i in range(d)])
        grad_p = np.stack([1j * self.kodd[i] * p_hat for i in range(d)])
        return n_p - grad_p, n_m - grad_p, p_hat


@functools.lru_cache(maxsize=16)
def _operators(domain: DomainSpec, mu: float) -> _Operators:
    return _Operators(domain, mu)


def pressure(domain: DomainSpec, zp: np.ndarray, zm: np.ndarray) -> np.ndarray:
    """Zero-mean pressure solving -Lap p = d_i d_j (z+^j z-^i)."""
    ops = _operators(domain, 0.0)
    return grid.ifft(ops.pressure_hat(ops.product_hat(zp, zm)), domain)


def rhs(state: FieldState) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives (dz+, dz-) of the Elsasser system."""
    domain = state.domain
    ops = _operators(domain, state.mu)
    n_p, n_m, _ = ops.nonlinear_hat(state.zp, state.zm)
    dp = ops.lam_p * grid.fft(state.zp, domain) + n_p
    dm = ops.lam_m * grid.fft(state.zm, domain) + n_m
    return (grid.ifft(grid.project_hat(domain, dp), domain),
            grid.ifft(grid.project_hat(domain, dm), domain))


def max_speed(state: FieldState) -> float:
    sp = np.sqrt(np.sum(state.zp**2, axis=0)).max()
    sm = np.sqrt(np.sum(state.zm**2, axis=0)).max()
    return float(max(sp, sm))


def cfl_limit(state: FieldState) -> float:
    return 0.5 * min(state.domain.h) / (1.0 + max_speed(state))


def step(state: FieldState, dt: float) -> FieldState:
    """One integrating-factor RK2 step of length ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    limit = cfl_limit(state)
    if dt > limit * (1 + 1e-12):
        raise CFLError(f"dt={dt:.4g} exceeds the advective limit {limit:.4g}")
    domain = state.domain
    ops = _operators(domain, state.mu)
    ep = np.exp(ops.lam_p * dt)
    em = np.exp(ops.lam_m * dt)
    ap = grid.fft(state.zp, domain)
    am = grid.fft(state.zm, domain)
    np0, nm0, _ = ops.nonlinear_hat(state.zp, state.zm)
    bp = ep * (ap + dt * np0)
    bm = em * (am + dt * nm0)
    np1, nm1, _ = ops.nonlinear_hat(grid.ifft(bp, domain), grid.ifft(bm, domain))
    cp = ep * ap + 0.5 * dt * (ep * np0 + np1)
    cm = em * am + 0.5 * dt * (em * nm0 + nm1)
    zp = grid.ifft(cp * grid.nyquist_mask(domain), domain)
    zm = grid.ifft(cm * grid.nyquist_mask(domain), domain)
    if not (np.isfinite(zp).all() and np.isfinite(zm).all()):
        raise BlowUpError(f"non-finite values after step at t={state.t + dt:.6g}")
    return FieldState(domain, state.t + dt, zp, zm, state.mu)


def linear_evolve(state: FieldState, t: float) -> FieldState:
    """Exact solution of the linearised system (no coupling) after time t."""
    domain = state.domain
    ops = _operators(domain, state.mu)
    zp = grid.ifft(np.exp(ops.lam_p * t) * grid.fft(state.zp, domain), domain)
    zm = grid.ifft(np.exp(ops.lam_m * t) * grid.fft(state.zm, domain), domain)
    return FieldState(domain, state.t + t, zp, zm, state.mu)


def integrate(state: FieldState, times: Iterable[float], dt: float, *,
              blowup_factor: float = 1e3, N: int = 3) -> Iterator[FieldState]:
    """Advance ``state`` and yield it at each requested output time.

    Steps never exceed ``dt``; the last step before an output time is
    shortened to land on it.  The run aborts with :class:`BlowUpError` when
    the H^N norm exceeds ``blowup_factor`` times its initial value.
    """
    hn0 = max(hn_norm(state, N))
    current = state
    for target in times:
        if target < current.t - 1e-12:
            raise ValueError("output times must be non-decreasing")
        while current.t < target - 1e-12:
            h = min(dt, target - current.t)
            current = step(current, h)
        current = current.at(target) if abs(current.t - target) < 1e-12 else current
        if hn0 > 0 and max(hn_norm(current, N)) > blowup_factor * hn0:
            raise BlowUpError(f"H^{N} norm grew beyond {blowup_factor:g}x at t={current.t:.4g}")
        yield current


# ----------------------------------------------------------------- H^N norms


def multi_indices(d: int, order: int) -> list[tuple[int, ...]]:
    """All a in N^d with |a| = order, as exponent tuples."""
    out = []
    for combo in combinations_with_replacement(range(d), order):
        a = [0] * d
        for axis in combo:
            a[axis] += 1
        out.append(tuple(a))
    return out


def multiplicity(a: tuple[int, ...], convention: str = "tensor") -> float:
    """Weight of d^a inside |grad^k z|^2: k!/a! ("tensor") or 1 ("index")."""
    if convention == "index":
        return 1.0
    if convention != "tensor":
        raise ValueError(f"unknown multiplicity convention {convention!r}")
    return math.factorial(sum(a)) / math.prod(math.factorial(x) for x in a)


def _spectral_energy(domain: DomainSpec, u: np.ndarray, weight: np.ndarray) -> float:
    uhat = grid.fft(u, domain)
    power = np.abs(uhat) ** 2
    # rfft keeps half of the last axis: interior columns stand for two modes
    m = domain.n[-1]
    col = np.full(domain.rfft_shape[-1], 2.0)
    col[0] = 1.0
    if m % 2 == 0:
        col[-1] = 1.0
    total = np.sum(power * weight * col)
    return float(total) * domain.cell_volume / math.prod(domain.n)


def hn_norm(state: FieldState, N: int, convention: str = "tensor") -> tuple[float, float]:
    """(||z+||_{H^N}, ||z-||_{H^N}) computed in Fourier space."""
    if N < 0:
        raise ValueError("N must be >= 0")
    domain = state.domain
    ks = grid.wavenumbers(domain)
    if convention == "tensor":
        k2 = grid.k_squared(domain)
        weight = sum(k2**j for j in range(N + 1))
    else:
        weight = sum(math.prod(ks[i] ** (2 * a[i]) for i in range(domain.d))
                     for order in range(N + 1) for a in multi_indices(domain.d, order))
    return (math.sqrt(_spectral_energy(domain, state.zp, weight)),
            math.sqrt(_spectral_energy(domain, state.zm, weight)))


def energy(state: FieldState) -> float:
    """Grid L^2 energy ||z+||^2 + ||z-||^2."""
    return grid.l2_inner(state.domain, state.zp, state.zp) + grid.l2_inner(state.domain, state.zm, state.zm)
