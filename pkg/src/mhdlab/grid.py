"""Periodic-box grids, spectral calculus and radial-kernel convolution.

The unbounded factors of R^k x T^(d-k) are truncated to a periodic box of
length ``L`` (axes ``0 .. k-1``); the torus factors keep length ``2*pi``
(axes ``k .. d-1``).  Axis 0 carries the background field B0.

Fields are plain ``float64`` arrays: a scalar field has the grid shape
``domain.n``, a vector field has shape ``(d, *domain.n)``.  All FFTs go
through :mod:`scipy.fft`, whose worker count is capped by the
``MHDC_THREADS`` environment variable.
"""

from __future__ import annotations

import functools
import itertools
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy import integrate, ndimage

TORUS_LENGTH = 2.0 * np.pi
MIN_BOX_LENGTH = 8.0 * np.pi


class KernelTruncationWarning(UserWarning):
    """Raised when a sampled kernel drops a noticeable fraction of its mass."""


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("MHDC_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class DomainSpec:
    d: int
    k: int
    L: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"d must be 2 or 3, got {self.d}")
        if not 1 <= self.k <= self.d:
            raise ValueError(f"k must satisfy 1 <= k <= d, got k={self.k}, d={self.d}")
        if len(self.L) != self.d or len(self.n) != self.d:
            raise ValueError("L and n need one entry per axis")
        for m in self.n:
            if m < 8 or m % 2:
                raise ValueError(f"grid counts must be even and >= 8, got {m}")
        for i, length in enumerate(self.L):
            if i < self.k and length < MIN_BOX_LENGTH - 1e-12:
                raise ValueError(f"R-axis {i} length {length} below 8*pi")
            if i >= self.k and not math.isclose(length, TORUS_LENGTH):
                raise ValueError(f"torus axis {i} must have length 2*pi")

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(length / m for length, m in zip(self.L, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def volume(self) -> float:
        return float(np.prod(self.L))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.n)

    @property
    def rfft_shape(self) -> tuple[int, ...]:
        return tuple(self.n[:-1]) + (self.n[-1] // 2 + 1,)

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    def digest(self) -> str:
        """Short stable identifier used to tag measured constants."""
        import hashlib

        text = f"d={self.d};k={self.k};L={[repr(x) for x in self.L]};n={list(self.n)}"
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def make_domain(d: int, k: int, L: float, n: int, n_torus: int | None = None) -> DomainSpec:
    """Build a domain with ``n`` points on each R-axis of length ``L``.

    Torus axes get ``n_torus`` points; by default the smallest power of two
    (at least 8) giving a spacing no coarser than the R-axis spacing.
    """
    if n % 2:
        raise ValueError(f"n must be even, got {n}")
    if n_torus is None:
        target = n * TORUS_LENGTH / L
        n_torus = max(8, 1 << max(0, math.ceil(math.log2(target - 1e-9))))
    lengths = tuple(float(L) if i < k else TORUS_LENGTH for i in range(d))
    counts = tuple(int(n) if i < k else int(n_torus) for i in range(d))
    return DomainSpec(d=d, k=k, L=lengths, n=counts)


# ---------------------------------------------------------------- coordinates


@functools.lru_cache(maxsize=32)
def coordinates(domain: DomainSpec) -> tuple[np.ndarray, ...]:
    """1-D node coordinates per axis, centred: ``x_j = -L/2 + j h``."""
    return tuple(-length / 2 + np.arange(m) * length / m for length, m in zip(domain.L, domain.n))


def mesh(domain: DomainSpec) -> list[np.ndarray]:
    return np.meshgrid(*coordinates(domain), indexing="ij", sparse=True)


@functools.lru_cache(maxsize=32)
def _offsets(domain: DomainSpec) -> tuple[np.ndarray, ...]:
    # signed node offsets in FFT (wrapped) order, used for kernel sampling
    out = []
    for length, m in zip(domain.L, domain.n):
        j = np.arange(m)
        out.append(np.where(j < m // 2, j, j - m) * (length / m))
    return tuple(out)


@functools.lru_cache(maxsize=32)
def wavenumbers(domain: DomainSpec) -> tuple[np.ndarray, ...]:
    """Angular wavenumbers on the rfft layout, each broadcastable to it."""
    ks = []
    for i, (length, m) in enumerate(zip(domain.L, domain.n)):
        if i == domain.d - 1:
            kk = 2 * np.pi / length * np.arange(m // 2 + 1)
        else:
            kk = 2 * np.pi / length * sfft.fftfreq(m, 1.0 / m)
        shape = [1] * domain.d
        shape[i] = kk.size
        ks.append(kk.reshape(shape))
    return tuple(ks)


@functools.lru_cache(maxsize=32)
def odd_wavenumbers(domain: DomainSpec) -> tuple[np.ndarray, ...]:
    """Wavenumbers with the Nyquist entry zeroed (odd-order derivatives)."""
    out = []
    for i, (kk, m) in enumerate(zip(wavenumbers(domain), domain.n)):
        kk = kk.copy()
        flat = kk.reshape(-1)
        flat[m // 2] = 0.0
        out.append(kk)
    return tuple(out)


@functools.lru_cache(maxsize=32)
def nyquist_mask(domain: DomainSpec) -> np.ndarray:
    """True on modes carrying no Nyquist index along any axis."""
    mask = np.ones(domain.rfft_shape, dtype=bool)
    for i, m in enumerate(domain.n):
        idx = [slice(None)] * domain.d
        idx[i] = m // 2
        mask[tuple(idx)] = False
    return mask


@functools.lru_cache(maxsize=32)
def k_squared(domain: DomainSpec) -> np.ndarray:
    return sum(kk**2 for kk in wavenumbers(domain))


@functools.lru_cache(maxsize=32)
def dealias_mask(domain: DomainSpec) -> np.ndarray:
    """2/3-rule mask: keep integer mode indices with |m| < n/3 on every axis."""
    mask = np.ones(domain.rfft_shape, dtype=bool)
    for kk, length, m in zip(wavenumbers(domain), domain.L, domain.n):
        index = np.abs(kk) * length / (2 * np.pi)
        mask = mask & (index < m / 3.0)
    return mask


# ------------------------------------------------------------------ transforms


def fft(f: np.ndarray, domain: DomainSpec) -> np.ndarray:
    return sfft.rfftn(f, axes=domain.axes, workers=_workers())


def ifft(fhat: np.ndarray, domain: DomainSpec) -> np.ndarray:
    return sfft.irfftn(fhat, s=domain.shape, axes=domain.axes, workers=_workers())


def derivative(domain: DomainSpec, f: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
    """Spectral derivative of order ``order`` along ``axis`` (0-based)."""
    if not 0 <= axis < domain.d:
        raise ValueError(f"axis must be in [0, {domain.d}), got {axis}")
    if order < 1:
        raise ValueError("order must be >= 1")
    kk = (odd_wavenumbers(domain) if order % 2 else wavenumbers(domain))[axis]
    return ifft((1j * kk) ** order * fft(f, domain), domain)


def gradient(domain: DomainSpec, f: np.ndarray) -> np.ndarray:
    fhat = fft(f, domain)
    return np.stack([ifft(1j * kk * fhat, domain) for kk in odd_wavenumbers(domain)])


def divergence(domain: DomainSpec, u: np.ndarray) -> np.ndarray:
    uhat = fft(u, domain)
    return ifft(sum(1j * kk * uhat[i] for i, kk in enumerate(odd_wavenumbers(domain))), domain)


def laplacian(domain: DomainSpec, f: np.ndarray) -> np.ndarray:
    return ifft(-k_squared(domain) * fft(f, domain), domain)


def project_hat(domain: DomainSpec, uhat: np.ndarray) -> np.ndarray:
    """Leray projection in spectral space; Nyquist modes are discarded."""
    ks = wavenumbers(domain)
    k2 = k_squared(domain)
    inv = np.zeros_like(k2)
    np.divide(1.0, k2, out=inv, where=k2 > 0)
    kdotu = sum(kk * uhat[i] for i, kk in enumerate(ks)) * inv
    out = np.stack([uhat[i] - kk * kdotu for i, kk in enumerate(ks)])
    return out * nyquist_mask(domain)


def leray_project(domain: DomainSpec, u: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``u`` onto divergence-free fields."""
    return ifft(project_hat(domain, fft(u, domain)), domain)


def is_solenoidal(domain: DomainSpec, u: np.ndarray, rtol: float = 1e-10) -> bool:
    scale = float(np.max(np.abs(u))) if u.size else 0.0
    if scale == 0.0:
        return True
    return float(np.max(np.abs(divergence(domain, u)))) <= rtol * scale


def l2_inner(domain: DomainSpec, f: np.ndarray, g: np.ndarray) -> float:
    return float(np.sum(f * g) * domain.cell_volume)


def l2_norm(domain: DomainSpec, f: np.ndarray) -> float:
    return math.sqrt(l2_inner(domain, f, f))


def boundary_guard(domain: DomainSpec, *fields: np.ndarray, width: float = 2.0,
                   rel: float = 1e-6) -> tuple[bool, float]:
    """Check that fields are negligible within ``width`` of each R-axis edge.

    Returns ``(ok, ratio)`` where ratio is the largest edge magnitude over
    the global maximum.
    """
    gmax = max((float(np.max(np.abs(f))) for f in fields), default=0.0)
    if gmax == 0.0:
        return True, 0.0
    edge = 0.0
    coords = coordinates(domain)
    for axis in range(domain.k):
        x = coords[axis]
        sel = np.abs(x) >= domain.L[axis] / 2 - width
        for f in fields:
            # vector fields carry a leading component axis
            off = f.ndim - domain.d
            sub = np.compress(sel, f, axis=off + axis)
            if sub.size:
                edge = max(edge, float(np.max(np.abs(sub))))
    ratio = edge / gmax
    return ratio <= rel, ratio


# --------------------------------------------------------------- radial kernels


@dataclass(frozen=True, eq=False)
class RadialKernel:
    """A radial kernel sampled on the grid, periodised over box images.

    ``values`` sits in wrapped FFT order (origin at index 0).  ``mass`` is
    the grid quadrature of the periodised samples over one box and
    ``tail`` the analytic mass of the profile beyond ``reach`` (dropped).
    """

    domain: DomainSpec
    name: str
    reach: float
    values: np.ndarray
    hat: np.ndarray = field(repr=False)
    mass: float
    tail: float

    def centered(self) -> np.ndarray:
        """Samples rearranged so that the origin sits at the box centre."""
        return np.fft.fftshift(self.values)


def _sphere_area(d: int) -> float:
    return 2 * np.pi ** (d / 2) / math.gamma(d / 2)


def sample_radial(domain: DomainSpec, profile: Callable[[np.ndarray], np.ndarray], *,
                  reach: float, name: str = "kernel", warn_fraction: float | None = 1e-3,
                  tail: float | None = None) -> RadialKernel:
    """Sample ``profile(|X|)`` on the grid, summing periodic images.

    Contributions with ``|X + m L| > reach`` are dropped; their mass (the
    tail) is evaluated by radial quadrature unless given.  A
    :class:`KernelTruncationWarning` is issued when the dropped fraction
    exceeds ``warn_fraction``.
    """
    offs = _offsets(domain)
    images = [range(-math.ceil(reach / length + 0.5), math.ceil(reach / length + 0.5) + 1)
              for length in domain.L]
    values = np.zeros(domain.shape)
    for shift in itertools.product(*images):
        parts = []
        skip = False
        for axis, (o, m, length) in enumerate(zip(offs, shift, domain.L)):
            y = o + m * length
            if np.min(np.abs(y)) > reach:
                skip = True
                break
            s = [1] * domain.d
            s[axis] = y.size
            parts.append((y**2).reshape(s))
        if skip:
            continue
        r = np.sqrt(sum(parts))
        inside = r <= reach
        if not inside.any():
            continue
        values += np.where(inside, profile(np.where(inside, r, 0.0)), 0.0)
    mass = float(values.sum() * domain.cell_volume)
    if tail is None:
        area = _sphere_area(domain.d)
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                tail = integrate.quad(lambda s: area * s ** (domain.d - 1) * float(profile(np.array(s))),
                                      reach, np.inf, limit=200)[0]
            except integrate.IntegrationWarning:
                tail = math.inf  # slowly decaying profile, treat the tail as divergent
    frac = 1.0 if math.isinf(tail) else tail / (mass + tail) if mass + tail > 0 else 0.0
    if warn_fraction is not None and frac > warn_fraction:
        warnings.warn(
            f"{name}: {frac:.2e} of the kernel mass lies beyond reach {reach:.3g}",
            KernelTruncationWarning, stacklevel=2)
    hat = fft(values, domain) * domain.cell_volume
    return RadialKernel(domain, name, float(reach), values, hat, mass, float(tail))


def periodic_convolve(f: np.ndarray, kernel: RadialKernel) -> np.ndarray:
    """Grid quadrature of ``(f * K)(X) = sum_Y f(Y) K(X - Y) dV``.

    Leading axes of ``f`` beyond the grid dimensions are treated as a batch.
    """
    domain = kernel.domain
    return ifft(fft(f, domain) * kernel.hat, domain)


@functools.lru_cache(maxsize=64)
def ball_kernel(domain: DomainSpec, radius: float) -> RadialKernel:
    """Sharp indicator of the closed ball of the given radius."""
    return sample_radial(domain, lambda r: np.ones_like(r, dtype=float), reach=radius,
                         name=f"ball({radius:g})", warn_fraction=None, tail=0.0)


def ball_sum(f: np.ndarray, domain: DomainSpec, radius: float) -> np.ndarray:
    """Convolution of ``f`` with the ball indicator by direct stencil summation.

    Unlike the FFT route, non-negative input gives output with full relative
    precision everywhere, so square roots of tiny values are not swamped by
    round-off from the peak.  Falls back to the FFT when the ball does not
    fit inside the box.
    """
    K = ball_kernel(domain, radius)
    if any(2 * radius >= length for length in domain.L):
        return periodic_convolve(f, K)
    c = K.centered()
    nz = np.argwhere(c > 0)
    lo, hi = nz.min(axis=0), nz.max(axis=0) + 1
    stencil = c[tuple(slice(a, b) for a, b in zip(lo, hi))]
    stencil = stencil.reshape((1,) * (f.ndim - domain.d) + stencil.shape)
    return ndimage.correlate(f, stencil, mode="wrap") * domain.cell_volume


def ball_volume(d: int, radius: float = 1.0) -> float:
    return np.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d
