"""Explicit comparison functions built from drift-diffusion semigroups.

Step 1 data: rho00 = C0 rho(0)*N1, the line majorant rho0(x), their
exponential averages g, and the cumulative-mass profiles h.  Step 2 evolves
everything with d_t f -/+ d_0 f - mu Lap f = 0 and assembles

    rho10 = rho01 + g01 * h1(opposite sign),   rho1 = C0 rho10 * N1.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import grid, kernels
from .energy import EnergyDensity, line_sup
from .grid import DomainSpec

SIGNS = (+1, -1)


class SmallnessError(ValueError):
    """The line mass is too large for the cumulative profile to stay below 1."""


class ComparabilityError(AssertionError):
    pass


@dataclass(frozen=True, eq=False)
class Profile1D:
    """Samples on the axis-0 line of a domain."""

    domain: DomainSpec
    values: np.ndarray
    slope: float = 0.0  # values = periodic part + slope * (x - x_0)

    @property
    def x(self) -> np.ndarray:
        return grid.coordinates(self.domain)[0]

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.domain.h[0])

    def __add__(self, other: "Profile1D") -> "Profile1D":
        return Profile1D(self.domain, self.values + other.values, self.slope + other.slope)


@functools.lru_cache(maxsize=16)
def _line_k(domain: DomainSpec) -> np.ndarray:
    m = domain.n[0]
    k = 2 * np.pi / domain.L[0] * np.arange(m // 2 + 1)
    k[-1] = 0.0  # Nyquist: odd-derivative convention
    return k


def _line_multiply(values: np.ndarray, domain: DomainSpec, mult: np.ndarray) -> np.ndarray:
    return sfft.irfft(sfft.rfft(values) * mult, n=domain.n[0])


def _expand(mult_axis0: np.ndarray, domain: DomainSpec) -> np.ndarray:
    return mult_axis0.reshape((-1,) + (1,) * (domain.d - 1))


def exp_average(f, mu: float, sign: int, domain: DomainSpec | None = None):
    """(1/2mu) int_0^inf exp(-y/2mu) f(X -/+ y e0) dy, exact on the periodic grid.

    Works on a :class:`Profile1D` or on a d-dimensional array (``domain``
    required).  mu = 0 returns the input.
    """
    if sign not in SIGNS:
        raise ValueError("sign must be +1 or -1")
    if isinstance(f, Profile1D):
        if mu == 0:
            return Profile1D(f.domain, f.values.copy())
        k = _line_k(f.domain)
        return Profile1D(f.domain, _line_multiply(f.values, f.domain, 1.0 / (1.0 + sign * 2j * mu * k)))
    if mu == 0:
        return np.array(f, copy=True)
    k0 = grid.odd_wavenumbers(domain)[0]
    return grid.ifft(grid.fft(f, domain) / (1.0 + sign * 2j * mu * k0), domain)


def advect_diffuse(f, t: float, mu: float, sign: int, domain: DomainSpec | None = None):
    """Solve d_t f - sign d_0 f - mu Lap f = 0 for time t (spectrally exact)."""
    if sign not in SIGNS:
        raise ValueError("sign must be +1 or -1")
    if t < 0:
        raise ValueError("t must be >= 0")
    if isinstance(f, Profile1D):
        dom = f.domain
        k = _line_k(dom)
        kfull = 2 * np.pi / dom.L[0] * np.arange(dom.n[0] // 2 + 1)
        mult = np.exp((sign * 1j * k - mu * kfull**2) * t)
        return Profile1D(dom, _line_multiply(f.values, dom, mult))
    k0 = grid.odd_wavenumbers(domain)[0]
    mult = np.exp((sign * 1j * k0 - mu * grid.k_squared(domain)) * t)
    return grid.ifft(grid.fft(f, domain) * mult, domain)


def line_derivative(p: Profile1D, order: int = 1) -> Profile1D:
    """Spectral derivative of the periodic part plus the ramp slope."""
    ramp = p.slope * (p.x - p.x[0])
    vals = _line_multiply(p.values - ramp, p.domain, (1j * _line_k(p.domain)) ** order)
    if order == 1:
        vals = vals + p.slope
    return Profile1D(p.domain, vals)


def cumulative(p: Profile1D, method: str = "spectral") -> np.ndarray:
    """int_{x_0}^{x} p, anchored at the left box edge.

    ``spectral`` integrates the trigonometric interpolant (mean part gives
    the linear ramp); ``trapezoid`` integrates the piecewise-linear one.
    """
    dom = p.domain
    h = dom.h[0]
    if method == "trapezoid":
        v = p.values
        out = np.empty_like(v)
        out[0] = 0.0
        out[1:] = np.cumsum(0.5 * (v[1:] + v[:-1])) * h
        return out
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    m = dom.n[0]
    vhat = sfft.rfft(p.values)
    mean = vhat[0].real / m
    k = _line_k(dom)
    inv = np.zeros_like(vhat)
    nz = k != 0
    inv[nz] = vhat[nz] / (1j * k[nz])
    a = sfft.irfft(inv, n=m)
    x = p.x
    return mean * (x - x[0]) + a - a[0]


def build_h0(rho0: Profile1D, g0: Profile1D, eps0: float, sign: int,
             method: str = "spectral") -> Profile1D:
    """h = (1/2 eps0) int_0^inf (rho0 + g0)(x -/+ y) dy on the line."""
    s = rho0 + g0
    return _h_from_source(s, eps0, sign, method)


def _h_from_source(s: Profile1D, eps0: float, sign: int, method: str = "spectral") -> Profile1D:
    if sign not in SIGNS:
        raise ValueError("sign must be +1 or -1")
    mass = s.mass
    if mass >= 2 * eps0:
        raise SmallnessError(
            f"line mass {mass:.4g} >= 2 eps0 = {2 * eps0:.4g}: J(0) exceeds eps1; rescale the data")
    S = cumulative(s, method)
    total = mass if method == "spectral" else S[-1] + 0.5 * (s.values[-1] + s.values[0]) * s.domain.h[0]
    vals = S if sign > 0 else total - S
    slope = sign * total / s.domain.L[0] if method == "spectral" else 0.0
    return Profile1D(s.domain, vals / (2 * eps0), slope / (2 * eps0))


# ------------------------------------------------------------------ step 1


def _tol(ref: np.ndarray, rel: float) -> float:
    return rel * float(np.max(np.abs(ref))) if ref.size else 0.0


def build_rho00(density: EnergyDensity, c0: float, *, rtol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """rho00 = C0 rho(0) * N1, with the grid comparability conditions asserted."""
    dom = density.domain
    out = []
    for r in (density.rho_p, density.rho_m):
        r00 = c0 * kernels.convolve_n1(r, dom)
        tol = _tol(r00, rtol)
        if np.any(r > r00 + tol):
            raise ComparabilityError(f"rho(0) exceeds rho00 by {np.max(r - r00):.3e}; C0 too small")
        smooth = kernels.convolve_n1(r00, dom)
        if np.any(smooth > c0 * r00 + c0 * tol) or np.any(r00 > c0 * smooth + c0 * tol):
            raise ComparabilityError("rho00 * N1 not within [C0^-1, C0] x rho00")
        out.append(r00)
    return out[0], out[1]


@functools.lru_cache(maxsize=16)
def n1_line_kernel(domain: DomainSpec) -> np.ndarray:
    """int over transverse coordinates of N1, in wrapped order along axis 0."""
    K = kernels.n1_kernel(domain)
    transverse = domain.cell_volume / domain.h[0]
    return K.values.reshape(domain.n[0], -1).sum(axis=1) * transverse


def build_rho0_line(density: EnergyDensity, c0: float) -> tuple[Profile1D, Profile1D]:
    """rho0(x) = C0 int int rho*(x - x') N1(x', y') dy' dx' with rho* the slice maximum."""
    dom = density.domain
    kline = sfft.rfft(n1_line_kernel(dom)) * dom.h[0]
    out = []
    for r in (density.rho_p, density.rho_m):
        star = line_sup(dom, r)
        out.append(Profile1D(dom, c0 * sfft.irfft(sfft.rfft(star) * kline, n=dom.n[0])))
    return out[0], out[1]


@dataclass(frozen=True, eq=False)
class ComparisonData:
    """Time-zero objects of the construction (index 0: '+', index 1: '-')."""

    domain: DomainSpec
    mu: float
    c0: float
    eps0: float
    rho00: tuple[np.ndarray, np.ndarray]
    g00: tuple[np.ndarray, np.ndarray]
    rho0: tuple[Profile1D, Profile1D]
    g0: tuple[Profile1D, Profile1D]
    h0: tuple[Profile1D, Profile1D]

    @property
    def line_mass(self) -> tuple[float, float]:
        return tuple((self.rho0[i] + self.g0[i]).mass for i in range(2))


def construct_data(density: EnergyDensity, *, c0: float, eps0: float, mu: float) -> ComparisonData:
    dom = density.domain
    rho00 = build_rho00(density, c0)
    rho0 = build_rho0_line(density, c0)
    g00 = tuple(exp_average(rho00[i], mu, s, dom) for i, s in enumerate(SIGNS))
    g0 = tuple(exp_average(rho0[i], mu, s) for i, s in enumerate(SIGNS))
    h0 = tuple(build_h0(rho0[i], g0[i], eps0, s) for i, s in enumerate(SIGNS))
    return ComparisonData(dom, mu, c0, eps0, rho00, g00, rho0, g0, h0)


# ------------------------------------------------------------------ step 2


@dataclass(frozen=True, eq=False)
class ComparisonBundle:
    t: float
    rho01: tuple[np.ndarray, np.ndarray]
    g01: tuple[np.ndarray, np.ndarray]
    rho11: tuple[Profile1D, Profile1D]
    g1: tuple[Profile1D, Profile1D]
    h1: tuple[Profile1D, Profile1D]
    rho10: tuple[np.ndarray, np.ndarray]
    rho1: tuple[np.ndarray, np.ndarray]
    violations: list = field(default_factory=list)

    @property
    def rho1_p(self):
        return self.rho1[0]

    @property
    def rho1_m(self):
        return self.rho1[1]


def _broadcast_line(p: Profile1D) -> np.ndarray:
    return p.values.reshape((-1,) + (1,) * (p.domain.d - 1))


def rho1_at(data: ComparisonData, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Only rho1(t); cheaper than a full bundle."""
    return assemble_bundle(data, t, check=False).rho1


def assemble_bundle(data: ComparisonData, t: float, *, check: bool = True,
                    rtol: float = 1e-9) -> ComparisonBundle:
    dom, mu = data.domain, data.mu
    rho01 = tuple(advect_diffuse(data.rho00[i], t, mu, s, dom) for i, s in enumerate(SIGNS))
    g01 = tuple(advect_diffuse(data.g00[i], t, mu, s, dom) for i, s in enumerate(SIGNS))
    rho11 = tuple(advect_diffuse(data.rho0[i], t, mu, s) for i, s in enumerate(SIGNS))
    g1 = tuple(advect_diffuse(data.g0[i], t, mu, s) for i, s in enumerate(SIGNS))
    # the evolution commutes with d_x, so h1 is the cumulative profile of the evolved source
    h1 = tuple(_h_from_source(rho11[i] + g1[i], data.eps0, s) for i, s in enumerate(SIGNS))
    rho10 = (rho01[0] + g01[0] * _broadcast_line(h1[1]),
             rho01[1] + g01[1] * _broadcast_line(h1[0]))
    rho1 = tuple(data.c0 * kernels.convolve_n1(r, dom) for r in rho10)
    bundle = ComparisonBundle(float(t), rho01, g01, rho11, g1, h1, rho10, rho1)
    if check:
        bundle.violations.extend(bundle_violations(bundle, rtol=rtol))
    return bundle


def _worst(excess: np.ndarray, what: str, dom: DomainSpec, tol: float):
    i = int(np.argmax(excess))
    val = float(excess.flat[i])
    if val > tol:
        idx = np.unravel_index(i, excess.shape)
        where = tuple(float(grid.coordinates(dom)[a][j]) for a, j in enumerate(idx[-dom.d:]))
        return {"check": what, "excess": val, "tol": tol, "at": where}
    return None


def bundle_violations(b: ComparisonBundle, rtol: float = 1e-9) -> list[dict]:
    """Invariant violations of a bundle beyond ``rtol`` x the relevant scale."""
    dom = b.h1[0].domain
    out = []
    for i, name in enumerate("+-"):
        h = b.h1[i].values
        if np.min(h) < -1e-12:
            j = int(np.argmin(h))
            out.append({"check": f"h{name} >= 0", "excess": float(-h[j]), "tol": 1e-12,
                        "at": (float(b.h1[i].x[j]),)})
        if np.max(h) >= 1:
            out.append({"check": f"h{name} < 1", "excess": float(np.max(h) - 1), "tol": 0.0, "at": None})
        line_r = _broadcast_line(b.rho11[i])
        line_g = _broadcast_line(b.g1[i])
        tr = _tol(line_r, rtol)
        tg = _tol(line_g, rtol)
        out.append(_worst(b.rho01[i] - line_r, f"rho01{name} <= rho11{name}", dom, tr))
        out.append(_worst(b.g01[i] - line_g, f"g01{name} <= g1{name}", dom, tg))
        out.append(_worst(-b.rho01[i], f"rho01{name} >= 0", dom, tr))
        out.append(_worst(-b.g01[i], f"g01{name} >= 0", dom, tg))
        out.append(_worst(-b.rho1[i], f"rho1{name} >= 0", dom, _tol(b.rho1[i], rtol)))
    return [v for v in out if v]


def _transport_diffusion(data: ComparisonData, b: ComparisonBundle, i: int) -> np.ndarray:
    """(-/+ d_0 - mu Lap) rho10 for component i, by the product rule.

    The profile h is a ramp rather than a periodic function, so its
    derivatives come from its defining identity +/- d_x h = s / (2 eps0)
    instead of a spectral transform across the box seam.
    """
    dom, mu = data.domain, data.mu
    s = SIGNS[i]
    k0 = grid.odd_wavenumbers(dom)[0]
    k2 = grid.k_squared(dom)
    op = -s * 1j * k0 + mu * k2
    other = 1 - i
    src = b.rho11[other] + b.g1[other]
    dh = SIGNS[other] * src.values / (2 * data.eps0)
    d2h = SIGNS[other] * line_derivative(Profile1D(dom, src.values)).values / (2 * data.eps0)
    g = b.g01[i]
    g_hat = grid.fft(g, dom)
    dg = grid.ifft(1j * k0 * g_hat, dom)
    h = _broadcast_line(b.h1[other])
    dh = dh.reshape(h.shape)
    d2h = d2h.reshape(h.shape)
    out = grid.ifft(op * grid.fft(b.rho01[i], dom), dom)
    out += grid.ifft(op * g_hat, dom) * h
    out += -s * g * dh - mu * (2 * dg * dh + g * d2h)
    return out


def supersolution_residual(data: ComparisonData, t: float, dt: float = 1e-3) -> tuple[np.ndarray, np.ndarray, float]:
    """LHS - RHS of the supersolution inequality for rho1 at time t.

    LHS = d_t rho1 -/+ d_0 rho1 - mu Lap rho1 with d_t centred (one-sided at
    t = 0); the spatial part is C0 [(-/+ d_0 - mu Lap) rho10] * N1.
    RHS = (rho1+ rho1-) * N1 / (2 eps0 C0^3).  Returns the two residual
    fields and the scale max(rho1) used to normalise tolerances.
    """
    dom = data.domain
    lo = max(0.0, t - dt)
    hi = t + dt
    r_lo = rho1_at(data, lo)
    r_hi = rho1_at(data, hi)
    b = assemble_bundle(data, t, check=False)
    r_0 = b.rho1
    rhs = kernels.convolve_n1(r_0[0] * r_0[1], dom) / (2 * data.eps0 * data.c0**3)
    res = []
    for i in range(2):
        dtr = (r_hi[i] - r_lo[i]) / (hi - lo)
        spatial = data.c0 * kernels.convolve_n1(_transport_diffusion(data, b, i), dom)
        res.append(dtr + spatial - rhs)
    scale = max(float(np.max(np.abs(r_0[0]))), float(np.max(np.abs(r_0[1]))))
    return res[0], res[1], scale
