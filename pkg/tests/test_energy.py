import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhdlab import energy, grid, initial
from mhdlab.energy import EnergyDensity
from mhdlab.solver import FieldState
from conftest import smooth_random_field, solenoidal_random


def test_theta_values():
    assert energy.theta(0.0) == 1.0 and energy.theta(1.0) == 1.0
    assert math.isclose(float(energy.theta(1.5)), 0.5, abs_tol=1e-15)
    assert energy.theta(2.0) == 0.0 and energy.theta(7.0) == 0.0
    r = np.linspace(0, 3, 301)
    assert np.all(np.diff(energy.theta(r)) <= 0)


def test_theta_prime_matches_difference():
    r = np.linspace(1.01, 1.99, 50)
    fd = (energy.theta(r + 1e-6) - energy.theta(r - 1e-6)) / 2e-6
    assert np.max(np.abs(fd - energy.theta_prime(r))) <= 1e-8


def test_c_theta():
    measured = energy.CutoffProfile.measured().C_theta
    assert measured <= math.pi**2
    assert math.isclose(measured, math.pi**2, rel_tol=1e-6)
    assert energy.DEFAULT_CUTOFF.C_theta == math.pi**2


def test_gradient_powers_single_mode(dom2):
    X = grid.mesh(dom2)
    u = np.sin(X[1]) + np.zeros(dom2.shape)
    g = energy.gradient_powers(dom2, u, 2)
    assert np.allclose(g[0], u**2, atol=1e-14)
    assert np.allclose(g[1], np.cos(X[1]) ** 2 + 0 * u, atol=1e-12)
    assert np.allclose(g[2], u**2, atol=1e-12)


def test_gradient_powers_mixed_convention(dom2):
    # u = sin(a x0) sin(x1): the tensor count weights the mixed second derivative twice
    X = grid.mesh(dom2)
    a = 2 * math.pi / dom2.L[0] * 5
    u = np.sin(a * X[0]) * np.sin(X[1])
    d00 = -a**2 * u
    d01 = a * np.cos(a * X[0]) * np.cos(X[1])
    d11 = -u
    tensor = energy.gradient_powers(dom2, u, 2, "tensor")[2]
    index = energy.gradient_powers(dom2, u, 2, "index")[2]
    assert np.allclose(tensor, d00**2 + 2 * d01**2 + d11**2, atol=1e-10)
    assert np.allclose(index, d00**2 + d01**2 + d11**2, atol=1e-10)


def test_rho_zero(dom2):
    dens = energy.rho(FieldState.zeros(dom2, 0.1), 3)
    assert not dens.rho_p.any() and not dens.rho_m.any()
    assert energy.j_functional(dens) == (0.0, 0.0)


def test_rho_ball_bounds(dom2, rng):
    u = solenoidal_random(dom2, rng)
    dens = energy.gradient_powers(dom2, u, 2).sum(axis=0)
    q = energy.rho_squared(dom2, u, 2)
    inner = grid.periodic_convolve(dens, grid.ball_kernel(dom2, 1.0))
    outer = grid.periodic_convolve(dens, grid.ball_kernel(dom2, 2.0))
    scale = np.max(outer)
    assert np.all(inner <= q + 1e-12 * scale)
    assert np.all(q <= outer + 1e-12 * scale)


def test_j_matches_nested_loops(dom2, rng):
    u = solenoidal_random(dom2, rng)
    st_ = FieldState(dom2, 0.0, u, 0.5 * u, 0.1)
    dens = energy.rho(st_, 2)
    total = 0.0
    for i in range(dom2.n[0]):
        best = -np.inf
        for j in range(dom2.n[1]):
            best = max(best, dens.rho_p[i, j])
        total += best * dom2.h[0]
    jp, jm = energy.j_functional(dens)
    assert math.isclose(jp, total, rel_tol=1e-13)
    assert math.isclose(jm, 0.5 * total, rel_tol=1e-12)


def test_j_of_constant_density(dom2):
    ones = np.ones(dom2.shape)
    jp, _ = energy.j_functional(EnergyDensity(dom2, ones, ones, 0))
    assert math.isclose(jp, dom2.L[0], rel_tol=1e-13)


def test_f_pairs():
    assert energy.f_pairs(1) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    pairs = energy.f_pairs(3)
    assert all(k + j <= 4 and k <= 3 and j <= 3 for k, j in pairs)
    assert (3, 1) in pairs and (1, 3) in pairs and (3, 3) not in pairs


def test_f_zero_when_one_field_vanishes(dom2, rng):
    u = solenoidal_random(dom2, rng)
    st_ = FieldState(dom2, 0.0, u, np.zeros_like(u), 0.1)
    assert np.max(np.abs(energy.f_direct(st_, 3))) == 0.0


def test_f_homogeneous(dom2, rng):
    u = solenoidal_random(dom2, rng)
    w = solenoidal_random(dom2, rng)
    a = energy.f_direct(FieldState(dom2, 0.0, u, w, 0.1), 2)
    b = energy.f_direct(FieldState(dom2, 0.0, 3 * u, 2 * w, 0.1), 2)
    # square roots of convolution round-off set a floor near sqrt(eps) * max
    assert np.allclose(b, 6 * a, rtol=1e-9, atol=1e-7 * np.max(b))


def test_f_disjoint_supports():
    dom = grid.make_domain(2, 1, 32 * math.pi, 256)
    X = grid.mesh(dom)
    Z = np.zeros(dom.shape)
    zp = np.stack([Z, np.exp(-((X[0] + 20) ** 2)) + Z])
    zm = np.stack([Z, np.exp(-((X[0] - 20) ** 2)) + Z])
    apart = energy.f_components(FieldState(dom, 0.0, zp, zm, 0.1), 2)
    together = energy.f_components(FieldState(dom, 0.0, zp, zp, 0.1), 2)
    # sqrt of convolution round-off leaves a floor near sqrt(eps) * max
    assert np.max(apart.product) <= 1e-6 * np.max(together.product)
    assert np.max(apart.pressure) <= 1e-6 * np.max(together.product)


def test_covering_constant():
    assert math.isclose(energy.covering_constant(2), 4 / math.pi)
    assert math.isclose(energy.covering_constant(3), 8 / (4 * math.pi / 3))


def test_covering_holds_on_random_field(dom2, rng):
    f = smooth_random_field(dom2, rng)
    res = energy.covering_check(dom2, f)
    assert res.ok and res.c_measured > 0


@settings(max_examples=10, deadline=None)
@given(lam=st.floats(-5.0, 5.0), seed=st.integers(0, 2**16))
def test_rho_homogeneous(lam, seed):
    dom = grid.make_domain(2, 1, 8 * math.pi, 64)
    u = solenoidal_random(dom, np.random.default_rng(seed))
    st_ = FieldState(dom, 0.0, u, u, 0.1)
    a = energy.rho(st_, 2)
    b = energy.rho(st_.scaled(lam), 2)
    assert np.allclose(b.rho_p, abs(lam) * a.rho_p, rtol=1e-9,
                       atol=1e-7 * abs(lam) * np.max(a.rho_p))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_rho_monotone_in_order(seed):
    dom = grid.make_domain(2, 1, 8 * math.pi, 64)
    u = solenoidal_random(dom, np.random.default_rng(seed))
    st_ = FieldState(dom, 0.0, u, u, 0.1)
    prev = energy.rho(st_, 0).rho_p
    for N in range(1, 4):
        cur = energy.rho(st_, N).rho_p
        assert np.all(cur >= prev - 1e-12 * np.max(cur))
        prev = cur


def test_rho_of_generated_data_is_positive():
    dom = grid.make_domain(2, 1, 16 * math.pi, 128)
    st_ = initial.generate_initial("gaussian_bump", dom, mu=0.1, check_envelope=False)
    dens = energy.rho(st_, 3)
    assert np.min(dens.rho_p) >= 0 and np.max(dens.rho_p) > 0
