import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mhdlab import grid, kernels


def test_n1_values():
    assert kernels.n1_eval(np.zeros(2)) == 1.0
    assert kernels.n1_eval(np.array([1.0, 0.0])) == 0.5
    assert math.isclose(kernels.n1_eval(np.array([3.0, 4.0])), 1 / 126)
    assert math.isclose(kernels.n1_eval(np.array([1.0, 1.0, 1.0])), 1 / 10)


@pytest.mark.parametrize("d", [2, 3])
def test_n1_l1_norm_against_quadrature(d):
    area = 2 * math.pi if d == 2 else 4 * math.pi
    val = integrate.quad(lambda r: area * r ** (d - 1) / (1 + r ** (d + 1)), 0, np.inf)[0]
    assert math.isclose(kernels.n1_l1_norm(d), val, rel_tol=1e-9)


def test_n1_l1_norm_rejects_other_d():
    with pytest.raises(ValueError):
        kernels.n1_l1_norm(4)


def test_n1_kernel_is_positive_and_bounded(dom2):
    K = kernels.n1_kernel(dom2)
    assert np.min(K.values) > 0
    # periodised images add to the origin value, never by more than the tail mass
    assert K.values[0, 0] >= 1.0


def test_n1_grid_mass_close(dom2):
    K = kernels.n1_kernel(dom2)
    assert abs(K.mass + K.tail - kernels.n1_l1_norm(2)) <= 0.02 * kernels.n1_l1_norm(2)


def test_c0_estimate_fields(dom2):
    est = kernels.estimate_c0(dom2)
    assert est.value == pytest.approx(1.05 * est.raw)
    assert est.raw == max(est.self_conv_max, 1 / est.self_conv_min, est.rho_ratio, est.l1_mass)
    assert est.value > 1


def test_c0_covers_density(dom2):
    from mhdlab import energy, initial
    st_ = initial.generate_initial("gaussian_bump", dom2, mu=0.1, check_envelope=False)
    dens = energy.rho(st_, 3)
    est = kernels.estimate_c0(dom2, dens)
    smooth = kernels.convolve_n1(dens.rho_p, dom2)
    assert np.all(dens.rho_p <= est.value * smooth + 1e-14)


def test_split_ratio_bounded():
    for d in (2, 3):
        assert kernels.min_max_split_check(20000, d) <= 2 ** (d + 1) * 1.1


def test_split_ratio_at_half_point():
    # Y = X/2 approaches the 2^(d+1) ceiling for large |X|
    X = np.array([1e3, 0.0])
    ratio = kernels.n1_eval(X / 2) / kernels.n1_eval(X)
    assert 7.9 < ratio <= 8.0


def test_ledger_derivation_and_roundtrip():
    led = kernels.ConstantsLedger.derive(c0=10.0, c1=2.0, c_theta=math.pi**2, c_f=0.3,
                                         domain_hash="abc")
    assert led.value("eps0") == pytest.approx(1 / (2 * 1000 * 2))
    assert led.value("eps1") == pytest.approx(led.value("eps0") / 200)
    led.check()
    back = kernels.ConstantsLedger.from_json(led.to_json())
    assert back.to_dict() == led.to_dict()


def test_ledger_rejects_bad_values():
    with pytest.raises(ValueError):
        kernels.ConstantsLedger.derive(c0=0.5, c1=1.0, c_theta=1.0, c_f=1.0, domain_hash="x")
    led = kernels.ConstantsLedger.derive(c0=2.0, c1=1.0, c_theta=1.0, c_f=1.0, domain_hash="x")
    led.eps0.value *= 2
    with pytest.raises(ValueError):
        led.check()


@settings(max_examples=50, deadline=None)
@given(r1=st.floats(0, 1e4), r2=st.floats(0, 1e4), d=st.sampled_from([2, 3]))
def test_n1_radially_decreasing(r1, r2, d):
    lo, hi = sorted((r1, r2))
    assert kernels.n1_radial(hi, d) <= kernels.n1_radial(lo, d)
    assert 0 < kernels.n1_radial(lo, d) <= 1.0


@settings(max_examples=50, deadline=None)
@given(x=st.lists(st.floats(-100, 100), min_size=2, max_size=2),
       y=st.lists(st.floats(-100, 100), min_size=2, max_size=2))
def test_split_inequality_pointwise(x, y):
    X, Y = np.array(x), np.array(y)
    lhs = min(kernels.n1_eval(Y), kernels.n1_eval(X - Y))
    assert lhs <= 8.0 * kernels.n1_eval(X) * (1 + 1e-12)
