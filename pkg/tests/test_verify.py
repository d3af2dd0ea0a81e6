import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhdlab import grid, initial, solver, verify
from mhdlab.config import RunConfig
from mhdlab.initial import InitialParams


@pytest.fixture(scope="module")
def dom():
    return grid.make_domain(2, 1, 16 * math.pi, 128)


def test_regularized_rho_floor(dom):
    zero = solver.FieldState.zeros(dom, 0.1)
    rp, rm, floor = verify.regularized_rho(zero, 2, floor=0.5)
    assert np.allclose(rp, 0.5) and floor == 0.5


def test_local_energy_holds_without_coupling(dom):
    # z- = 0: rho+ solves the drift-diffusion inequality with F = 0
    st_ = initial.generate_initial("alfven_linear", dom, InitialParams(amplitude=0.1), mu=0.1)
    delta = 1e-2
    budget = verify.calibrate_tolerance(dom, 3, 0.1, delta)
    trip = tuple(solver.linear_evolve(st_, 0.5 + j * delta) for j in range(3))
    res = verify.check_local_energy(trip, 3, c1=1.0, budget=budget)
    assert res.passed and not res.flagged


def test_local_energy_rejects_uneven_triplet(dom):
    st_ = initial.generate_initial("alfven_linear", dom, mu=0.1)
    trip = (st_, solver.linear_evolve(st_, 0.01), solver.linear_evolve(st_, 0.03))
    with pytest.raises(ValueError):
        verify.check_local_energy(trip, 2)


def test_local_energy_coupled_pair(dom):
    st_ = initial.generate_initial("gaussian_bump", dom, InitialParams(amplitude=0.1), mu=0.05)
    delta = 1e-2
    budget = verify.calibrate_tolerance(dom, 3, 0.05, delta)
    res = verify.check_local_energy(verify.local_triplet(st_, delta), 3, budget=budget)
    assert res.c_measured >= res.c_core >= 0
    assert res.violation <= 0


def test_f_estimate(dom):
    st_ = initial.generate_initial("gaussian_bump", dom, mu=0.05)
    fe = verify.check_f_estimate(st_, 3)
    assert 0 < fe.c_f < 10
    lin = initial.generate_initial("alfven_linear", dom, mu=0.05)
    assert verify.check_f_estimate(lin, 3).c_f == 0.0


def test_estimate_constants_consistent(dom):
    led = verify.estimate_constants(dom, N=3)
    led.check()
    assert led.value("c0") > 1 and led.value("eps1") < led.value("eps0")
    assert "c_loc" in led.extras


def test_hn_ratio():
    assert verify.hn_ratio([(2.0, 0.0), (1.0, 0.0), (3.0, 0.0)]) == (1.5, 1.0)


def test_decay_errors():
    with pytest.raises(verify.DecayError, match="mu>0"):
        verify.decay_window(0.0, 10.0)
    with pytest.raises(verify.SaturatedWindowError, match="saturated"):
        verify.fit_decay([0, 1, 2], [1, 1, 1], quantity="HN", mu=1.0, k=1, L=8.0)


def test_decay_targets():
    assert verify.decay_target("W1inf", 1) == 0.5
    assert verify.decay_target("W1inf", 2, l1_data=False) == 0.5
    assert verify.decay_target("HN", 1) == 0.25
    with pytest.raises(ValueError):
        verify.decay_target("other", 1)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.05, 2.0), mu=st.floats(0.1, 2.0), c=st.floats(0.1, 10.0))
def test_fit_recovers_power_law(alpha, mu, c):
    L = 200.0
    times = verify.decay_times(mu, L, (L / 8) ** 2 / mu)
    vals = [c * (1 + mu * t) ** -alpha for t in times]
    fit = verify.fit_decay(times, vals, quantity="HN", mu=mu, k=1, L=L)
    assert abs(fit.alpha - alpha) <= 1e-9 and fit.residual <= 1e-9


def test_w1inf_single_mode(dom):
    X = grid.mesh(dom)
    Z = np.zeros(dom.shape)
    u = np.stack([np.sin(X[1]) + Z, Z])
    st_ = solver.FieldState(dom, 0.0, u, 0.5 * u, 0.1)
    assert math.isclose(verify.w1inf(st_), 2.0, rel_tol=1e-3)


def test_linear_decay_rates():
    dom = grid.make_domain(2, 1, 64 * math.pi, 1024)
    st_ = initial.generate_initial("alfven_linear", dom, InitialParams(amplitude=0.1, sigma=2.0), mu=0.5)
    run = verify.run_decay(st_, 50.0, linear=True)
    w, h = run.fits
    assert abs(w.alpha - 0.5) <= 0.15 and abs(h.alpha - 0.25) <= 0.15


def test_check_ordering_sign(dom):
    from mhdlab.energy import EnergyDensity
    ones = np.ones(dom.shape)
    dens = EnergyDensity(dom, ones, ones, 3)
    good = verify.check_ordering(dom, dens, (2 * ones, 2 * ones), 0.0)
    bad = verify.check_ordering(dom, dens, (0.5 * ones, 2 * ones), 0.0)
    assert good.passed and not bad.passed and bad.excess == 0.5


def test_report_roundtrip():
    rep = verify.RunReport({"d": 2}, {"c0": {"value": 2.0}})
    rep.records.append({"t": 0.0, "hn_p": 1.0, "hn_m": float("nan"), "guard_ok": True})
    rep.add_check("a", True, value=np.float64(1.5))
    rep.add_check("b", False, advisory=True, value=float("inf"))
    assert rep.passed and rep.failures() == []
    text = rep.to_json()
    back = verify.RunReport.from_json(text)
    assert back.to_json() == text
    d = json.loads(text)
    assert d["checks"]["b"]["value"] is None
    rep.add_check("c", False)
    assert not rep.passed and rep.failures()[0]["check"] == "c"


def test_report_csv():
    rep = verify.RunReport({}, {})
    rep.records.append({"t": 0.5, "hn_p": 1.0, "guard_ok": True})
    lines = rep.to_csv().splitlines()
    assert lines[0] == ",".join(verify.SERIES_COLUMNS)
    assert lines[1] == "0.5,1.0,,,,,,1"


def test_run_verification_small():
    cfg = RunConfig(n=128, t_end=0.5, samples=2, auto_small=True, mu=0.1)
    ver = verify.run_verification(cfg)
    rep = ver.report
    assert rep.passed, rep.failures()
    assert len(rep.records) == 3
