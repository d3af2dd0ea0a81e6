"""Checks of the comparison machinery along computed trajectories."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import comparison as cmp
from . import grid, kernels, solver
from .energy import DEFAULT_CUTOFF, CutoffProfile, EnergyDensity, f_direct, j_functional, rho_squared
from .grid import DomainSpec
from .initial import InitialParams, auto_rescale, generate_initial
from .solver import FieldState

SERIES_COLUMNS = ("t", "hn_p", "hn_m", "j_p", "j_m", "resid_local", "excess_comparison", "guard_ok")


def default_dt(state: FieldState, cap: float = 0.05) -> float:
    return min(0.5 * solver.cfl_limit(state), cap)


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# ------------------------------------------------------------ local energy


def regularized_rho(state: FieldState, N: int, *, eta: float = 1e-6, convention: str = "tensor",
                    floor: float | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """sqrt(rho^2 + eps^2) for both fields with eps = eta x max rho (or ``floor``)."""
    dom = state.domain
    qp = rho_squared(dom, state.zp, N, DEFAULT_CUTOFF, convention)
    qm = rho_squared(dom, state.zm, N, DEFAULT_CUTOFF, convention)
    if floor is None:
        floor = eta * math.sqrt(max(float(qp.max()), float(qm.max()), 0.0))
    eps2 = floor**2
    return np.sqrt(np.maximum(qp, 0) + eps2), np.sqrt(np.maximum(qm, 0) + eps2), floor


@dataclass(frozen=True)
class ToleranceBudget:
    """tol = safety x scale x (a h^2 + b dt^2), calibrated on the linear flow."""

    a: float
    b: float
    safety: float = 10.0
    floor: float = 1e-12

    def rel(self, h: float, dt: float) -> float:
        return self.safety * (self.a * h**2 + self.b * dt**2) + self.floor


def _local_lhs(triplet: tuple[FieldState, FieldState, FieldState], N: int, convention: str,
               floor: float | None = None):
    s0, s1, s2 = triplet
    dom, mu = s1.domain, s1.mu
    delta = s2.t - s1.t
    if not (delta > 0 and math.isclose(s1.t - s0.t, delta, rel_tol=1e-9)):
        raise ValueError("triplet must be equally spaced in time")
    r1p, r1m, floor = regularized_rho(s1, N, convention=convention, floor=floor)
    r0p, r0m, _ = regularized_rho(s0, N, convention=convention, floor=floor)
    r2p, r2m, _ = regularized_rho(s2, N, convention=convention, floor=floor)
    k0 = grid.odd_wavenumbers(dom)[0]
    k2 = grid.k_squared(dom)
    out, scales = [], []
    for sign, (a, b, c) in zip(cmp.SIGNS, ((r0p, r1p, r2p), (r0m, r1m, r2m))):
        dt_part = (c - a) / (2 * delta)
        bhat = grid.fft(b, dom)
        drift = grid.ifft(-sign * 1j * k0 * bhat, dom)
        diff = grid.ifft(mu * k2 * bhat, dom)
        out.append(dt_part + drift + diff)
        scales.append(float(np.max(np.abs(dt_part)) + np.max(np.abs(drift)) + np.max(np.abs(diff))))
    return out, max(scales), floor


def calibrate_tolerance(domain: DomainSpec, N: int, mu: float, delta: float, *,
                        convention: str = "tensor", amplitude: float = 1.0) -> ToleranceBudget:
    """Fit (a, b) from the z- = 0 flow, where rho+ obeys L rho+ <= 0 exactly.

    The positive part of the measured LHS at step sizes delta and 2 delta
    separates the O(dt^2) differencing error from the spatial floor.
    """
    st = generate_initial("alfven_linear", domain, InitialParams(amplitude=amplitude), mu=mu)
    t0 = 1.0
    base = solver.linear_evolve(st, t0)

    def measure(dl):
        trip = (solver.linear_evolve(st, t0 - dl), base, solver.linear_evolve(st, t0 + dl))
        (lp, _), scale, _ = _local_lhs(trip, N, convention)
        return max(float(np.max(lp)), 0.0) / scale

    e1, e2 = measure(delta), measure(2 * delta)
    b = max(e2 - e1, 0.0) / (3 * delta**2)
    h = max(domain.h)
    a = max(e1 - b * delta**2, 0.0) / h**2
    return ToleranceBudget(a, b)


@dataclass
class LocalEnergyResult:
    t: float
    c_measured: float
    violation: float  # max (LHS - C1 F - tol) / scale, <= 0 when the check passes
    tol: float
    scale: float
    flagged: bool  # LHS > tol where F vanishes
    c_core: float = 0.0  # same constant restricted to F >= 1e-3 max F

    @property
    def passed(self) -> bool:
        return self.violation <= 0 and not self.flagged


def check_local_energy(triplet, N: int, *, c1: float | None = None, budget: ToleranceBudget | None = None,
                       convention: str = "tensor") -> LocalEnergyResult:
    """LHS = d_t rho -/+ d_0 rho - mu Lap rho at the middle state versus C F."""
    s1 = triplet[1]
    lhs, scale, _ = _local_lhs(triplet, N, convention)
    F = f_direct(s1, N, convention)
    delta = triplet[2].t - s1.t
    budget = budget or ToleranceBudget(0.0, 0.0)
    tol = budget.rel(max(s1.domain.h), delta) * scale
    fmax = float(F.max())
    f_floor = 1e-10 * fmax if fmax > 0 else 0.0
    c_meas, c_core, viol, flagged = 0.0, 0.0, -math.inf, False
    core = F >= 1e-3 * fmax if fmax > 0 else np.zeros(F.shape, bool)
    for L in lhs:
        excess = L - tol
        big = F > f_floor
        if np.any(big):
            ratio = np.where(big, excess, 0.0) / np.where(big, F, 1.0)
            c_meas = max(c_meas, float(np.max(ratio)))
            c_core = max(c_core, float(np.max(np.where(core, ratio, 0.0))))
        if np.any(~big & (excess > 0)):
            flagged = True
        c = c1 if c1 is not None else c_meas
        viol = max(viol, float(np.max(L - c * F - tol)) / scale if scale > 0 else 0.0)
    if scale == 0:
        viol = 0.0
    return LocalEnergyResult(float(s1.t), max(c_meas, 0.0), viol, tol, scale, flagged, c_core)


def local_triplet(state: FieldState, delta: float) -> tuple[FieldState, FieldState, FieldState]:
    """(state, +delta, +2 delta) by solver steps."""
    s1 = solver.step(state, delta)
    return state, s1, solver.step(s1, delta)


# --------------------------------------------------------------- F estimate


@dataclass
class FEstimate:
    c_f: float
    f_max: float
    denom_max: float


def check_f_estimate(state: FieldState, N: int, density: EnergyDensity | None = None,
                     convention: str = "tensor") -> FEstimate:
    """max F / ((rho+ rho-) * N1) over the grid (0 when F vanishes)."""
    from .energy import rho as rho_fn

    dom = state.domain
    dens = density or rho_fn(state, N, DEFAULT_CUTOFF, convention)
    F = f_direct(state, N, convention)
    denom = kernels.convolve_n1(dens.rho_p * dens.rho_m, dom)
    fmax, dmax = float(F.max()), float(denom.max())
    if fmax == 0 or dmax == 0:
        return FEstimate(0.0, fmax, dmax)
    sel = denom > 1e-12 * dmax
    return FEstimate(float(np.max(F[sel] / denom[sel])), fmax, dmax)


# ---------------------------------------------------------------- constants


def estimate_constants(domain: DomainSpec, state: FieldState | None = None, *, N: int = 3,
                       dt: float | None = None, convention: str = "tensor") -> kernels.ConstantsLedger:
    """C0 from the kernel (and the data), C1 = max(C_loc, 1) x C_F from a short run.

    When the data has no coupling (F = 0), C_F and C_loc come from a
    reference Gaussian pair of amplitude 1e-2 on the same domain.
    """
    from .energy import rho as rho_fn

    dens = rho_fn(state, N, DEFAULT_CUTOFF, convention) if state is not None else None
    c0 = kernels.estimate_c0(domain, dens)
    c_theta = CutoffProfile.measured().C_theta
    probe = state
    note = "run data"
    if probe is None or not np.any(probe.zm) or not np.any(probe.zp):
        mu = state.mu if state is not None else 0.05
        probe = generate_initial("gaussian_bump", domain, InitialParams(amplitude=1e-2), mu=mu)
        note = "reference gaussian pair"
    fe = check_f_estimate(probe, N, convention=convention)
    delta = min(dt or default_dt(probe), 1e-2)
    budget = calibrate_tolerance(domain, N, probe.mu, delta, convention=convention)
    loc = check_local_energy(local_triplet(probe, delta), N, budget=budget, convention=convention)
    c_loc = max(loc.c_measured, 1.0)
    c_f = max(fe.c_f, 1e-12)
    ledger = kernels.ConstantsLedger.derive(
        c0=c0.value, c1=c_loc * c_f, c_theta=c_theta, c_f=c_f, domain_hash=domain.digest(),
        provenance={"c1": f"measured: max(C_loc, 1) x C_F on {note}",
                    "c_f": f"measured: max F / (rho+ rho-)*N1 on {note}"})
    ledger.extras.update({
        "c_loc": loc.c_measured, "c0_raw": c0.raw, "n1_self_conv_max": c0.self_conv_max,
        "n1_self_conv_min": c0.self_conv_min, "n1_l1_grid": c0.l1_mass, "n1_tail": c0.tail_mass,
        "tol_a": budget.a, "tol_b": budget.b,
    })
    return ledger


# --------------------------------------------------------------- comparison


@dataclass
class OrderingResult:
    t: float
    excess: float  # max(rho - rho1), signed
    tol: float
    where: tuple | None

    @property
    def passed(self) -> bool:
        return self.excess <= self.tol


def check_ordering(domain: DomainSpec, density: EnergyDensity, rho1: tuple[np.ndarray, np.ndarray],
                   t: float, *, rtol: float = 1e-8) -> OrderingResult:
    """rho+- <= rho1+- + tol, tol = rtol x max rho1 (quadrature budget)."""
    best, where = -math.inf, None
    scale = max(float(np.max(rho1[0])), float(np.max(rho1[1])), 0.0)
    for r, r1 in zip((density.rho_p, density.rho_m), rho1):
        ex = r - r1
        i = int(np.argmax(ex))
        if ex.flat[i] > best:
            best = float(ex.flat[i])
            idx = np.unravel_index(i, ex.shape)
            where = tuple(float(grid.coordinates(domain)[a][j]) for a, j in enumerate(idx))
    return OrderingResult(float(t), best, rtol * scale, where)


@dataclass
class ResidualResult:
    t: float
    min_rel: float  # min over grid of residual / max rho1
    tol_rel: float
    time_err: float
    truncation: float

    @property
    def passed(self) -> bool:
        return self.min_rel >= -self.tol_rel


def check_supersolution(data: cmp.ComparisonData, t: float, *, dt: float = 1e-3, safety: float = 10.0,
                        seam_distance: float | None = None) -> ResidualResult:
    """Supersolution residual with a budget for time differencing and box truncation.

    The differencing error is estimated from the change of the residual
    between dt and 2 dt; truncation is N1 at the distance from the drifting
    profiles to the box seam.
    """
    r1p, r1m, scale = cmp.supersolution_residual(data, t, dt)
    if scale == 0:
        return ResidualResult(float(t), 0.0, 0.0, 0.0, 0.0)
    r2p, r2m, _ = cmp.supersolution_residual(data, t, 2 * dt)
    time_err = max(float(np.max(np.abs(r2p - r1p))), float(np.max(np.abs(r2m - r1m)))) / (3 * scale)
    L0 = data.domain.L[0]
    dist = seam_distance if seam_distance is not None else max(L0 / 2 - t, 1.0)
    trunc = float(kernels.n1_radial(dist, data.domain.d))
    mn = min(float(r1p.min()), float(r1m.min())) / scale
    return ResidualResult(float(t), mn, safety * time_err + trunc + 1e-12, time_err, trunc)


@dataclass
class HNBound:
    sup_ratio: tuple[float, float]
    chain_constant: float  # sup ||z||_{H^N} / ||rho||_{L^2}
    rho_below_rho1: bool


def hn_ratio(hn_series: list[tuple[float, float]]) -> tuple[float, float]:
    """sup_t ||z(t)|| / ||z(0)|| per field, with 0/0 read as 1."""
    out = []
    for i in range(2):
        h0 = hn_series[0][i]
        vals = [h[i] for h in hn_series]
        out.append(1.0 if h0 == 0 else max(vals) / h0)
    return out[0], out[1]


# -------------------------------------------------------------------- decay


class DecayError(ValueError):
    pass


class SaturatedWindowError(DecayError):
    pass


@dataclass
class DecayFit:
    quantity: str
    t_lo: float
    t_hi: float
    alpha: float
    target: float
    residual: float
    stderr: float
    points: int

    @property
    def deviation(self) -> float:
        return abs(self.alpha - self.target)


def decay_window(mu: float, L: float, t_exit: float | None = None) -> tuple[float, float]:
    """[1/mu, t_sat] with sqrt(mu t_sat) = L/8, cut at an optional exit time."""
    if not mu > 0:
        raise DecayError("decay requires mu>0")
    t_sat = (L / 8) ** 2 / mu
    hi = t_sat if t_exit is None else min(t_sat, t_exit)
    return 1.0 / mu, hi


def decay_target(quantity: str, k: int, l1_data: bool = True) -> float:
    if quantity == "W1inf":
        return k / 2 if l1_data else k / 4
    if quantity == "HN":
        return k / 4
    raise ValueError(f"unknown quantity {quantity!r}")


def fit_decay(times, values, *, quantity: str, mu: float, k: int, L: float,
              t_exit: float | None = None, l1_data: bool = True, target: float | None = None) -> DecayFit:
    """Least-squares slope of log Q against log(1 + mu t) on the a-priori window."""
    lo, hi = decay_window(mu, L, t_exit)
    t = np.asarray(times, float)
    q = np.asarray(values, float)
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12) & (q > 0)
    if hi <= lo or sel.sum() < 3:
        raise SaturatedWindowError(
            f"saturated: window [{lo:.3g}, {hi:.3g}] holds {int(sel.sum())} samples; raise mu or L")
    x = np.log1p(mu * t[sel])
    y = np.log(q[sel])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    resid = float(np.sqrt(np.mean((y - fit) ** 2)))
    dof = max(len(x) - 2, 1)
    s2 = float(np.sum((y - fit) ** 2)) / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    tgt = decay_target(quantity, k, l1_data) if target is None else target
    return DecayFit(quantity, float(t[sel][0]), float(t[sel][-1]), float(-coef[0]), float(tgt),
                    resid, stderr, int(sel.sum()))


def w1inf(state: FieldState) -> float:
    """max over the two fields of sup|z| + sup|grad z|."""
    dom = state.domain
    out = 0.0
    for z in (state.zp, state.zm):
        mag = float(np.sqrt(np.sum(z**2, axis=0)).max())
        g = np.stack([grid.derivative(dom, z[i], a) for i in range(dom.d) for a in range(dom.d)])
        out = max(out, mag + float(np.sqrt(np.sum(g**2, axis=0)).max()))
    return out


def decay_times(mu: float, L: float, t_end: float, count: int = 24) -> list[float]:
    """0 plus geometric samples covering the fit window up to t_end."""
    lo = 0.5 / mu
    ts = np.geomspace(lo, t_end, count)
    return [0.0] + [float(x) for x in ts]


@dataclass
class DecayRun:
    times: list
    w1inf: list
    hn: list
    guard: list
    t_exit: float | None
    fits: list


def run_decay(state: FieldState, t_end: float, *, N: int = 3, dt: float | None = None,
              linear: bool = False, count: int = 24, l1_data: bool = True) -> DecayRun:
    """Sample W^{1,inf} and H^N along the flow and fit both exponents."""
    dom, mu = state.domain, state.mu
    L = min(dom.L[: dom.k])
    times = decay_times(mu, L, t_end, count)
    if linear:
        traj = (solver.linear_evolve(state, t) for t in times)
    else:
        traj = solver.integrate(state, times, dt or default_dt(state), N=N)
    rec_t, rec_w, rec_h, rec_g = [], [], [], []
    t_exit = None
    for st in traj:
        ok, _ = grid.boundary_guard(dom, st.zp, st.zm)
        if not ok and t_exit is None:
            t_exit = rec_t[-1] if rec_t else 0.0
        rec_t.append(st.t)
        rec_w.append(w1inf(st))
        rec_h.append(max(solver.hn_norm(st, N)))
        rec_g.append(ok)
    fits = []
    for name, vals in (("W1inf", rec_w), ("HN", rec_h)):
        fits.append(fit_decay(rec_t, vals, quantity=name, mu=mu, k=dom.k, L=L, t_exit=t_exit,
                              l1_data=l1_data))
    return DecayRun(rec_t, rec_w, rec_h, rec_g, t_exit, fits)


# ------------------------------------------------------------------- report


@dataclass
class RunReport:
    config: dict
    ledger: dict
    records: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    decay: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.get("passed", False) for c in self.checks.values() if not c.get("advisory"))

    def failures(self) -> list[dict]:
        return [{"check": k, **v} for k, v in sorted(self.checks.items())
                if not v.get("passed", False) and not v.get("advisory")]

    def add_check(self, name: str, passed: bool, advisory: bool = False, **info) -> None:
        entry = {"passed": bool(passed), **{k: _clean(v) for k, v in info.items()}}
        if advisory:
            entry["advisory"] = True
        self.checks[name] = entry

    def to_dict(self) -> dict:
        return {"config": self.config, "ledger": self.ledger, "records": [_clean(r) for r in self.records],
                "checks": self.checks, "decay": [_clean(d) for d in self.decay], "passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        return cls(d["config"], d["ledger"], d["records"], d["checks"], d["decay"])

    def to_csv(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for r in self.records:
            w.writerow(["" if r.get(c) is None else _cell(r.get(c)) for c in SERIES_COLUMNS])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return _finite(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# ----------------------------------------------------------------- pipeline


def alfven_error(state: FieldState, t: float, dt: float) -> float:
    """Relative L2 gap between stepping and the exact translate-and-diffuse flow."""
    exact = solver.linear_evolve(state, t)
    num = state
    for num in solver.integrate(state, [t], dt):
        pass
    den = grid.l2_norm(state.domain, exact.zp)
    if den == 0:
        return 0.0
    return grid.l2_norm(state.domain, num.zp - exact.zp) / den


@dataclass
class Verification:
    report: RunReport
    ledger: kernels.ConstantsLedger
    final: FieldState
    data: cmp.ComparisonData | None
    density0: EnergyDensity


def run_verification(cfg, *, comparison_rtol: float = 1e-8, residual_samples: int | None = None,
                     local_energy: bool = True) -> Verification:
    """End to end: constants, optional auto-small rescale, flow, and every check."""
    from .energy import rho as rho_fn

    dom = cfg.domain()
    N, conv = cfg.order_n, cfg.convention
    state = generate_initial(cfg.family, dom, cfg.initial_params(), mu=cfg.mu, N=N)
    dt = cfg.dt or default_dt(state)
    ledger = estimate_constants(dom, state, N=N, dt=dt, convention=conv)
    eps0, eps1, c0, c1 = (ledger.value(k) for k in ("eps0", "eps1", "c0", "c1"))
    if cfg.auto_small:
        state, lam = auto_rescale(state, eps1, N=N)
        ledger.extras["rescale_factor"] = lam
        dt = cfg.dt or default_dt(state)
    dens0 = rho_fn(state, N, DEFAULT_CUTOFF, conv)
    j0 = j_functional(dens0)
    small = max(j0) <= eps1
    report = RunReport(config={k: _clean(v) for k, v in asdict(cfg).items()}, ledger=ledger.to_dict())
    report.add_check("smallness", small, advisory=not cfg.auto_small, j0=list(j0), eps1=eps1)

    data = None
    try:
        data = cmp.construct_data(dens0, c0=c0, eps0=eps0, mu=cfg.mu)
    except (cmp.SmallnessError, cmp.ComparabilityError) as exc:
        report.add_check("construction", False, advisory=not small, error=str(exc))
    advisory = not small

    times = cfg.sample_times()
    if local_energy:
        budget = calibrate_tolerance(dom, N, cfg.mu, min(dt, 1e-2), convention=conv)
    orderings, residuals, locals_, bundle_bad, guard_all = [], [], [], [], True
    hn_series, chain = [], 0.0
    rho_l2_ok = True
    final = state
    for st in solver.integrate(state, times, dt, N=N):
        final = st
        dens = rho_fn(st, N, DEFAULT_CUTOFF, conv) if st.t > 0 else dens0
        hn = solver.hn_norm(st, N, conv)
        hn_series.append(hn)
        rl2 = (grid.l2_norm(dom, dens.rho_p), grid.l2_norm(dom, dens.rho_m))
        for a, b in zip(hn, rl2):
            if b > 0:
                chain = max(chain, a / b)
        jt = j_functional(dens)
        ok, gratio = grid.boundary_guard(dom, st.zp, st.zm)
        guard_all &= ok
        rec = {"t": st.t, "hn_p": hn[0], "hn_m": hn[1], "j_p": jt[0], "j_m": jt[1],
               "resid_local": None, "excess_comparison": None, "guard_ok": ok}
        if data is not None:
            bundle = cmp.assemble_bundle(data, st.t)
            bundle_bad.extend(bundle.violations)
            o = check_ordering(dom, dens, bundle.rho1, st.t, rtol=comparison_rtol)
            orderings.append(o)
            rec["excess_comparison"] = o.excess
            for r, r1 in zip((dens.rho_p, dens.rho_m), bundle.rho1):
                if grid.l2_norm(dom, r) > grid.l2_norm(dom, r1) * (1 + 1e-12):
                    rho_l2_ok = False
        if local_energy and dt <= solver.cfl_limit(st):
            delta = min(dt, 1e-2)
            le = check_local_energy(local_triplet(st, delta), N, c1=c1, budget=budget, convention=conv)
            locals_.append(le)
            rec["resid_local"] = le.violation
        report.records.append(rec)

    if data is not None:
        stride = max(1, len(times) // residual_samples) if residual_samples else 1
        for t in times[::stride]:
            residuals.append(check_supersolution(data, t))
    # pass/fail
    report.add_check("boundary_guard", guard_all)
    if data is not None:
        o0 = orderings[0] if orderings else None
        report.add_check("comparison_initial", bool(o0 and o0.passed), advisory=advisory,
                         excess=o0.excess if o0 else None, tol=o0.tol if o0 else None)
        worst = max(orderings, key=lambda o: o.excess - o.tol) if orderings else None
        report.add_check("comparison_ordering", all(o.passed for o in orderings), advisory=advisory,
                         max_excess=worst.excess if worst else None, tol=worst.tol if worst else None,
                         at_t=worst.t if worst else None, where=worst.where if worst else None)
        report.add_check("bundle_invariants", not bundle_bad, violations=bundle_bad[:10])
        wr = min(residuals, key=lambda r: r.min_rel + r.tol_rel)
        report.add_check("supersolution", all(r.passed for r in residuals), min_rel=wr.min_rel,
                         tol_rel=wr.tol_rel, at_t=wr.t,
                         series=[[r.t, r.min_rel, r.tol_rel] for r in residuals])
        report.add_check("rho_l2_chain", rho_l2_ok, advisory=advisory)
    ratio = hn_ratio(hn_series)
    report.add_check("hn_bound", all(math.isfinite(x) for x in ratio) and math.isfinite(chain),
                     sup_ratio=list(ratio), chain_constant=chain)
    if locals_:
        report.add_check("local_energy", all(le.passed for le in locals_),
                         max_violation=max(le.violation for le in locals_),
                         c_measured=max(le.c_measured for le in locals_), c1=c1,
                         flagged=any(le.flagged for le in locals_))
    return Verification(report, ledger, final, data, dens0)
