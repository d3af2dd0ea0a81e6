"""Command-line front end: ``mhdlab <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import comparison as cmp
from . import grid, solver, verify
from .config import ConfigError, RunConfig
from .energy import j_functional, rho
from .initial import auto_rescale, generate_initial
from .io import atomic_write, save_array

FLAG_KEYS = {
    "d": int, "k": int, "n": int, "box_length": float, "mu": float, "order_n": int, "dt": float,
    "t_end": float, "family": str, "delta": float, "big_r": float, "amplitude": float,
    "seed": int, "samples": int, "sigma": float,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value run configuration")
    common.add_argument("--out", type=Path, default=Path("mhdlab-out"), help="output directory")
    for key, kind in FLAG_KEYS.items():
        flag = "--order-N" if key == "order_n" else "--" + key.replace("_", "-")
        common.add_argument(flag, dest=key, type=kind, default=None)
    common.add_argument("--auto-small", dest="auto_small", action="store_true", default=None)
    common.add_argument("--resolution-check", dest="resolution_check", action="store_true", default=None,
                        help="repeat the run at 2n and compare")
    p = argparse.ArgumentParser(prog="mhdlab", description="Elsasser-variable MHD comparison laboratory")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("simulate", "integrate the flow and record norms"),
                       ("construct", "build comparison bundles and their residuals"),
                       ("verify", "run every check along a trajectory"),
                       ("decay", "fit decay exponents"),
                       ("estimate-constants", "measure C0, C1 and the thresholds"),
                       ("report", "summarise an existing output directory")):
        sub.add_parser(name, parents=[common], help=text)
    return p


def load_config(args) -> RunConfig:
    cfg = RunConfig.from_text(args.config.read_text()) if args.config else RunConfig()
    overrides = {k: getattr(args, k) for k in (*FLAG_KEYS, "auto_small", "resolution_check")
                 if getattr(args, k, None) is not None}
    return cfg.replace(**overrides) if overrides else cfg


def _manifest(cfg: RunConfig, command: str, ledger: dict | None, wall: float) -> dict:
    return {
        "command": command,
        "config_hash": cfg.digest(),
        "ledger": ledger,
        "versions": {"mhdlab": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": round(wall, 3),
    }


def write_outputs(out: Path, cfg: RunConfig, command: str, report: verify.RunReport, wall: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "config.cfg", cfg.to_text())
    atomic_write(out / "ledger.json", json.dumps(report.ledger, indent=2, sort_keys=True) + "\n")
    atomic_write(out / "report.json", report.to_json())
    atomic_write(out / "series.csv", report.to_csv())
    atomic_write(out / "manifest.json",
                 json.dumps(_manifest(cfg, command, report.ledger, wall), indent=2, sort_keys=True) + "\n")


def _save_state(out: Path, st: solver.FieldState, stem: str) -> None:
    labels = ["component"] + [f"x{a}" for a in range(st.domain.d)]
    save_array(out / f"{stem}_zp.mhdc", st.zp, labels)
    save_array(out / f"{stem}_zm.mhdc", st.zm, labels)


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig, out: Path) -> verify.RunReport:
    dom = cfg.domain()
    st0 = generate_initial(cfg.family, dom, cfg.initial_params(), mu=cfg.mu, N=cfg.order_n)
    dt = cfg.dt or verify.default_dt(st0)
    report = verify.RunReport(config=asdict(cfg), ledger={})
    energies, guard_all, sol_ok, hn = [], True, True, []
    final = st0
    for st in solver.integrate(st0, cfg.sample_times(), dt, N=cfg.order_n):
        final = st
        h = solver.hn_norm(st, cfg.order_n, cfg.convention)
        hn.append(h)
        dens = rho(st, cfg.order_n, convention=cfg.convention)
        j = j_functional(dens)
        ok, _ = grid.boundary_guard(dom, st.zp, st.zm)
        guard_all &= ok
        sol_ok &= grid.is_solenoidal(dom, st.zp) and grid.is_solenoidal(dom, st.zm)
        energies.append(solver.energy(st))
        report.records.append({"t": st.t, "hn_p": h[0], "hn_m": h[1], "j_p": j[0], "j_m": j[1],
                               "resid_local": None, "excess_comparison": None, "guard_ok": ok})
    report.add_check("boundary_guard", guard_all)
    report.add_check("solenoidal", sol_ok)
    if cfg.mu > 0:
        mono = all(b <= a * (1 + 1e-12) for a, b in zip(energies, energies[1:]))
        report.add_check("energy_nonincreasing", mono)
    ratio = verify.hn_ratio(hn)
    report.add_check("hn_bound", all(np.isfinite(ratio)), sup_ratio=list(ratio))
    if cfg.family == "alfven_linear":
        exact = solver.linear_evolve(st0, final.t)
        den = grid.l2_norm(dom, exact.zp)
        err = grid.l2_norm(dom, final.zp - exact.zp) / den if den else 0.0
        report.add_check("alfven_exactness", err <= 1e-6, rel_l2_error=err, t=final.t)
    _save_state(out, final, "final")
    return report


def cmd_construct(cfg: RunConfig, out: Path) -> verify.RunReport:
    dom = cfg.domain()
    N = cfg.order_n
    st = generate_initial(cfg.family, dom, cfg.initial_params(), mu=cfg.mu, N=N)
    ledger = verify.estimate_constants(dom, st, N=N, convention=cfg.convention)
    if cfg.auto_small:
        st, lam = auto_rescale(st, ledger.value("eps1"), N=N)
        ledger.extras["rescale_factor"] = lam
    report = verify.RunReport(config=asdict(cfg), ledger=ledger.to_dict())
    dens = rho(st, N, convention=cfg.convention)
    data = cmp.construct_data(dens, c0=ledger.value("c0"), eps0=ledger.value("eps0"), mu=cfg.mu)
    g_err = 0.0
    for i, s in enumerate(cmp.SIGNS):
        lhs = data.g00[i] + s * 2 * cfg.mu * grid.derivative(dom, data.g00[i], 0)
        top = float(np.max(np.abs(data.rho00[i])))
        if top:
            g_err = max(g_err, float(np.max(np.abs(lhs - data.rho00[i]))) / top)
    report.add_check("g_identity", g_err <= 1e-6, rel_error=g_err)
    bad, residuals, h_err = [], [], 0.0
    bundle = None
    for t in cfg.sample_times():
        bundle = cmp.assemble_bundle(data, t)
        bad.extend(bundle.violations)
        for i, s in enumerate(cmp.SIGNS):
            src = (bundle.rho11[i] + bundle.g1[i]).values / (2 * data.eps0)
            dh = cmp.line_derivative(bundle.h1[i]).values
            top = float(np.max(np.abs(src)))
            if top:
                h_err = max(h_err, float(np.max(np.abs(s * dh - src))) / top)
        residuals.append(verify.check_supersolution(data, t))
        report.records.append({"t": t, "hn_p": None, "hn_m": None, "j_p": None, "j_m": None,
                               "resid_local": None, "excess_comparison": None, "guard_ok": None})
    report.add_check("h_identity", h_err <= 1e-6, rel_error=h_err)
    report.add_check("bundle_invariants", not bad, violations=bad[:10])
    report.add_check("supersolution", all(r.passed for r in residuals),
                     series=[[r.t, r.min_rel, r.tol_rel] for r in residuals])
    if bundle is not None:
        save_array(out / "rho1_p.mhdc", bundle.rho1[0], [f"x{a}" for a in range(dom.d)])
        save_array(out / "rho1_m.mhdc", bundle.rho1[1], [f"x{a}" for a in range(dom.d)])
    return report


def cmd_verify(cfg: RunConfig, out: Path) -> verify.RunReport:
    res = verify.run_verification(cfg)
    report = res.report
    _save_state(out, res.final, "final")
    if cfg.resolution_check:
        fine = verify.run_verification(cfg.replace(n=2 * cfg.n, resolution_check=False))
        led, led2 = res.ledger, fine.ledger
        c0_gap = abs(led2.value("c0") / led.value("c0") - 1)
        cf_gap = abs(led2.value("c_f") / led.value("c_f") - 1)
        report.add_check("resolution_c0", c0_gap <= 0.05, relative_change=c0_gap)
        report.add_check("resolution_c_f", cf_gap <= 0.25, relative_change=cf_gap)
        coarse_v = report.checks.get("local_energy", {}).get("max_violation")
        fine_v = fine.report.checks.get("local_energy", {}).get("max_violation")
        if coarse_v is not None and fine_v is not None:
            report.add_check("resolution_monotone", fine_v <= max(coarse_v, 0.0) + 1e-12,
                             coarse=coarse_v, fine=fine_v)
    return report


def cmd_decay(cfg: RunConfig, out: Path) -> verify.RunReport:
    dom = cfg.domain()
    st = generate_initial(cfg.family, dom, cfg.initial_params(), mu=cfg.mu, N=cfg.order_n)
    report = verify.RunReport(config=asdict(cfg), ledger={})
    run = verify.run_decay(st, cfg.t_end, N=cfg.order_n, dt=cfg.dt or None,
                           linear=cfg.family == "alfven_linear")
    for t, w, h, g in zip(run.times, run.w1inf, run.hn, run.guard):
        report.records.append({"t": t, "hn_p": h, "hn_m": None, "j_p": None, "j_m": None,
                               "resid_local": None, "excess_comparison": None, "guard_ok": g})
    for f in run.fits:
        report.decay.append({**asdict(f), "deviation": f.deviation})
        report.add_check(f"decay_{f.quantity}", f.deviation <= 0.15, alpha=f.alpha, target=f.target)
    return report


def cmd_estimate(cfg: RunConfig, out: Path) -> verify.RunReport:
    dom = cfg.domain()
    st = generate_initial(cfg.family, dom, cfg.initial_params(), mu=cfg.mu, N=cfg.order_n)
    ledger = verify.estimate_constants(dom, st, N=cfg.order_n, convention=cfg.convention)
    report = verify.RunReport(config=asdict(cfg), ledger=ledger.to_dict())
    try:
        ledger.check()
        ok = True
    except ValueError:
        ok = False
    report.add_check("ledger", ok and ledger.value("c0") > 1, c0=ledger.value("c0"))
    return report


COMMANDS = {"simulate": cmd_simulate, "construct": cmd_construct, "verify": cmd_verify,
            "decay": cmd_decay, "estimate-constants": cmd_estimate}


def _emit_failures(failures: list[dict]) -> None:
    print(json.dumps({"status": "fail", "failures": failures}, sort_keys=True), file=sys.stdout)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("ignore", grid.KernelTruncationWarning)
    out: Path = args.out
    if args.command == "report":
        path = out / "report.json"
        if not path.exists():
            _emit_failures([{"check": "report", "error": f"{path} not found"}])
            return 2
        rep = verify.RunReport.from_json(path.read_text())
        for name, c in sorted(rep.checks.items()):
            tag = "pass" if c.get("passed") else ("advisory" if c.get("advisory") else "FAIL")
            print(f"{tag:8s} {name}")
        if not rep.passed:
            _emit_failures(rep.failures())
        return 0 if rep.passed else 1
    try:
        cfg = load_config(args)
    except (ConfigError, OSError) as exc:
        _emit_failures([{"check": "config", "error": str(exc)}])
        return 2
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        report = COMMANDS[args.command](cfg, out)
    except (solver.BlowUpError, solver.CFLError, cmp.SmallnessError, cmp.ComparabilityError,
            verify.DecayError, ValueError) as exc:
        _emit_failures([{"check": args.command, "error": f"{type(exc).__name__}: {exc}"}])
        return 1
    write_outputs(out, cfg, args.command, report, time.perf_counter() - start)
    if report.passed:
        print(json.dumps({"status": "ok", "checks": sorted(report.checks)}, sort_keys=True))
        return 0
    _emit_failures(report.failures())
    return 1


if __name__ == "__main__":
    sys.exit(main())
