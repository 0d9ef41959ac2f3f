"""Config-driven experiment runner.

    beamlab <subcommand> --config <path> [--out <dir>] [--jobs N]

Subcommands: validate, profile, weight, simulate, analyze, report, all.
Exit codes: 0 success, 2 unparseable/incomplete config, 3 assumption
violation outside `validate`, 4 numerical failure (diagnostic file written).
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from multiprocessing import Pool
from pathlib import Path

from .beam_solver import GridCompatibilityError, NumericalBlowupError
from .config import ConfigError, ExperimentConfig, load_config
from .energy import coercivity_margin
from .experiment import (analyze_run, build_profile, run_simulation,
                         write_analysis_artifacts, write_simulation_artifacts)
from .model import AssumptionError, derive_params
from .profile import ProfileSolveError, export_profile_csv, fit_asymptotics
from .weight import (WeightQuadratureError, build_weight, export_weight_csv,
                     tail_correction_report, weight_inequality_margin)

_SUBCOMMANDS = ("validate", "profile", "weight", "simulate", "analyze",
                "report", "all")
_NUMERICAL_ERRORS = (ProfileSolveError, WeightQuadratureError,
                     NumericalBlowupError, GridCompatibilityError)


def _out_dir(cfg: ExperimentConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_validate(cfg: ExperimentConfig, out: Path) -> int:
    derived = derive_params(cfg.model)
    print(f"alpha={cfg.model.alpha:g} beta={cfg.model.beta:g} "
          f"b0={cfg.model.b0:g} p={cfg.model.p:g}")
    print(f"theta        = {derived.theta:.12g}")
    print(f"p_crit       = {derived.p_crit:.12g}")
    print(f"nu           = {derived.nu:.12g}")
    print(f"varsigma     = {derived.varsigma:.12g}")
    print(f"mu           = {derived.mu:.12g}")
    print(f"A0           = {derived.A0:.12g}")
    for name, flag in (("Assumption I", derived.assumption_i),
                       ("Assumption II", derived.assumption_ii),
                       ("Assumption III", derived.assumption_iii)):
        print(f"{name:<14} {'satisfied' if flag else 'VIOLATED'}")
    # coercivity diagnostics for the weighted-energy absorption argument
    if derived.theta < 0.75:
        m0 = (2.0 * (derived.theta + 0.75) / (0.75 - derived.theta)) ** 0.5
        print(f"M0           = {m0:.6g} (coercivity margin "
              f"{coercivity_margin(derived.theta, m0):+.3g})")
    return 0


def _cmd_profile(cfg: ExperimentConfig, out: Path) -> int:
    sol = build_profile(cfg)
    export_profile_csv(sol, out / "profile.csv")
    fit = fit_asymptotics(sol)
    with open(out / "profile_fit.json", "w") as fh:
        json.dump({"omega0": sol.omega0, "c0": sol.c0,
                   "residual_max": sol.residual_max,
                   "c0_fit": fit.c0_fit, "tail_rate_omega": fit.tail_rate_omega,
                   "rate_combo": fit.rate_combo, "ratio_d2": fit.ratio_d2,
                   "ratio_d3": fit.ratio_d3, "ratio_d4": fit.ratio_d4,
                   "window": list(fit.window)}, fh, indent=2, sort_keys=True)
    print(f"profile: omega0={sol.omega0:.10g} c0={sol.c0:.10g} "
          f"residual={sol.residual_max:.3e}")
    return 0


def _cmd_weight(cfg: ExperimentConfig, out: Path) -> int:
    sol = build_profile(cfg)
    w = build_weight(sol, y_max=cfg.energy.y_max, n_nodes=cfg.energy.weight_nodes)
    export_weight_csv(w, out / "weight.csv")
    checks = {
        "margin": weight_inequality_margin(w, sol),
        "c_lower": w.c_lower, "c_upper": w.c_upper,
        "c_d1": w.c_d1, "c_d2": w.c_d2,
        "tail_correction": tail_correction_report(w, sol),
    }
    with open(out / "weight_check.json", "w") as fh:
        json.dump(checks, fh, indent=2, sort_keys=True)
    print(f"weight: margin={checks['margin']:.3e} "
          f"sandwich=[{w.c_lower:.4g}, {w.c_upper:.4g}]")
    return 0


def _cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    derive_params(cfg.model).require_admissible()
    sim = run_simulation(cfg)
    write_simulation_artifacts(sim, out)
    print(f"simulate: {len(sim.decay_snapshots)} decay snapshots, "
          f"{len(sim.identity_snapshots)} identity snapshots, t_end={sim.t_end:g}")
    return 0


def _cmd_analyze(cfg: ExperimentConfig, out: Path) -> int:
    derive_params(cfg.model).require_admissible()
    sim = run_simulation(cfg)
    analysis = analyze_run(sim, keep_states=True)
    write_simulation_artifacts(sim, out)
    write_analysis_artifacts(analysis, sim, out)
    mu0 = None if analysis.phi_report is None else analysis.phi_report.mu0
    print(f"analyze: mu0={mu0} sup_error_slope={analysis.sup_error_slope:.4f} "
          f"identity={analysis.identity_mismatch}")
    return 0


def _cmd_report(cfg: ExperimentConfig, out: Path) -> int:
    report_path = out / "decay_report.json"
    if not report_path.exists():
        return _cmd_analyze(cfg, out)
    with open(report_path) as fh:
        report = json.load(fh)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _run_one(task) -> int:
    config_path, subcommand, out_override = task
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        print(f"config error: {exc}{key}", file=sys.stderr)
        return 2
    try:
        out = _out_dir(cfg, out_override)
    except OSError as exc:
        print(f"config error: output directory not writable: {exc}", file=sys.stderr)
        return 2
    handlers = {
        "validate": _cmd_validate,
        "profile": _cmd_profile,
        "weight": _cmd_weight,
        "simulate": _cmd_simulate,
        "analyze": _cmd_analyze,
        "report": _cmd_report,
    }
    try:
        if subcommand == "all":
            for name in ("validate", "profile", "weight", "analyze"):
                code = handlers[name](cfg, out)
                if code:
                    return code
            return 0
        return handlers[subcommand](cfg, out)
    except AssumptionError as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return 3
    except _NUMERICAL_ERRORS as exc:
        diag = out / "failure.json"
        with open(diag, "w") as fh:
            json.dump({"error": type(exc).__name__, "message": str(exc),
                       "traceback": traceback.format_exc()}, fh, indent=2)
        print(f"numerical failure: {exc} (diagnostics in {diag})", file=sys.stderr)
        return 4


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="beamlab", description=__doc__)
    parser.add_argument("subcommand", choices=_SUBCOMMANDS)
    parser.add_argument("--config", required=True, nargs="+",
                        help="experiment config file(s); multiple configs run independently")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers across configs (not within one)")
    args = parser.parse_args(argv)

    tasks = [(path, args.subcommand, args.out) for path in args.config]
    if len(tasks) > 1 and args.out is not None:
        print("--out cannot be combined with multiple configs", file=sys.stderr)
        return 2
    if args.jobs > 1 and len(tasks) > 1:
        with Pool(processes=min(args.jobs, len(tasks))) as pool:
            codes = pool.map(_run_one, tasks)
    else:
        codes = [_run_one(task) for task in tasks]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
