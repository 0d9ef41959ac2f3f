"""Experiment orchestration: simulate, transform, measure, report.

This is the layer the CLI drives.  A simulation produces physical snapshots on
two schedules derived from the configured cadences in self-similar time:

  * a decay series (coarse cadence over the whole run) feeding the energy
    ledger, the master-form fit and the physical-space convergence slope;
  * an identity window (dense cadence shortly after launch) feeding the
    balance-law checks.

Snapshot requests are snapped to the fixed-step time grid; all analysis uses
the exact s of the landed steps.  The analysis y-windows are clipped so the
stretched coordinates never leave the physical grid: the window shrinks like
L / sqrt(R(t)+1), the price of a fixed truncated domain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .beam_solver import (BeamSolver, HOMOGENEOUS, PerturbationSpec, PhysicalState,
                          ProfileBoundary, SpatialGrid, initialize)
from .config import ExperimentConfig
from .energy import (DecayReport, EnergySample, EnergyWeights, energy_suite,
                     fit_decay, identity_check)
from .model import (ModelParams, coeff_eval, derive_params, gamma_eval,
                    r_inverse)
from .profile import ProfileSolution, fit_asymptotics, solve_profile
from .selfsim import structural_terms, to_selfsimilar
from .weight import (WeightFunction, build_weight, tail_correction_report,
                     weight_inequality_margin)

__all__ = [
    "SimulationResult",
    "AnalysisResult",
    "build_profile",
    "run_simulation",
    "analyze_run",
    "write_simulation_artifacts",
    "write_analysis_artifacts",
]


def _snap_times(params: ModelParams, s_values, t0: float, dt: float, n_steps: int):
    """Map s-targets to step indices on the fixed time grid (unique, sorted)."""
    idx = sorted({min(max(int(round((r_inverse(params, math.expm1(s)) - t0) / dt)), 0),
                  n_steps) for s in s_values})
    return idx


@dataclass
class SimulationResult:
    config: ExperimentConfig
    profile: ProfileSolution
    grid: SpatialGrid
    dt: float
    t_end: float
    s0: float
    decay_snapshots: list[PhysicalState] = field(default_factory=list)
    identity_snapshots: list[PhysicalState] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


@dataclass
class AnalysisResult:
    energy_samples: list[EnergySample]
    phi_report: DecayReport | None
    sup_error_slope: float
    sup_error_points: int
    identity_mismatch: dict
    weight_margin: float
    weight_checks: dict
    profile_checks: dict
    nonlinear_identity_max: float
    h_envelope_ratio: float
    k_bound_ratio: float
    coverage_end: float
    selfsim_states: list | None = None  # (state, terms) pairs when kept


def build_profile(cfg: ExperimentConfig) -> ProfileSolution:
    derived = derive_params(cfg.model)
    return solve_profile(
        cfg.model.p, derived.theta, c0=cfg.profile.c0, omega0=cfg.profile.omega0,
        z_max=cfg.profile.z_max, n_nodes=cfg.profile.nodes, tol=cfg.profile.tol,
        fit_window=cfg.profile.fit_window)


def run_simulation(cfg: ExperimentConfig, profile: ProfileSolution | None = None,
                   check_assumptions: bool = True) -> SimulationResult:
    derived = derive_params(cfg.model)
    if check_assumptions:
        derived.require_admissible()
    if profile is None:
        profile = build_profile(cfg)

    grid = SpatialGrid.symmetric(cfg.grid.L, cfg.grid.n)
    dt = cfg.grid.dt
    t0, t_end = cfg.run.t0, cfg.run.t_end
    n_steps = int(round((t_end - t0) / dt))
    t_end = t0 + n_steps * dt

    coverage = grid.coverage_ratio(coeff_eval(cfg.model, t_end).R + 1.0)
    if coverage < cfg.run.min_coverage:
        raise ValueError(
            f"grid covers only |y| <= {coverage:.2f} at t_end; below the configured "
            f"minimum {cfg.run.min_coverage}")

    boundary = (ProfileBoundary(cfg.model, profile, grid.L)
                if cfg.run.boundary == "profile" else HOMOGENEOUS)
    pert = PerturbationSpec(amplitude=cfg.perturbation.delta,
                            width=cfg.perturbation.width,
                            applies_to=cfg.perturbation.applies_to)
    state0 = initialize(cfg.model, profile, t0, grid, pert, boundary,
                        cfg.run.boundary_tol)

    s0 = coeff_eval(cfg.model, t0).s
    s_end = coeff_eval(cfg.model, t_end).s
    n_decay = int(math.floor((s_end - s0) / cfg.run.snapshot_ds))
    decay_s = [s0 + k * cfg.run.snapshot_ds for k in range(n_decay + 1)]
    ident_n = int(round(cfg.run.identity_span / cfg.run.identity_ds))
    ident_s = [s0 + cfg.run.identity_offset + k * cfg.run.identity_ds
               for k in range(ident_n + 1)]
    ident_s = [s for s in ident_s if s <= s_end]

    decay_idx = _snap_times(cfg.model, decay_s, t0, dt, n_steps)
    ident_idx = _snap_times(cfg.model, ident_s, t0, dt, n_steps)
    all_idx = sorted(set(decay_idx) | set(ident_idx))
    sample_times = [t0 + i * dt for i in all_idx]

    solver = BeamSolver(cfg.model, grid, boundary)
    cap = 2.0 * float(np.max(np.abs(state0.u)))
    snapshots = solver.evolve(state0, t_end, sample_times, dt, amplitude_cap=cap)
    by_index = {int(round((st.t - t0) / dt)): st for st in snapshots}

    result = SimulationResult(
        config=cfg, profile=profile, grid=grid, dt=dt, t_end=t_end, s0=s0,
        decay_snapshots=[by_index[i] for i in decay_idx],
        identity_snapshots=[by_index[i] for i in ident_idx],
    )
    result.manifest = {
        "version": __version__,
        "model": {"alpha": cfg.model.alpha, "beta": cfg.model.beta,
                  "b0": cfg.model.b0, "p": cfg.model.p},
        "derived": {"theta": derived.theta, "varsigma": derived.varsigma,
                    "mu": derived.mu, "A0": derived.A0, "p_crit": derived.p_crit},
        "profile": {"c0": profile.c0, "omega0": profile.omega0,
                    "z_max": profile.z_max, "nodes": len(profile.z_grid),
                    "residual_max": profile.residual_max},
        "grid": {"L": grid.L, "n": grid.n, "dx": grid.dx},
        "dt": dt,
        "run": {"t0": t0, "t_end": t_end, "s0": s0, "s_end": s_end,
                "boundary": cfg.run.boundary,
                "coverage_end": coverage,
                "snapshot_ds": cfg.run.snapshot_ds,
                "identity_ds": cfg.run.identity_ds,
                "identity_offset": cfg.run.identity_offset,
                "identity_span": cfg.run.identity_span},
        "perturbation": {"delta": cfg.perturbation.delta,
                         "width": cfg.perturbation.width,
                         "applies_to": cfg.perturbation.applies_to,
                         "seed": None},
        "energy": {"rho": cfg.energy.rho, "vartheta": cfg.energy.vartheta,
                   "zeta": cfg.energy.zeta, "omega": cfg.energy.omega,
                   "fit_start": cfg.energy.fit_start, "fit_end": cfg.energy.fit_end},
        "decay_sample_t": [st.t for st in result.decay_snapshots],
        "identity_sample_t": [st.t for st in result.identity_snapshots],
    }
    return result


def _analysis_grid(sim: SimulationResult, snapshots, y_max_cfg: float,
                   n_nodes: int) -> np.ndarray:
    t_last = snapshots[-1].t
    stretch = math.sqrt(coeff_eval(sim.config.model, t_last).R + 1.0)
    y_eff = min(y_max_cfg, 0.98 * sim.grid.L / stretch)
    return np.linspace(-y_eff, y_eff, n_nodes)


def analyze_run(sim: SimulationResult, weight_fn: WeightFunction | None = None,
                keep_states: bool = False) -> AnalysisResult:
    cfg = sim.config
    params = cfg.model
    profile = sim.profile
    derived = derive_params(params)
    if weight_fn is None:
        weight_fn = build_weight(profile, y_max=cfg.energy.y_max,
                                 n_nodes=cfg.energy.weight_nodes)
    weights = EnergyWeights(rho=cfg.energy.rho, vartheta=cfg.energy.vartheta,
                            zeta=cfg.energy.zeta, omega_w=cfg.energy.omega)

    # ---- decay series ----------------------------------------------------
    y_decay = _analysis_grid(sim, sim.decay_snapshots, cfg.energy.y_max,
                             cfg.energy.y_nodes)
    samples: list[EnergySample] = []
    kept: list | None = [] if keep_states else None
    nl_identity_max = 0.0
    for snap in sim.decay_snapshots:
        ss = to_selfsimilar(params, profile, snap, y_decay)
        terms = structural_terms(params, profile, ss)
        if kept is not None:
            kept.append((ss, terms))
        g = gamma_eval(params, profile, snap.t, snap.grid.xs)
        sup_err = float(np.max(np.abs(snap.u - g.gamma)))
        samples.append(energy_suite(ss, params, profile, weight_fn, weights,
                                    terms=terms, sup_error=sup_err))
        om_pm1 = profile.eval(y_decay, 0) ** (params.p - 1.0)
        target = params.p * om_pm1 * ss.f
        nl_gap = np.max(np.abs(terms.N_of_f - terms.k - target)
                        / (np.abs(target) + 1e-30))
        nl_identity_max = max(nl_identity_max, float(nl_gap))

    s0 = sim.s0
    fit_lo, fit_hi = s0 + cfg.energy.fit_start, s0 + cfg.energy.fit_end
    phi_report = None
    phi_series = [(e.s, e.phi) for e in samples]
    try:
        phi_report = fit_decay(phi_series, (fit_lo, fit_hi))
    except ValueError:
        phi_report = None

    # physical-space convergence: log-log slope of sup|u - Gamma| against
    # R(t)+1 over the final decade of the run
    rp1 = np.array([math.expm1(e.s) + 1.0 for e in samples])
    sup = np.array([e.sup_error for e in samples])
    mask = (rp1 >= rp1[-1] / 10.0) & (sup > 0.0)
    if mask.sum() >= 2:
        sup_error_slope = float(np.polyfit(np.log(rp1[mask]), np.log(sup[mask]), 1)[0])
    else:
        sup_error_slope = math.nan

    # forcing envelope and nonlinear-bound stability over the fit window
    env = [(e.s, e.norm_h_H01 * math.exp(derived.mu * e.s)) for e in samples
           if fit_lo - 0.5 <= e.s <= fit_hi and math.isfinite(e.norm_h_H01)]
    if env:
        vals = [v for _, v in env]
        h_ratio = max(vals) / min(vals) if min(vals) > 0 else math.inf
    else:
        h_ratio = math.nan
    kb = [e.norm_k_L21 / e.norm_f_L21 for e in samples
          if e.norm_f_L21 > 0 and math.isfinite(e.norm_k_L21)]
    k_ratio = (max(kb) / min(kb)) if kb else math.nan

    # ---- identity window --------------------------------------------------
    identity_mismatch = {}
    if len(sim.identity_snapshots) >= 3:
        y_ident = _analysis_grid(sim, sim.identity_snapshots, cfg.energy.y_max,
                                 cfg.energy.y_nodes)
        traj = []
        for snap in sim.identity_snapshots:
            ss = to_selfsimilar(params, profile, snap, y_ident)
            traj.append((ss, structural_terms(params, profile, ss)))
        for which in ("E2", "E1"):
            identity_mismatch[which] = identity_check(traj, params, which, 0)

    # ---- profile / weight checks ------------------------------------------
    fit = fit_asymptotics(profile)
    th = derived.theta
    profile_checks = {
        "residual_max": profile.residual_max,
        "c0_at_20_rel": abs(profile.eval(20.0) * 20.0 ** (2 * th) - profile.c0) / profile.c0,
        "tail_rate_omega": fit.tail_rate_omega,
        "rate_combo": fit.rate_combo,
        "rate_combo_target": -(2 * th + 2 * derived.varsigma),
        "ratio_d2": fit.ratio_d2,
    }
    y20 = min(20.0, weight_fn.y_max)
    wm = weight_inequality_margin(weight_fn, profile)
    q20 = float(weight_fn.eval(y20)) * y20 ** (1.0 - 4.0 * th)
    # slope over the outer half of the weight grid ([10, 20] at the default
    # extent; proportionally farther out when the profile regime needs it)
    wmask = (weight_fn.y_grid >= 0.5 * weight_fn.y_max)
    slope_q = float(np.polyfit(np.log(weight_fn.y_grid[wmask]),
                               np.log(weight_fn.q[wmask]), 1)[0])
    om = profile.eval(weight_fn.y_grid, 0)
    qdiff_rhs = (0.5 * weight_fn.y_grid * weight_fn.q
                 - (om**-2 - profile.eval(0.0) ** -2))
    qdiff_rel = float(np.max(np.abs(weight_fn.q1 - qdiff_rhs)
                             / (np.abs(qdiff_rhs) + 1e-30)))
    weight_checks = {
        "margin": wm,
        "q20_scaled": q20,
        "q20_target": 2.0 / profile.c0**2,
        "loglog_slope_outer": slope_q,
        "slope_window": [0.5 * weight_fn.y_max, weight_fn.y_max],
        "slope_target": 4.0 * th - 1.0,
        "qdiff_rel_max": qdiff_rel,
        "tail_correction": tail_correction_report(weight_fn, profile),
    }

    coverage_end = sim.grid.coverage_ratio(math.expm1(samples[-1].s) + 1.0)
    return AnalysisResult(
        energy_samples=samples, phi_report=phi_report, sup_error_slope=sup_error_slope,
        sup_error_points=int(mask.sum()), identity_mismatch=identity_mismatch,
        weight_margin=wm, weight_checks=weight_checks,
        profile_checks=profile_checks, nonlinear_identity_max=nl_identity_max,
        h_envelope_ratio=h_ratio, k_bound_ratio=k_ratio,
        coverage_end=coverage_end, selfsim_states=kept,
    )


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

_ENERGY_COLUMNS = ("s", "t", "phi", "e2_01", "e_q", "e_rho", "e1_01", "e2_1_0",
                   "e1_1_0", "e_full", "norm_g_L21", "norm_fyy_L2", "norm_gy_L2",
                   "sup_error", "edge_fraction")


def write_simulation_artifacts(sim: SimulationResult, out_dir) -> list[Path]:
    from .beam_solver import export_snapshot_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "manifest.json"]
    with open(written[0], "w") as fh:
        json.dump(sim.manifest, fh, indent=2, sort_keys=True)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for snap in sim.decay_snapshots:
        path = snap_dir / f"t_{snap.t:012.4f}.csv"
        export_snapshot_csv(snap, path)
        written.append(path)
    return written


def write_analysis_artifacts(analysis: AnalysisResult, sim: SimulationResult,
                             out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    energy_path = out / "energy.csv"
    rows = [[getattr(e, col) for col in _ENERGY_COLUMNS]
            for e in analysis.energy_samples]
    np.savetxt(energy_path, np.array(rows), delimiter=",",
               header=",".join(_ENERGY_COLUMNS), comments="", fmt="%.16g")

    report = {
        "phi_decay": (None if analysis.phi_report is None else {
            "mu0": analysis.phi_report.mu0,
            "intercept": analysis.phi_report.intercept,
            "rms_residual": analysis.phi_report.rms_residual,
            "window": list(analysis.phi_report.window),
        }),
        "sup_error_slope": analysis.sup_error_slope,
        "sup_error_points": analysis.sup_error_points,
        "theta": derive_params(sim.config.model).theta,
        "identity_mismatch": analysis.identity_mismatch,
        "weight": analysis.weight_checks,
        "profile": analysis.profile_checks,
        "nonlinear_identity_max": analysis.nonlinear_identity_max,
        "h_envelope_ratio": analysis.h_envelope_ratio,
        "k_bound_ratio": analysis.k_bound_ratio,
        "coverage_end": analysis.coverage_end,
    }
    report_path = out / "decay_report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    written = [energy_path, report_path]

    if analysis.selfsim_states:
        from .selfsim import export_selfsim_csv

        ss_dir = out / "selfsim"
        ss_dir.mkdir(exist_ok=True)
        for state, terms in analysis.selfsim_states:
            path = ss_dir / f"s_{state.s:08.4f}.csv"
            export_selfsim_csv(state, terms, path)
            written.append(path)
    return written
