"""Shared fixtures: the canonical and cross-regression experiments.

The expensive artifacts (profile solves, full simulations, analyses) are
session-scoped and timed, so the acceptance module can assert runtime budgets
without re-running anything.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from beamlab.config import ExperimentConfig
from beamlab.energy import EnergyWeights
from beamlab.experiment import analyze_run, build_profile, run_simulation
from beamlab.model import ModelParams, derive_params
from beamlab.weight import build_weight


def canonical_config() -> ExperimentConfig:
    cfg = ExperimentConfig(model=ModelParams(0.0, 0.0, 1.0, 2.5))
    cfg.output.directory = "out"
    return cfg


def cross_config() -> ExperimentConfig:
    cfg = ExperimentConfig(model=ModelParams(1.0, 0.0, 1.0, 1.8))
    cfg.profile.z_max = 80.0
    cfg.profile.fit_window_lo = 15.0
    cfg.profile.fit_window_hi = 25.0
    cfg.grid.L = 240.0
    cfg.grid.n = 4801
    cfg.run.t_end = 81.0
    # the stiff launch layer relaxes on the scale c1(s0) ~ 0.17 here, twice
    # the canonical one, so the balance-law window starts later
    cfg.run.identity_offset = 0.30
    cfg.energy.y_max = 80.0
    return cfg


@pytest.fixture(scope="session")
def canonical_params():
    return ModelParams(0.0, 0.0, 1.0, 2.5)


@pytest.fixture(scope="session")
def canonical_derived(canonical_params):
    return derive_params(canonical_params)


@pytest.fixture(scope="session")
def canonical_profile_timed():
    start = time.perf_counter()
    profile = build_profile(canonical_config())
    return profile, time.perf_counter() - start


@pytest.fixture(scope="session")
def canonical_profile(canonical_profile_timed):
    return canonical_profile_timed[0]


@pytest.fixture(scope="session")
def canonical_weight_timed(canonical_profile):
    start = time.perf_counter()
    w = build_weight(canonical_profile, y_max=20.0, n_nodes=2001)
    return w, time.perf_counter() - start


@pytest.fixture(scope="session")
def canonical_weight(canonical_weight_timed):
    return canonical_weight_timed[0]


@pytest.fixture(scope="session")
def canonical_run_timed(canonical_profile):
    start = time.perf_counter()
    sim = run_simulation(canonical_config(), profile=canonical_profile)
    return sim, time.perf_counter() - start


@pytest.fixture(scope="session")
def canonical_run(canonical_run_timed):
    return canonical_run_timed[0]


@pytest.fixture(scope="session")
def canonical_analysis_timed(canonical_run, canonical_weight):
    start = time.perf_counter()
    analysis = analyze_run(canonical_run, weight_fn=canonical_weight)
    return analysis, time.perf_counter() - start


@pytest.fixture(scope="session")
def canonical_analysis(canonical_analysis_timed):
    return canonical_analysis_timed[0]


@pytest.fixture(scope="session")
def refined_identity(canonical_profile):
    """The identity-window rerun at half dx, dt and snapshot cadence."""
    cfg = canonical_config()
    cfg.grid.n = 2401
    cfg.run.identity_ds = 0.005
    cfg.run.t_end = 20.0
    cfg.run.snapshot_ds = 0.2
    sim = run_simulation(cfg, profile=canonical_profile)
    return analyze_run(sim)


@pytest.fixture(scope="session")
def cross_profile():
    return build_profile(cross_config())


@pytest.fixture(scope="session")
def cross_weight(cross_profile):
    return build_weight(cross_profile, y_max=80.0, n_nodes=2001)


@pytest.fixture(scope="session")
def cross_run(cross_profile):
    return run_simulation(cross_config(), profile=cross_profile)


@pytest.fixture(scope="session")
def cross_analysis(cross_run, cross_weight):
    return analyze_run(cross_run, weight_fn=cross_weight)


@pytest.fixture(scope="session")
def cross_refined_identity(cross_profile):
    cfg = cross_config()
    cfg.grid.n = 9601
    cfg.run.identity_ds = 0.005
    cfg.run.t_end = 22.0
    cfg.run.snapshot_ds = 0.2
    sim = run_simulation(cfg, profile=cross_profile)
    return analyze_run(sim, weight_fn=build_weight(cross_profile, y_max=80.0,
                                                   n_nodes=1001))


@pytest.fixture(scope="session")
def default_weights():
    return EnergyWeights()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
