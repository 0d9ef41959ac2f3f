"""Sectioned key-value experiment configuration.

One experiment per INI file; see docs/config.md for the schema.  The [model]
block is mandatory, everything else carries defaults matching the canonical
desk-scale setup.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .model import ModelParams

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]


class ConfigError(RuntimeError):
    """Unparseable or incomplete configuration; carries the offending key."""

    def __init__(self, message: str, key: str | None = None) -> None:
        super().__init__(message)
        self.key = key


@dataclass
class ProfileBlock:
    c0: float | None = 1.0
    omega0: float | None = None
    z_max: float = 25.0
    nodes: int = 4001
    tol: float = 1e-10
    fit_window_lo: float | None = None
    fit_window_hi: float | None = None

    @property
    def fit_window(self) -> tuple[float, float] | None:
        if self.fit_window_lo is None or self.fit_window_hi is None:
            return None
        return (self.fit_window_lo, self.fit_window_hi)


@dataclass
class GridBlock:
    L: float = 60.0
    n: int = 1201
    dt_factor: float = 0.25

    @property
    def dt(self) -> float:
        return self.dt_factor * 2.0 * self.L / (self.n - 1)


@dataclass
class RunBlock:
    t0: float = 10.0
    t_end: float = 400.0
    snapshot_ds: float = 0.05
    identity_ds: float = 0.01
    identity_offset: float = 0.15
    identity_span: float = 0.35
    boundary: str = "profile"  # "profile" anchors end data to the ansatz
    boundary_tol: float = 1e-6
    min_coverage: float = 2.5  # smallest acceptable L / sqrt(R(t_end)+1)


@dataclass
class PerturbationBlock:
    delta: float = 1e-3
    width: float = 1.0
    applies_to: str = "u"


@dataclass
class EnergyBlock:
    rho: float = 10.0
    vartheta: float = 0.1
    zeta: float = 0.1
    omega: float = 0.1
    fit_start: float = 1.0   # offsets from s0 for the decay-fit window
    fit_end: float = 4.0
    y_max: float = 20.0
    y_nodes: int = 2001
    weight_nodes: int = 2001


@dataclass
class OutputBlock:
    directory: str = "out"
    formats: str = "csv,json"


@dataclass
class ExperimentConfig:
    model: ModelParams
    profile: ProfileBlock = field(default_factory=ProfileBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    run: RunBlock = field(default_factory=RunBlock)
    perturbation: PerturbationBlock = field(default_factory=PerturbationBlock)
    energy: EnergyBlock = field(default_factory=EnergyBlock)
    output: OutputBlock = field(default_factory=OutputBlock)


_FLOAT_KEYS = {
    "profile": {"c0", "omega0", "z_max", "tol", "fit_window_lo", "fit_window_hi"},
    "grid": {"L", "dt_factor"},
    "run": {"t0", "t_end", "snapshot_ds", "identity_ds", "identity_offset",
            "identity_span", "boundary_tol", "min_coverage"},
    "perturbation": {"delta", "width"},
    "energy": {"rho", "vartheta", "zeta", "omega", "fit_start", "fit_end", "y_max"},
}
_INT_KEYS = {
    "profile": {"nodes"},
    "grid": {"n"},
    "energy": {"y_nodes", "weight_nodes"},
}
_STR_KEYS = {
    "run": {"boundary"},
    "perturbation": {"applies_to"},
    "output": {"directory", "formats"},
}


def _apply_section(block, section: str, items: dict) -> None:
    for key, raw in items.items():
        if key in _FLOAT_KEYS.get(section, ()):
            value = float(raw)
        elif key in _INT_KEYS.get(section, ()):
            value = int(raw)
        elif key in _STR_KEYS.get(section, ()):
            value = raw
        else:
            raise ConfigError(f"unknown key '{key}' in section [{section}]", key)
        setattr(block, key, value)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive (L vs l)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc

    if "model" not in parser:
        raise ConfigError("missing [model] section", "model")
    model_items = dict(parser["model"])
    for key in ("alpha", "beta", "b0", "p"):
        if key not in model_items:
            raise ConfigError(f"missing required key '{key}' in [model]", key)
    try:
        model = ModelParams(alpha=float(model_items["alpha"]),
                            beta=float(model_items["beta"]),
                            b0=float(model_items["b0"]),
                            p=float(model_items["p"]))
    except ValueError as exc:
        raise ConfigError(f"invalid [model] values: {exc}") from exc
    extra = set(model_items) - {"alpha", "beta", "b0", "p"}
    if extra:
        key = sorted(extra)[0]
        raise ConfigError(f"unknown key '{key}' in section [model]", key)

    cfg = ExperimentConfig(model=model)
    for section, block in (("profile", cfg.profile), ("grid", cfg.grid),
                           ("run", cfg.run), ("perturbation", cfg.perturbation),
                           ("energy", cfg.energy), ("output", cfg.output)):
        if section in parser:
            try:
                _apply_section(block, section, dict(parser[section]))
            except ValueError as exc:
                raise ConfigError(f"invalid value in [{section}]: {exc}") from exc

    if "profile" in parser and "omega0" in parser["profile"]:
        if "c0" in parser["profile"]:
            raise ConfigError("specify only one of c0 and omega0 in [profile]", "c0")
        cfg.profile.c0 = None
    if cfg.run.t0 < 1.0:
        raise ConfigError("t0 must be at least 1", "t0")
    if cfg.run.boundary not in ("profile", "homogeneous"):
        raise ConfigError("boundary must be 'profile' or 'homogeneous'", "boundary")
    return cfg
