"""Run configuration: YAML key-value file + command-line overrides."""

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .measurement import DEFAULT_MUB_WEIGHTS
from .models import ModelKind, build_model

POVM_LABELS = ("bell", "aamcm", "mem", "mub", "computational")
FIXED_POVM_DIMS = {"bell": 4, "aamcm": 4, "mem": 4}  # mub/computational adapt to the model
WEIGHT_CHOICES = ("fubini-study", "identity")
FORMATS = ("csv", "json")
DEFAULT_SEED = 2024


class ConfigError(ValueError):
    pass


def fig3_phis(n: int = 10, margin: float = 0.1) -> list[float]:
    """n evenly spaced values strictly inside (margin, pi/2 - margin)."""
    return np.linspace(margin, math.pi / 2 - margin, n + 2)[1:-1].tolist()


@dataclass(frozen=True)
class RunConfig:
    model: str = "mcm"
    povm: str = "bell"
    mub_weights: dict = field(default_factory=lambda: dict(DEFAULT_MUB_WEIGHTS))
    points: Optional[list] = None  # explicit [[theta, phi], ...]
    thetas: list = field(default_factory=lambda: [0.4, 1.0, 1.4])
    phis: list = field(default_factory=fig3_phis)
    m: int = 500
    n_trials: int = 1000
    seed: int = DEFAULT_SEED
    grid: int = 201
    theta_range: tuple = (0.0, math.pi / 2)
    phi_range: tuple = (0.0, math.pi / 2)
    weight: str = "fubini-study"
    estimator: str = "mean"
    workers: int = 1
    out: Optional[str] = None
    format: str = "csv"

    def lambda_points(self) -> list[tuple[float, float]]:
        if self.points is not None:
            return [(float(t), float(p)) for t, p in self.points]
        return [(float(t), float(p)) for t in self.thetas for p in self.phis]


FIG3_DEFAULTS: dict = {}
FIG4_DEFAULTS: dict = {
    "thetas": np.linspace(0.3, 2.8, 10).tolist(),
    "phis": [math.pi / 4],
    "theta_range": (0.0, math.pi),
}


def _known_keys() -> set[str]:
    return {f.name for f in fields(RunConfig)}


def validate(cfg: RunConfig) -> RunConfig:
    try:
        ModelKind(cfg.model)
    except ValueError:
        raise ConfigError(f"unknown model {cfg.model!r}; choose from {[k.value for k in ModelKind]}") from None
    if cfg.povm not in POVM_LABELS:
        raise ConfigError(f"unknown povm {cfg.povm!r}; choose from {POVM_LABELS}")
    if cfg.povm in FIXED_POVM_DIMS and FIXED_POVM_DIMS[cfg.povm] != build_model(cfg.model).dim:
        raise ConfigError(f"povm {cfg.povm!r} acts on dimension {FIXED_POVM_DIMS[cfg.povm]}, "
                          f"model {cfg.model!r} has dimension {build_model(cfg.model).dim}")
    if cfg.weight not in WEIGHT_CHOICES:
        raise ConfigError(f"unknown weight {cfg.weight!r}; choose from {WEIGHT_CHOICES}")
    if cfg.format not in FORMATS:
        raise ConfigError(f"unknown format {cfg.format!r}")
    if cfg.estimator not in ("mean", "map"):
        raise ConfigError(f"unknown estimator {cfg.estimator!r}")
    if cfg.m <= 0 or cfg.n_trials <= 0 or cfg.grid <= 1 or cfg.workers <= 0:
        raise ConfigError("m, n_trials, workers must be positive and grid > 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if not isinstance(cfg.mub_weights, dict) or abs(sum(cfg.mub_weights.values()) - 1.0) > 1e-12:
        raise ConfigError("mub_weights must be a mapping of basis -> weight summing to 1")
    for name in ("theta_range", "phi_range"):
        lo, hi = getattr(cfg, name)
        if not hi > lo:
            raise ConfigError(f"{name} must be increasing")
    try:
        pts = cfg.lambda_points()
    except (TypeError, ValueError):
        raise ConfigError("points must be a list of [theta, phi] pairs") from None
    for t, p in pts:
        if not (0 <= t <= math.pi and 0 <= p <= 2 * math.pi):
            raise ConfigError(f"parameter point ({t}, {p}) outside the model domain")
    return cfg


def load(path: Optional[str] = None, defaults: Optional[dict] = None, **overrides) -> RunConfig:
    """Merge defaults, the YAML file at ``path`` and non-None ``overrides``."""
    values = dict(defaults or {})
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(values) - _known_keys()
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("theta_range", "phi_range"):
        if key in values:
            values[key] = tuple(float(x) for x in values[key])
    try:
        cfg = replace(RunConfig(), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return validate(cfg)
