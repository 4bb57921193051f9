"""Simulator configuration: every transition, hazard, and sampling
parameter of the data-generating process, with strict JSON round-trip.

Unknown keys are rejected on load so a typo in a config file fails loudly
instead of silently falling back to a default. The JSON layout is
documented in docs/formats.md.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Any

from .errors import ConfigError
from .states import MODE_COARSE, MODE_CONTINUOUS, N_FHR_CATEGORIES

DEFAULT_HORIZON_CONTINUOUS = 72
DEFAULT_HORIZON_COARSE = 12


@dataclass(frozen=True)
class BaselineParams:
    """Sampling distribution of the time-fixed covariates."""

    age_mean: float = 30.0
    age_sd: float = 5.0
    parity_rate: float = 0.9      # Poisson rate, clamped at 6
    preterm_prob: float = 0.15

    def validate(self) -> None:
        if self.age_sd < 0:
            raise ConfigError("age_sd must be non-negative")
        if self.parity_rate < 0:
            raise ConfigError("parity_rate must be non-negative")
        if not 0.0 <= self.preterm_prob <= 1.0:
            raise ConfigError("preterm_prob must be in [0, 1]")


@dataclass(frozen=True)
class HazardParams:
    """Per-hour adverse-outcome hazard while in labor, on the logit scale:
    intercept + abnormal_fhr·flag + brady_persist·persist + high_sbp·high
    + per_hour·k. Zero after birth by construction."""

    intercept: float = -4.6
    abnormal_fhr: float = 1.6
    brady_persist: float = 0.8
    high_sbp: float = 0.9
    per_hour: float = 0.0


@dataclass(frozen=True)
class SurgicalRiskParams:
    """One-time adverse-outcome probability applied when a cesarean is
    performed, on the logit scale; rises with high systolic pressure."""

    intercept: float = -3.2
    high_sbp: float = 1.0


def _check_probs(name: str, probs, n: int | None = None) -> None:
    if n is not None and len(probs) != n:
        raise ConfigError(f"{name} must have {n} entries, got {len(probs)}")
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"{name} entry {p} outside [0, 1]")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ConfigError(f"{name} must sum to 1, got {sum(probs)}")


@dataclass(frozen=True)
class CoarseDynamics:
    """Finite-state dynamics: categorical vitals on an explicit grid.

    The transition law factorizes over the vitals given the current cell,
    so the full next-state distribution is the row product of the tables
    below. Time-homogeneous by default (hazard per_hour = 0), which keeps
    the process Markov in the cell alone.
    """

    fhr_initial: tuple[float, ...] = (0.60, 0.13, 0.14, 0.13)
    fhr_transition: tuple[tuple[float, ...], ...] = (
        (0.90, 0.04, 0.02, 0.04),   # from normal
        (0.45, 0.35, 0.15, 0.05),   # from transient bradycardia
        (0.25, 0.15, 0.55, 0.05),   # from persistent bradycardia
        (0.40, 0.03, 0.02, 0.55),   # from tachycardia
    )
    dilat_initial: tuple[float, ...] = (0.03, 0.07, 0.20, 0.34, 0.21, 0.10, 0.05, 0.0, 0.0, 0.0, 0.0)
    dilat_increment: tuple[float, ...] = (0.30, 0.55, 0.15)   # P(+0), P(+1), P(+2)
    sbp_initial_high: float = 0.20
    sbp_to_high: float = 0.08      # P(high next | normal now)
    sbp_stay_high: float = 0.80    # P(high next | high now)
    dbp_initial_high: float = 0.12
    dbp_to_high: float = 0.05
    dbp_stay_high: float = 0.70
    hazard: HazardParams = HazardParams()
    surgical: SurgicalRiskParams = SurgicalRiskParams()

    def validate(self) -> None:
        _check_probs("fhr_initial", self.fhr_initial, N_FHR_CATEGORIES)
        if len(self.fhr_transition) != N_FHR_CATEGORIES:
            raise ConfigError("fhr_transition must have one row per category")
        for i, row in enumerate(self.fhr_transition):
            _check_probs(f"fhr_transition[{i}]", row, N_FHR_CATEGORIES)
        _check_probs("dilat_initial", self.dilat_initial, 11)
        if any(p > 0 for p in self.dilat_initial[10:]):
            raise ConfigError("initial dilatation 10 would mean birth at hour 0")
        _check_probs("dilat_increment", self.dilat_increment, 3)
        for name in ("sbp_initial_high", "sbp_to_high", "sbp_stay_high",
                     "dbp_initial_high", "dbp_to_high", "dbp_stay_high"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} {v} outside [0, 1]")


@dataclass(frozen=True)
class ContinuousDynamics:
    """Continuous-valued dynamics: mean-reverting vitals with excursion
    events whose frequency grows with labor duration."""

    fhr_initial_mean: float = 140.0
    fhr_initial_sd: float = 10.0
    fhr_initial_min: float = 100.0
    fhr_initial_max: float = 200.0
    fhr_setpoint: float = 140.0
    fhr_revert_rate: float = 0.45
    fhr_noise_sd: float = 7.0
    brady_event_intercept: float = -3.2    # logit of P(low-FHR excursion), grows with hour
    brady_event_per_hour: float = 0.03
    brady_value_mean: float = 98.0
    brady_value_sd: float = 6.0
    persist_prob: float = 0.55             # P(episode sustained >= 3 min | FHR below lower bound)
    tachy_event_intercept: float = -3.4
    tachy_event_per_hour: float = 0.03
    tachy_value_mean: float = 172.0
    tachy_value_sd: float = 6.0
    dilat_initial_mean: float = 3.0
    dilat_initial_sd: float = 1.0
    dilat_initial_min: float = 0.0
    dilat_initial_max: float = 6.0
    dilat_rate_mean: float = 0.5           # cm/hour before the parity factor
    dilat_rate_sd: float = 0.3
    parous_rate_factor: float = 1.3        # applied when parity >= 1
    sbp_initial_mean: float = 130.0
    sbp_initial_sd: float = 18.0
    sbp_setpoint: float = 128.0
    sbp_revert_rate: float = 0.15
    sbp_noise_sd: float = 7.0
    dbp_initial_mean: float = 82.0
    dbp_initial_sd: float = 10.0
    dbp_setpoint: float = 82.0
    dbp_revert_rate: float = 0.2
    dbp_noise_sd: float = 5.0
    hazard: HazardParams = HazardParams(intercept=-5.2, abnormal_fhr=1.6,
                                        brady_persist=0.8, high_sbp=0.9, per_hour=0.035)
    surgical: SurgicalRiskParams = SurgicalRiskParams()

    def validate(self) -> None:
        for name in ("fhr_initial_sd", "fhr_noise_sd", "brady_value_sd", "tachy_value_sd",
                     "dilat_initial_sd", "dilat_rate_sd", "sbp_initial_sd", "sbp_noise_sd",
                     "dbp_initial_sd", "dbp_noise_sd"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0.0 <= self.persist_prob <= 1.0:
            raise ConfigError("persist_prob must be in [0, 1]")
        if not 0.0 <= self.fhr_revert_rate <= 1.0:
            raise ConfigError("fhr_revert_rate must be in [0, 1]")


@dataclass(frozen=True)
class ScmConfig:
    """Full data-generating-process configuration.

    Exactly one of ``coarse`` / ``continuous`` is active, selected by
    ``mode``. ``horizon`` is the last simulated hour K.
    """

    mode: str
    horizon: int
    seed: int
    baseline: BaselineParams = BaselineParams()
    coarse: CoarseDynamics | None = None
    continuous: ContinuousDynamics | None = None

    def __post_init__(self):
        if self.mode not in (MODE_COARSE, MODE_CONTINUOUS):
            raise ConfigError(f"mode must be 'coarse' or 'continuous', got {self.mode!r}")
        if self.horizon < 1:
            raise ConfigError("horizon K must be >= 1")
        if self.mode == MODE_COARSE and self.coarse is None:
            raise ConfigError("coarse mode requires a 'coarse' dynamics block")
        if self.mode == MODE_CONTINUOUS and self.continuous is None:
            raise ConfigError("continuous mode requires a 'continuous' dynamics block")
        self.baseline.validate()
        if self.coarse is not None:
            self.coarse.validate()
        if self.continuous is not None:
            self.continuous.validate()

    @property
    def dynamics(self) -> CoarseDynamics | ContinuousDynamics:
        return self.coarse if self.mode == MODE_COARSE else self.continuous

    def to_json_dict(self) -> dict:
        return _to_jsonable(self)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent, sort_keys=True)


def default_config(mode: str, seed: int = 0, horizon: int | None = None, **overrides) -> ScmConfig:
    """Default configuration for either mode. Keyword overrides replace
    top-level ScmConfig fields."""
    if mode == MODE_COARSE:
        if horizon is None:
            horizon = DEFAULT_HORIZON_COARSE
        cfg = ScmConfig(mode=mode, horizon=horizon, seed=seed, coarse=CoarseDynamics())
    elif mode == MODE_CONTINUOUS:
        if horizon is None:
            horizon = DEFAULT_HORIZON_CONTINUOUS
        cfg = ScmConfig(mode=mode, horizon=horizon, seed=seed, continuous=ContinuousDynamics())
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _to_jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {
            f.name: _to_jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
            if getattr(obj, f.name) is not None
        }
    if isinstance(obj, tuple):
        return [_to_jsonable(v) for v in obj]
    return obj


def _dataclass_from_dict(cls, data: Any, path: str):
    """Strict recursive dataclass constructor: rejects unknown keys and
    type-mismatched blocks."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    field_map = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(field_map)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = field_map[name]
        kwargs[name] = _convert_field(f.type, value, f"{path}.{name}")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_NESTED = {
    "BaselineParams": BaselineParams,
    "HazardParams": HazardParams,
    "SurgicalRiskParams": SurgicalRiskParams,
    "CoarseDynamics | None": CoarseDynamics,
    "ContinuousDynamics | None": ContinuousDynamics,
}


def _convert_field(type_name: str, value: Any, path: str) -> Any:
    cls = _NESTED.get(type_name)
    if cls is not None:
        return _dataclass_from_dict(cls, value, path)
    if isinstance(value, list):
        return tuple(
            tuple(v) if isinstance(v, list) else v
            for v in value
        )
    return value


def config_from_json_dict(data: dict) -> ScmConfig:
    return _dataclass_from_dict(ScmConfig, data, "scm")


def load_config(path: str) -> ScmConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_json_dict(data)


def save_config(cfg: ScmConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cfg.to_json())
        fh.write("\n")
