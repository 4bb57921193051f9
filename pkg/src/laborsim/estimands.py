"""Machine-readable estimand specifications.

An estimand pins down the five elements of a what-if risk question: the
population (the at-risk set by default), the hour at which the prediction
is consulted, the intervention option held hypothetically, the outcome and
its horizon (absolute hour or offset from the consultation hour), and the
predictors conditioned on.

Seven built-in estimands cover the case study: at the start of labor,
risk under immediate cesarean (1), vaginal delivery throughout (2),
vaginal for one hour then usual care (3), and a commit-to-threshold-rule
option (4); and at any in-labor hour, vaginal throughout (5), vaginal for
one hour then usual care (6), and the same with a one-hour horizon (7).
Estimands 5 and 6 consulted at hour 0 reduce exactly to 2 and 3.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError
from .regimes import (
    DynamicFhr,
    FixThenNatural,
    Regime,
    VaginalOnly,
    ImmediateCesarean,
    regime_from_json_dict,
    regime_to_json_dict,
)
from .states import PatientState

OUTCOME_COMPOSITE = "composite_adverse"
POPULATION_AT_RISK = "at_risk"

# Covariates available at every consultation hour, matching the dataset
# column names.
PREDICTOR_COLUMNS = (
    "maternal_age", "parity", "history_preterm",
    "fhr", "brady_persist", "dilatation", "sbp", "dbp",
)

METHOD_ORACLE_MC = "oracle_mc"
METHOD_ORACLE_EXACT = "oracle_exact"
METHOD_NAIVE = "naive"
METHOD_GCOMP = "gcomp"
METHOD_ICE = "ice"
_METHODS = (METHOD_ORACLE_MC, METHOD_ORACLE_EXACT, METHOD_NAIVE, METHOD_GCOMP, METHOD_ICE)


@dataclass(frozen=True)
class Horizon:
    """Outcome evaluation time: a fixed hour, or an offset from the
    consultation hour."""

    kind: str
    value: int

    def __post_init__(self):
        if self.kind not in ("absolute", "relative"):
            raise ConfigError("horizon kind must be 'absolute' or 'relative'")
        if self.kind == "relative" and self.value < 1:
            raise ConfigError("relative horizon must be >= 1 hour")
        if self.value < 0:
            raise ConfigError("horizon must be non-negative")

    @classmethod
    def absolute(cls, hour: int) -> "Horizon":
        return cls("absolute", hour)

    @classmethod
    def relative(cls, hours: int) -> "Horizon":
        return cls("relative", hours)

    def resolve(self, k: int) -> int:
        """Absolute outcome hour when consulted at hour ``k``."""
        return self.value if self.kind == "absolute" else k + self.value


@dataclass(frozen=True)
class EstimandSpec:
    """Five-element estimand for prediction under an intervention option."""

    moment_of_use: int
    regime: Regime
    horizon: Horizon
    population: str = POPULATION_AT_RISK
    outcome: str = OUTCOME_COMPOSITE
    predictors: tuple[str, ...] = PREDICTOR_COLUMNS

    def __post_init__(self):
        if self.moment_of_use < 0:
            raise ConfigError("moment_of_use must be a non-negative hour")
        if self.population != POPULATION_AT_RISK:
            raise ConfigError(f"unknown population {self.population!r}")
        if self.outcome != OUTCOME_COMPOSITE:
            raise ConfigError(f"unknown outcome {self.outcome!r}")
        if self.horizon.kind == "absolute" and self.horizon.value <= self.moment_of_use:
            raise ConfigError(
                f"absolute horizon {self.horizon.value} must exceed moment of use {self.moment_of_use}"
            )
        unknown = set(self.predictors) - set(PREDICTOR_COLUMNS)
        if unknown:
            raise ConfigError(f"unknown predictors {sorted(unknown)}")

    @property
    def horizon_hour(self) -> int:
        return self.horizon.resolve(self.moment_of_use)

    def admits(self, state: PatientState) -> bool:
        """Whether a state belongs to the estimand's population at its
        consultation hour."""
        return state.z == 1 and state.k == self.moment_of_use


@dataclass(frozen=True)
class RiskEstimate:
    """A probability with its Monte Carlo uncertainty and provenance."""

    p: float
    se: float
    n: int
    method: str
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"probability {self.p} outside [0, 1]")
        if self.se < 0.0:
            raise ConfigError("standard error must be non-negative")
        if self.method == METHOD_ORACLE_EXACT and self.se != 0.0:
            raise ConfigError("exact oracle estimates carry zero standard error")
        if self.method not in _METHODS:
            raise ConfigError(f"unknown method {self.method!r}")


BUILTIN_IDS = (1, 2, 3, 4, 5, 6, 7)

_BUILTIN_LABELS = {
    1: "immediate cesarean",
    2: "vaginal delivery only",
    3: "vaginal now, usual care after",
    4: "cesarean at first abnormal FHR",
    5: "vaginal delivery only from hour k",
    6: "vaginal this hour, usual care after",
    7: "vaginal this hour, one-hour horizon",
}


def builtin_label(estimand_id: int, k: int | None = None) -> str:
    label = _BUILTIN_LABELS[estimand_id]
    return label if k is None else f"{label} (consulted at hour {k})"


def builtin_estimand(estimand_id: int, k: int, horizon: int = 72) -> EstimandSpec:
    """The built-in estimand ``estimand_id`` consulted at hour ``k``.

    Estimands 1-4 are start-of-labor questions and require ``k = 0``;
    5-7 may be consulted at any in-labor hour. ``horizon`` sets the
    absolute outcome hour for estimands 1-6 (estimand 7 always uses the
    next hour).
    """
    if estimand_id not in BUILTIN_IDS:
        raise ConfigError(f"estimand id must be in 1..7, got {estimand_id}")
    if estimand_id <= 4 and k != 0:
        raise ConfigError(f"estimand {estimand_id} is defined at the start of labor (k=0), got k={k}")
    regimes: dict[int, Regime] = {
        1: ImmediateCesarean(),
        2: VaginalOnly(),
        3: FixThenNatural(fix_action=0, fix_hours=1),
        4: DynamicFhr(),
        5: VaginalOnly(),
        6: FixThenNatural(fix_action=0, fix_hours=1),
        7: FixThenNatural(fix_action=0, fix_hours=1),
    }
    if estimand_id == 7:
        hz = Horizon.relative(1)
    else:
        hz = Horizon.absolute(horizon)
    return EstimandSpec(moment_of_use=k, regime=regimes[estimand_id], horizon=hz)


# --- serialization -------------------------------------------------------

def spec_to_json_dict(spec: EstimandSpec) -> dict:
    return {
        "population": spec.population,
        "moment_of_use": spec.moment_of_use,
        "intervention_option": regime_to_json_dict(spec.regime),
        "outcome": spec.outcome,
        "horizon": {"kind": spec.horizon.kind, "value": spec.horizon.value},
        "predictors": list(spec.predictors),
    }


def spec_from_json_dict(data: dict) -> EstimandSpec:
    known = {"population", "moment_of_use", "intervention_option", "outcome", "horizon", "predictors"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown estimand keys {sorted(unknown)}")
    try:
        horizon = Horizon(kind=data["horizon"]["kind"], value=data["horizon"]["value"])
        return EstimandSpec(
            moment_of_use=data["moment_of_use"],
            regime=regime_from_json_dict(data["intervention_option"]),
            horizon=horizon,
            population=data.get("population", POPULATION_AT_RISK),
            outcome=data.get("outcome", OUTCOME_COMPOSITE),
            predictors=tuple(data.get("predictors", PREDICTOR_COLUMNS)),
        )
    except KeyError as exc:
        raise ConfigError(f"estimand JSON missing key {exc}") from exc


def spec_to_json(spec: EstimandSpec) -> str:
    return json.dumps(spec_to_json_dict(spec), sort_keys=True)


def spec_from_json(text: str) -> EstimandSpec:
    return spec_from_json_dict(json.loads(text))
