"""Intervention options and their decision semantics.

A regime is an immutable value describing how the cesarean decision is
made at each hour from some anchor hour onward: a fixed sequence, a
threshold rule on fetal heart rate, a fix-then-usual-care hybrid, or the
usual-care policy itself ("natural course"). The anchor is implicit: the
first state of the ``History`` passed to :func:`decide` is the state at
the anchor hour, so the same regime value serves both start-of-labor and
mid-labor queries.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .errors import ConfigError, DataFormatError, NotAtRiskError
from .states import (
    FHR_BRADY_PERSISTENT,
    FHR_TACHYCARDIA,
    FHR_LOWER_DEFAULT,
    FHR_UPPER_DEFAULT,
    MODE_COARSE,
    PatientState,
    Trajectory,
    TimeVaryingCovariates,
)


@dataclass(frozen=True)
class StaticSequence:
    """Fixed action per remaining hour; must respect irreversibility."""

    actions: tuple[int, ...]

    def __post_init__(self):
        for a in self.actions:
            if a not in (0, 1):
                raise ConfigError("static sequence actions must be 0 or 1")
        for prev, nxt in zip(self.actions, self.actions[1:]):
            if nxt < prev:
                raise ConfigError("static sequence may not revert cesarean (1 -> 0)")


@dataclass(frozen=True)
class ImmediateCesarean:
    """Cesarean at the anchor hour."""


@dataclass(frozen=True)
class VaginalOnly:
    """Vaginal mode of delivery at every remaining hour."""


@dataclass(frozen=True)
class FixThenNatural:
    """Fix the action for ``fix_hours`` hours, then follow usual care."""

    fix_action: int
    fix_hours: int

    def __post_init__(self):
        if self.fix_action not in (0, 1):
            raise ConfigError("fix_action must be 0 or 1")
        if self.fix_hours < 1:
            raise ConfigError("fix_hours must be >= 1")


@dataclass(frozen=True)
class DynamicFhr:
    """Cesarean from the first hour the FHR is abnormal: below ``lower``
    with a sustained episode, or above ``upper``."""

    lower: float = FHR_LOWER_DEFAULT
    upper: float = FHR_UPPER_DEFAULT

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigError("dynamic rule requires lower < upper")


@dataclass(frozen=True)
class NaturalCourse:
    """Leave every remaining decision to the usual-care policy."""


Regime = Union[StaticSequence, ImmediateCesarean, VaginalOnly, FixThenNatural, DynamicFhr, NaturalCourse]

Policy = Callable[["History"], int]


@dataclass
class History:
    """States observed so far (first entry = regime anchor) and the
    actions taken at all but the last of those hours."""

    states: list[PatientState]
    actions: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.states:
            raise DataFormatError("history must contain at least one state")
        if len(self.actions) != len(self.states) - 1:
            raise DataFormatError(
                f"{len(self.states)} states need {len(self.states) - 1} actions, got {len(self.actions)}"
            )
        for prev, nxt in zip(self.states, self.states[1:]):
            if nxt.k != prev.k + 1:
                raise DataFormatError(f"history hours not consecutive: {prev.k} -> {nxt.k}")

    @property
    def current(self) -> PatientState:
        return self.states[-1]

    @property
    def position(self) -> int:
        """Hours elapsed since the anchor."""
        return len(self.states) - 1


def fhr_abnormal_flag(fhr: float, brady_persist: bool,
                      lower: float = FHR_LOWER_DEFAULT,
                      upper: float = FHR_UPPER_DEFAULT) -> int:
    """Abnormal-FHR indicator: 1 iff the rate exceeds ``upper``, or is
    below ``lower`` with the episode sustained long enough to count as
    persistent bradycardia. A transient dip below ``lower`` does not flag."""
    return int((fhr < lower and brady_persist) or fhr > upper)


def tv_abnormal_flag(tv: TimeVaryingCovariates, mode: str,
                     lower: float = FHR_LOWER_DEFAULT,
                     upper: float = FHR_UPPER_DEFAULT) -> int:
    """Abnormal-FHR indicator on either vitals representation."""
    if mode == MODE_COARSE:
        return int(tv.fhr in (FHR_BRADY_PERSISTENT, FHR_TACHYCARDIA))
    return fhr_abnormal_flag(tv.fhr, tv.brady_persist, lower, upper)


def state_abnormal_flag(state: PatientState, mode: str,
                        lower: float = FHR_LOWER_DEFAULT,
                        upper: float = FHR_UPPER_DEFAULT) -> int:
    return tv_abnormal_flag(state.tv, mode, lower, upper)


def prescribed_action(regime: Regime, history: History, mode: str) -> Optional[int]:
    """The action the regime pins at the current hour, or ``None`` where
    the regime delegates to usual care (a "natural" hour)."""
    pos = history.position
    if isinstance(regime, VaginalOnly):
        return 0
    if isinstance(regime, ImmediateCesarean):
        return 1
    if isinstance(regime, StaticSequence):
        if pos >= len(regime.actions):
            raise DataFormatError(
                f"static sequence of length {len(regime.actions)} exhausted at position {pos}"
            )
        return regime.actions[pos]
    if isinstance(regime, FixThenNatural):
        if pos < regime.fix_hours:
            return regime.fix_action
        return None
    if isinstance(regime, DynamicFhr):
        triggered = any(
            state_abnormal_flag(s, mode, regime.lower, regime.upper) for s in history.states
        )
        return 1 if triggered else 0
    if isinstance(regime, NaturalCourse):
        return None
    raise ConfigError(f"unknown regime {regime!r}")


def pinned_action(regime: Regime, t_rel: int) -> Optional[int]:
    """State-independent pinned action at relative hour ``t_rel``, or
    ``None`` for natural hours. DynamicFhr decisions depend on the state
    history and must go through :func:`prescribed_action`."""
    if isinstance(regime, VaginalOnly):
        return 0
    if isinstance(regime, ImmediateCesarean):
        return 1
    if isinstance(regime, StaticSequence):
        if t_rel >= len(regime.actions):
            raise DataFormatError(
                f"static sequence of length {len(regime.actions)} exhausted at position {t_rel}"
            )
        return regime.actions[t_rel]
    if isinstance(regime, FixThenNatural):
        return regime.fix_action if t_rel < regime.fix_hours else None
    if isinstance(regime, NaturalCourse):
        return None
    raise ConfigError(f"regime {type(regime).__name__} has no state-independent prescription")


def has_natural_tail(regime: Regime) -> bool:
    return isinstance(regime, (FixThenNatural, NaturalCourse))


def decide(regime: Regime, history: History, mode: str,
           usual_care: Policy | None = None) -> int:
    """Action prescribed by the regime for the current hour of ``history``.

    ``usual_care`` must be supplied exactly when the regime has a
    natural-course segment. Decisions never revert a cesarean.
    """
    if history.current.z != 1:
        raise NotAtRiskError(f"no decision to make: state at hour {history.current.k} not at risk")
    action = prescribed_action(regime, history, mode)
    if action is None:
        if usual_care is None:
            raise ConfigError(f"regime {type(regime).__name__} needs a usual-care policy")
        action = usual_care(history)
    # Irreversibility: once a cesarean appears in the history, stay at 1.
    if history.current.a == 1 or (history.actions and history.actions[-1] == 1):
        action = 1
    return action


def regime_policy(regime: Regime, mode: str, usual_care: Policy | None = None) -> Policy:
    """Adapt a regime to the decision-function interface used by the
    simulator."""
    if has_natural_tail(regime) and usual_care is None:
        raise ConfigError(f"regime {type(regime).__name__} needs a usual-care policy")

    def policy(history: History) -> int:
        return decide(regime, history, mode, usual_care)

    return policy


def is_regime_consistent(trajectory: Trajectory, regime: Regime, from_hour: int,
                         mode: str, usual_care: Policy | None = None) -> bool:
    """Whether every observed action from ``from_hour`` until absorption
    matches the regime. Natural-course hours are consistent with any
    observed action (the natural value is whatever usual care did).

    ``usual_care`` is accepted for signature symmetry with :func:`decide`
    but never consulted: natural segments constrain nothing.
    """
    offsets = [i for i, s in enumerate(trajectory.states) if s.k == from_hour]
    if not offsets:
        raise DataFormatError(f"trajectory does not cover hour {from_hour}")
    start = offsets[0]
    for pos in range(start, len(trajectory.actions)):
        history = History(trajectory.states[start:pos + 1], list(trajectory.actions[start:pos]))
        if history.current.z != 1:
            break
        required = prescribed_action(regime, history, mode)
        if required is not None and trajectory.actions[pos] != required:
            return False
    return True


# --- serialization -----------------------------------------------------

_REGIME_TAGS = {
    StaticSequence: "static_sequence",
    ImmediateCesarean: "immediate_cesarean",
    VaginalOnly: "vaginal_only",
    FixThenNatural: "fix_then_natural",
    DynamicFhr: "dynamic_fhr",
    NaturalCourse: "natural_course",
}


def regime_to_json_dict(regime: Regime) -> dict:
    tag = _REGIME_TAGS.get(type(regime))
    if tag is None:
        raise ConfigError(f"unknown regime {regime!r}")
    out: dict = {"type": tag}
    if isinstance(regime, StaticSequence):
        out["actions"] = list(regime.actions)
    elif isinstance(regime, FixThenNatural):
        out["fix_action"] = regime.fix_action
        out["fix_hours"] = regime.fix_hours
    elif isinstance(regime, DynamicFhr):
        out["lower"] = regime.lower
        out["upper"] = regime.upper
    return out


def regime_from_json_dict(data: dict) -> Regime:
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigError("regime JSON must be an object with a 'type' tag")
    tag = data["type"]
    rest = {k: v for k, v in data.items() if k != "type"}
    constructors = {
        "static_sequence": StaticSequence,
        "immediate_cesarean": ImmediateCesarean,
        "vaginal_only": VaginalOnly,
        "fix_then_natural": FixThenNatural,
        "dynamic_fhr": DynamicFhr,
        "natural_course": NaturalCourse,
    }
    cls = constructors.get(tag)
    if cls is None:
        raise ConfigError(f"unknown regime type {tag!r}")
    if tag == "static_sequence" and "actions" in rest:
        rest["actions"] = tuple(rest["actions"])
    try:
        return cls(**rest)
    except TypeError as exc:
        raise ConfigError(f"bad regime payload for type {tag!r}: {exc}") from exc


def regime_to_json(regime: Regime) -> str:
    return json.dumps(regime_to_json_dict(regime), sort_keys=True)


def regime_from_json(text: str) -> Regime:
    return regime_from_json_dict(json.loads(text))
