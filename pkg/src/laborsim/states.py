"""Domain state types: baseline covariates, hourly vitals, patient state,
trajectories.

Two representations of the vitals coexist, selected by the simulator mode
and never mixed within one trajectory:

* continuous — FHR in bpm, dilatation in cm, blood pressures in mmHg;
* coarse — small categorical grid (FHR category, integer dilatation,
  binary blood-pressure levels) used by the exact finite-state oracles.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import DataFormatError

MODE_CONTINUOUS = "continuous"
MODE_COARSE = "coarse"

# Coarse FHR categories. "bradycardia-persistent" means a low-FHR episode
# sustained long enough to count as persistent bradycardia within the hour;
# "bradycardia-transient" is a shorter dip and does not trigger the
# abnormal-FHR rule.
FHR_NORMAL = 0
FHR_BRADY_TRANSIENT = 1
FHR_BRADY_PERSISTENT = 2
FHR_TACHYCARDIA = 3
FHR_CATEGORIES = (
    "normal",
    "bradycardia-transient",
    "bradycardia-persistent",
    "tachycardia",
)

BP_NORMAL = 0
BP_HIGH = 1
BP_CATEGORIES = ("normal", "high")

N_FHR_CATEGORIES = len(FHR_CATEGORIES)
N_BP_CATEGORIES = len(BP_CATEGORIES)

MAX_DILATATION = 10

# Continuous-mode physiological ranges.
FHR_MIN, FHR_MAX = 50.0, 220.0
SBP_MIN, SBP_MAX = 70.0, 220.0
DBP_MIN, DBP_MAX = 40.0, 130.0
AGE_MIN, AGE_MAX = 16.0, 45.0
PARITY_MAX = 6

# Clinical thresholds for the abnormal-FHR rule (bpm).
FHR_LOWER_DEFAULT = 110.0
FHR_UPPER_DEFAULT = 160.0
SBP_HIGH_THRESHOLD = 160.0
DBP_HIGH_THRESHOLD = 100.0


@dataclass(frozen=True)
class BaselineCovariates:
    """Time-fixed covariates, immutable over a trajectory."""

    maternal_age: float
    parity: int
    history_preterm: bool

    def __post_init__(self):
        if not AGE_MIN <= self.maternal_age <= AGE_MAX:
            raise DataFormatError(f"maternal_age {self.maternal_age} outside [{AGE_MIN}, {AGE_MAX}]")
        if not 0 <= self.parity <= PARITY_MAX:
            raise DataFormatError(f"parity {self.parity} outside [0, {PARITY_MAX}]")


@dataclass(frozen=True)
class TimeVaryingCovariates:
    """Hourly vitals.

    Continuous mode: ``fhr``/``sbp``/``dbp`` are floats (bpm / mmHg),
    ``dilatation`` a float in cm, ``brady_persist`` flags a low-FHR episode
    sustained long enough within the hour.

    Coarse mode: ``fhr`` is an FHR category index, ``sbp``/``dbp`` are
    binary level indices, ``dilatation`` an integer 0..10, and
    ``brady_persist`` is implied by the persistent-bradycardia category.
    """

    fhr: float | int
    brady_persist: bool
    dilatation: float | int
    sbp: float | int
    dbp: float | int

    def validate(self, mode: str) -> None:
        if mode == MODE_CONTINUOUS:
            if not FHR_MIN <= self.fhr <= FHR_MAX:
                raise DataFormatError(f"fhr {self.fhr} outside [{FHR_MIN}, {FHR_MAX}]")
            if not 0.0 <= self.dilatation <= MAX_DILATATION:
                raise DataFormatError(f"dilatation {self.dilatation} outside [0, {MAX_DILATATION}]")
            if not SBP_MIN <= self.sbp <= SBP_MAX:
                raise DataFormatError(f"sbp {self.sbp} outside [{SBP_MIN}, {SBP_MAX}]")
            if not DBP_MIN <= self.dbp <= DBP_MAX:
                raise DataFormatError(f"dbp {self.dbp} outside [{DBP_MIN}, {DBP_MAX}]")
        elif mode == MODE_COARSE:
            if self.fhr not in range(N_FHR_CATEGORIES):
                raise DataFormatError(f"fhr category {self.fhr} invalid")
            if self.dilatation not in range(MAX_DILATATION + 1):
                raise DataFormatError(f"dilatation {self.dilatation} outside 0..{MAX_DILATATION}")
            if self.sbp not in (BP_NORMAL, BP_HIGH) or self.dbp not in (BP_NORMAL, BP_HIGH):
                raise DataFormatError("sbp/dbp level must be 0 (normal) or 1 (high)")
            if self.brady_persist != (self.fhr == FHR_BRADY_PERSISTENT):
                raise DataFormatError("coarse brady_persist must mirror the persistent-bradycardia category")
        else:
            raise DataFormatError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class PatientState:
    """Full observed state of one individual at hour ``k``.

    ``a`` is the intervention status (1 = cesarean performed/underway),
    ``z`` the at-risk indicator, ``y`` the cumulative adverse-outcome
    indicator. ``z == 1`` exactly when the woman is still in labor with no
    outcome; both ``y`` and ``born`` are absorbing.
    """

    k: int
    baseline: BaselineCovariates
    tv: TimeVaryingCovariates
    a: int = 0
    z: int = 1
    born: bool = False
    y: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise DataFormatError(f"hour index {self.k} negative")
        if self.a not in (0, 1) or self.z not in (0, 1) or self.y not in (0, 1):
            raise DataFormatError("a, z, y must be 0 or 1")
        at_risk = (not self.born) and self.y == 0
        if bool(self.z) != at_risk:
            raise DataFormatError(
                f"z={self.z} inconsistent with born={self.born}, y={self.y} at hour {self.k}"
            )

    @property
    def at_risk(self) -> bool:
        return self.z == 1


@dataclass
class Trajectory:
    """One person's hourly record: states for k = 0..(absorption or K) and
    the action taken at each hour."""

    states: list[PatientState]
    actions: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.actions) != len(self.states) - 1:
            raise DataFormatError(
                f"{len(self.states)} states need {len(self.states) - 1} actions, got {len(self.actions)}"
            )

    @property
    def final(self) -> PatientState:
        return self.states[-1]

    def outcome_by(self, horizon: int) -> int:
        """Cumulative outcome status at ``horizon`` (absorbing, so the last
        state at or before the horizon decides)."""
        for s in reversed(self.states):
            if s.k <= horizon:
                return s.y
        return 0

    def validate(self) -> None:
        """Check per-trajectory invariants: gap-free hours, monotone
        intervention status and dilatation, absorbing outcome/birth."""
        prev = None
        for i, s in enumerate(self.states):
            if prev is not None:
                if s.k != prev.k + 1:
                    raise DataFormatError(f"hour gap: {prev.k} -> {s.k}")
                if s.a < prev.a:
                    raise DataFormatError(f"intervention status decreased at hour {s.k}")
                if s.tv.dilatation < prev.tv.dilatation:
                    raise DataFormatError(f"dilatation decreased at hour {s.k}")
                if prev.y == 1 and s.y == 0:
                    raise DataFormatError(f"outcome indicator reset at hour {s.k}")
                if prev.born and not s.born:
                    raise DataFormatError(f"born flag reset at hour {s.k}")
                if prev.z == 0:
                    raise DataFormatError(f"state after absorption at hour {s.k}")
                if s.baseline != prev.baseline:
                    raise DataFormatError(f"baseline covariates changed at hour {s.k}")
            prev = s
        for i, a in enumerate(self.actions):
            if a not in (0, 1):
                raise DataFormatError(f"action {a} at hour {i} not in {{0,1}}")
            if i > 0 and a < self.actions[i - 1]:
                raise DataFormatError(f"action sequence decreased at hour {i}")


def absorbed_outcome_state(state: PatientState) -> PatientState:
    """Successor of an at-risk state when the adverse outcome occurs in
    labor: vitals carried forward, outcome absorbing."""
    return replace(state, k=state.k + 1, y=1, z=0)


def fhr_category_name(index: int) -> str:
    return FHR_CATEGORIES[index]


def bp_category_name(index: int) -> str:
    return BP_CATEGORIES[index]
