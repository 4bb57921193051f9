"""Usual-care intervention policy.

The observational data generator assigns cesareans with a logistic policy
in three state features: the abnormal-FHR flag, a stalled-labor flag, and
hours in labor. Treatment therefore concentrates on distressed, slow
labors — confounding by indication — while the default coefficients keep
every reachable state's action probability well inside (0, 1), so all the
shipped intervention options remain identifiable from generated data.

Every feature is a function of the current state alone, which is what
makes the exact finite-state oracles applicable to natural-course
estimands: the policy is expressible as a state-indexed probability table.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .coarse import CoarseKernel
from .regimes import History, state_abnormal_flag
from .states import PatientState


def stalled_flag(dilatation: float, k: int) -> int:
    """Labor progressing slower than ~0.5 cm/hour from a 1 cm start."""
    return int(dilatation < 1.0 + 0.5 * k)


@dataclass(frozen=True)
class UsualCarePolicy:
    """P(initiate cesarean this hour | not yet initiated), logistic in
    (abnormal FHR, stalled labor, hours elapsed)."""

    intercept: float = -4.2
    abnormal_fhr: float = 2.5
    stalled: float = 1.0
    per_hour: float = 0.08

    def probability(self, state: PatientState, mode: str) -> float:
        logit = (self.intercept
                 + self.abnormal_fhr * state_abnormal_flag(state, mode)
                 + self.stalled * stalled_flag(state.tv.dilatation, state.k)
                 + self.per_hour * state.k)
        return float(expit(logit))

    def __call__(self, history: History) -> int:
        raise TypeError("UsualCarePolicy is a probability model; bind it with as_policy(rng, mode)")

    def as_policy(self, rng: np.random.Generator, mode: str):
        """Decision function for the simulator: draws the hourly action."""
        def policy(history: History) -> int:
            if history.current.a == 1 or (history.actions and history.actions[-1] == 1):
                return 1
            return int(rng.random() < self.probability(history.current, mode))
        return policy

    def cell_probs(self, hour: int, kernel: CoarseKernel) -> np.ndarray:
        """Vectorized per-cell action probabilities for the exact oracles
        and the batch simulator."""
        stall = (kernel.stalled_ref < 1.0 + 0.5 * hour).astype(float)
        logit = (self.intercept + self.abnormal_fhr * kernel.abnormal
                 + self.stalled * stall + self.per_hour * hour)
        return expit(logit)

    def probability_arrays(self, abnormal: np.ndarray, dilat: np.ndarray, k: int) -> np.ndarray:
        """Vectorized probabilities from raw feature arrays (continuous mode)."""
        stall = (dilat < 1.0 + 0.5 * k).astype(float)
        return expit(self.intercept + self.abnormal_fhr * abnormal
                     + self.stalled * stall + self.per_hour * k)


def default_policy() -> UsualCarePolicy:
    return UsualCarePolicy()


def never_cesarean_policy() -> UsualCarePolicy:
    """Degenerate comparison policy: cesarean probability identically 0."""
    return UsualCarePolicy(intercept=-np.inf, abnormal_fhr=0.0, stalled=0.0, per_hour=0.0)


POLICY_FIELDS = ("intercept", "abnormal_fhr", "stalled", "per_hour")


def policy_to_json_dict(policy: UsualCarePolicy) -> dict:
    # -inf (the never-cesarean intercept) maps to null for strict JSON.
    return {name: (None if getattr(policy, name) == -np.inf else getattr(policy, name))
            for name in POLICY_FIELDS}


def policy_from_json_dict(data: dict) -> UsualCarePolicy:
    unknown = set(data) - set(POLICY_FIELDS)
    if unknown:
        raise ValueError(f"unknown usual-care policy keys {sorted(unknown)}")
    return UsualCarePolicy(**{k: (-np.inf if v is None else v) for k, v in data.items()})
