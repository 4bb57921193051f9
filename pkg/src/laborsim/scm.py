"""Discrete-time structural causal model of high-risk labor.

Hour-by-hour generative process: baseline covariates are drawn once,
vitals evolve while the woman is in labor, birth occurs when dilatation
completes (or one hour after a cesarean is initiated), and a composite
adverse outcome is drawn each in-labor hour from a state-dependent hazard
plus a one-time surgical risk when a cesarean is performed.

All randomness flows through an explicit generator, so identical
(seed, config, policy) triples reproduce trajectories bit for bit.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .config import CoarseDynamics, ContinuousDynamics, HazardParams, ScmConfig
from .errors import IrreversibilityError, NotAtRiskError
from .regimes import History, Policy, tv_abnormal_flag
from .states import (
    AGE_MAX,
    AGE_MIN,
    BP_HIGH,
    BP_NORMAL,
    DBP_MAX,
    DBP_MIN,
    FHR_BRADY_PERSISTENT,
    FHR_MAX,
    FHR_MIN,
    MAX_DILATATION,
    MODE_COARSE,
    PARITY_MAX,
    SBP_HIGH_THRESHOLD,
    SBP_MAX,
    SBP_MIN,
    BaselineCovariates,
    PatientState,
    TimeVaryingCovariates,
    Trajectory,
    absorbed_outcome_state,
)


def sample_baseline(rng: np.random.Generator, cfg: ScmConfig) -> BaselineCovariates:
    """Draw the time-fixed covariates for one person."""
    b = cfg.baseline
    age = float(np.clip(rng.normal(b.age_mean, b.age_sd), AGE_MIN, AGE_MAX))
    parity = int(min(rng.poisson(b.parity_rate), PARITY_MAX))
    preterm = bool(rng.random() < b.preterm_prob)
    return BaselineCovariates(maternal_age=age, parity=parity, history_preterm=preterm)


def _sample_categorical(rng: np.random.Generator, probs) -> int:
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def _initial_tv_coarse(rng: np.random.Generator, dyn: CoarseDynamics) -> TimeVaryingCovariates:
    fhr = _sample_categorical(rng, dyn.fhr_initial)
    dilat = _sample_categorical(rng, dyn.dilat_initial)
    sbp = BP_HIGH if rng.random() < dyn.sbp_initial_high else BP_NORMAL
    dbp = BP_HIGH if rng.random() < dyn.dbp_initial_high else BP_NORMAL
    return TimeVaryingCovariates(fhr=fhr, brady_persist=(fhr == FHR_BRADY_PERSISTENT),
                                 dilatation=dilat, sbp=sbp, dbp=dbp)


def _initial_tv_continuous(rng: np.random.Generator, dyn: ContinuousDynamics) -> TimeVaryingCovariates:
    fhr = float(np.clip(rng.normal(dyn.fhr_initial_mean, dyn.fhr_initial_sd),
                        dyn.fhr_initial_min, dyn.fhr_initial_max))
    persist = bool(fhr < 110.0 and rng.random() < dyn.persist_prob)
    dilat = float(np.clip(rng.normal(dyn.dilat_initial_mean, dyn.dilat_initial_sd),
                          dyn.dilat_initial_min, dyn.dilat_initial_max))
    sbp = float(np.clip(rng.normal(dyn.sbp_initial_mean, dyn.sbp_initial_sd), SBP_MIN, SBP_MAX))
    dbp = float(np.clip(rng.normal(dyn.dbp_initial_mean, dyn.dbp_initial_sd), DBP_MIN, DBP_MAX))
    return TimeVaryingCovariates(fhr=fhr, brady_persist=persist, dilatation=dilat, sbp=sbp, dbp=dbp)


def initial_state(baseline: BaselineCovariates, rng: np.random.Generator,
                  cfg: ScmConfig) -> PatientState:
    """State at the start of labor: hour 0, at risk, untreated."""
    if cfg.mode == MODE_COARSE:
        tv = _initial_tv_coarse(rng, cfg.coarse)
    else:
        tv = _initial_tv_continuous(rng, cfg.continuous)
    tv.validate(cfg.mode)
    return PatientState(k=0, baseline=baseline, tv=tv)


def hazard_logit(tv: TimeVaryingCovariates, k: int, mode: str, params: HazardParams) -> float:
    """Logit of the per-hour in-labor adverse-outcome hazard."""
    abnormal = tv_abnormal_flag(tv, mode)
    if mode == MODE_COARSE:
        persist = int(tv.fhr == FHR_BRADY_PERSISTENT)
        high_sbp = int(tv.sbp == BP_HIGH)
    else:
        persist = int(tv.brady_persist)
        high_sbp = int(tv.sbp >= SBP_HIGH_THRESHOLD)
    return (params.intercept + params.abnormal_fhr * abnormal
            + params.brady_persist * persist + params.high_sbp * high_sbp
            + params.per_hour * k)


def in_labor_hazard(state: PatientState, cfg: ScmConfig) -> float:
    """Per-hour probability of the composite adverse outcome while in labor."""
    return float(expit(hazard_logit(state.tv, state.k, cfg.mode, cfg.dynamics.hazard)))


def surgical_risk(tv: TimeVaryingCovariates, mode: str, cfg: ScmConfig) -> float:
    """Probability of the composite adverse outcome when a cesarean is
    performed from this state."""
    s = cfg.dynamics.surgical
    if mode == MODE_COARSE:
        high_sbp = int(tv.sbp == BP_HIGH)
    else:
        high_sbp = int(tv.sbp >= SBP_HIGH_THRESHOLD)
    return float(expit(s.intercept + s.high_sbp * high_sbp))


def _evolve_tv_coarse(tv: TimeVaryingCovariates, rng: np.random.Generator,
                      dyn: CoarseDynamics) -> TimeVaryingCovariates:
    fhr = _sample_categorical(rng, dyn.fhr_transition[tv.fhr])
    inc = _sample_categorical(rng, dyn.dilat_increment)
    dilat = min(MAX_DILATATION, tv.dilatation + inc)
    sbp_p = dyn.sbp_stay_high if tv.sbp == BP_HIGH else dyn.sbp_to_high
    sbp = BP_HIGH if rng.random() < sbp_p else BP_NORMAL
    dbp_p = dyn.dbp_stay_high if tv.dbp == BP_HIGH else dyn.dbp_to_high
    dbp = BP_HIGH if rng.random() < dbp_p else BP_NORMAL
    return TimeVaryingCovariates(fhr=fhr, brady_persist=(fhr == FHR_BRADY_PERSISTENT),
                                 dilatation=dilat, sbp=sbp, dbp=dbp)


def _evolve_tv_continuous(tv: TimeVaryingCovariates, parity: int, k: int,
                          rng: np.random.Generator, dyn: ContinuousDynamics) -> TimeVaryingCovariates:
    # FHR: excursion events become more likely as labor drags on; otherwise
    # mean-reverting drift around the setpoint.
    if rng.random() < expit(dyn.brady_event_intercept + dyn.brady_event_per_hour * k):
        fhr = rng.normal(dyn.brady_value_mean, dyn.brady_value_sd)
    elif rng.random() < expit(dyn.tachy_event_intercept + dyn.tachy_event_per_hour * k):
        fhr = rng.normal(dyn.tachy_value_mean, dyn.tachy_value_sd)
    else:
        fhr = tv.fhr + dyn.fhr_revert_rate * (dyn.fhr_setpoint - tv.fhr) + rng.normal(0.0, dyn.fhr_noise_sd)
    fhr = float(np.clip(fhr, FHR_MIN, FHR_MAX))
    persist = bool(fhr < 110.0 and rng.random() < dyn.persist_prob)

    rate = max(0.0, rng.normal(dyn.dilat_rate_mean, dyn.dilat_rate_sd))
    if parity >= 1:
        rate *= dyn.parous_rate_factor
    dilat = float(min(MAX_DILATATION, tv.dilatation + rate))

    sbp = float(np.clip(tv.sbp + dyn.sbp_revert_rate * (dyn.sbp_setpoint - tv.sbp)
                        + rng.normal(0.0, dyn.sbp_noise_sd), SBP_MIN, SBP_MAX))
    dbp = float(np.clip(tv.dbp + dyn.dbp_revert_rate * (dyn.dbp_setpoint - tv.dbp)
                        + rng.normal(0.0, dyn.dbp_noise_sd), DBP_MIN, DBP_MAX))
    return TimeVaryingCovariates(fhr=fhr, brady_persist=persist, dilatation=dilat, sbp=sbp, dbp=dbp)


def transition(state: PatientState, action: int, rng: np.random.Generator,
               cfg: ScmConfig) -> PatientState:
    """Advance one hour under ``action``.

    Action 1 initiates a cesarean: birth completes within the hour and the
    one-time surgical outcome risk applies. Action 0 continues labor:
    vitals evolve, birth occurs when dilatation completes, and the in-labor
    outcome hazard applies. Draw order is fixed (hazard, then each vital)
    so trajectories are reproducible.
    """
    if state.z != 1:
        raise NotAtRiskError(f"cannot transition from hour {state.k}: not at risk")
    if action < state.a:
        raise IrreversibilityError("cesarean is irreversible: action 0 after cesarean")
    if action not in (0, 1):
        raise ValueError(f"action must be 0 or 1, got {action}")

    if action == 1:
        y = int(rng.random() < surgical_risk(state.tv, cfg.mode, cfg))
        return PatientState(k=state.k + 1, baseline=state.baseline, tv=state.tv,
                            a=1, z=0, born=True, y=y)

    if rng.random() < in_labor_hazard(state, cfg):
        return absorbed_outcome_state(state)

    if cfg.mode == MODE_COARSE:
        tv = _evolve_tv_coarse(state.tv, rng, cfg.coarse)
    else:
        tv = _evolve_tv_continuous(state.tv, state.baseline.parity, state.k, rng, cfg.continuous)
    born = tv.dilatation >= MAX_DILATATION
    return PatientState(k=state.k + 1, baseline=state.baseline, tv=tv,
                        a=0, z=int(not born), born=bool(born), y=0)


def simulate_trajectory(baseline: BaselineCovariates, policy: Policy,
                        rng: np.random.Generator, cfg: ScmConfig) -> Trajectory:
    """Simulate one person from the start of labor until absorption (birth
    or outcome) or the configured horizon, deciding each hour's action with
    ``policy`` applied to the history so far."""
    state = initial_state(baseline, rng, cfg)
    states = [state]
    actions: list[int] = []
    while state.z == 1 and state.k < cfg.horizon:
        action = policy(History(states, actions))
        state = transition(state, action, rng, cfg)
        actions.append(action)
        states.append(state)
    return Trajectory(states=states, actions=actions)
