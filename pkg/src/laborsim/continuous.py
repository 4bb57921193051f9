"""Vectorized batch simulation for the continuous mode.

Mirrors the scalar hour step in scm.py over whole replication arrays, so
Monte Carlo oracle queries stay fast at the default replication count.
The scalar and vectorized paths share the same config parameters and are
cross-checked against each other in the test suite.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .config import ScmConfig
from .errors import ConfigError
from .policy import UsualCarePolicy
from .states import (
    DBP_MAX,
    DBP_MIN,
    FHR_LOWER_DEFAULT,
    FHR_MAX,
    FHR_MIN,
    FHR_UPPER_DEFAULT,
    MAX_DILATATION,
    MODE_CONTINUOUS,
    SBP_HIGH_THRESHOLD,
    SBP_MAX,
    SBP_MIN,
    PatientState,
)
from . import regimes as rg


def _abnormal(fhr: np.ndarray, persist: np.ndarray,
              lower: float = FHR_LOWER_DEFAULT, upper: float = FHR_UPPER_DEFAULT) -> np.ndarray:
    return ((fhr < lower) & persist) | (fhr > upper)


def _action_probs(regime, t_rel: int, fhr, persist, dilat, hour: int,
                  usual_care: UsualCarePolicy | None) -> np.ndarray:
    """Per-replication probability of initiating a cesarean this hour."""
    m = fhr.shape[0]
    if isinstance(regime, rg.VaginalOnly):
        return np.zeros(m)
    if isinstance(regime, rg.ImmediateCesarean):
        return np.ones(m)
    if isinstance(regime, rg.StaticSequence):
        if t_rel >= len(regime.actions):
            raise ConfigError(f"static sequence exhausted at position {t_rel}")
        return np.full(m, float(regime.actions[t_rel]))
    if isinstance(regime, rg.DynamicFhr):
        return _abnormal(fhr, persist, regime.lower, regime.upper).astype(float)
    if isinstance(regime, rg.FixThenNatural) and t_rel < regime.fix_hours:
        return np.full(m, float(regime.fix_action))
    if usual_care is None:
        raise ConfigError("regime has a natural segment but no usual-care policy was given")
    abn = _abnormal(fhr, persist).astype(float)
    return usual_care.probability_arrays(abn, dilat, hour)


def simulate_batch_continuous(cfg: ScmConfig, condition: PatientState, n: int,
                              horizon: int, regime, rng: np.random.Generator,
                              usual_care: UsualCarePolicy | None = None) -> dict[str, np.ndarray]:
    """Simulate ``n`` replications forward from one continuous-mode
    condition state under a regime anchored at the condition's hour."""
    if cfg.mode != MODE_CONTINUOUS:
        raise ConfigError("continuous batch simulation requires a continuous-mode config")
    dyn = cfg.continuous
    anchor = condition.k
    parous = condition.baseline.parity >= 1

    fhr = np.full(n, float(condition.tv.fhr))
    persist = np.full(n, bool(condition.tv.brady_persist))
    dilat = np.full(n, float(condition.tv.dilatation))
    sbp = np.full(n, float(condition.tv.sbp))
    dbp = np.full(n, float(condition.tv.dbp))
    alive = np.ones(n, dtype=bool)
    outcome = np.zeros(n, dtype=bool)
    born = np.zeros(n, dtype=bool)
    cesarean = np.zeros(n, dtype=bool)

    hz = dyn.hazard
    for hour in range(anchor, horizon):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        p1 = _action_probs(regime, hour - anchor, fhr[idx], persist[idx], dilat[idx],
                           hour, usual_care)
        act1 = rng.random(idx.size) < p1

        ces = idx[act1]
        if ces.size:
            p_surg = expit(dyn.surgical.intercept
                           + dyn.surgical.high_sbp * (sbp[ces] >= SBP_HIGH_THRESHOLD))
            outcome[ces] |= rng.random(ces.size) < p_surg
            born[ces] = True
            cesarean[ces] = True
            alive[ces] = False

        lab = idx[~act1]
        if not lab.size:
            continue
        abn = _abnormal(fhr[lab], persist[lab]).astype(float)
        hazard = expit(hz.intercept + hz.abnormal_fhr * abn
                       + hz.brady_persist * persist[lab]
                       + hz.high_sbp * (sbp[lab] >= SBP_HIGH_THRESHOLD)
                       + hz.per_hour * hour)
        hit = rng.random(lab.size) < hazard
        outcome[lab[hit]] = True
        alive[lab[hit]] = False
        surv = lab[~hit]
        if not surv.size:
            continue

        m = surv.size
        brady_ev = rng.random(m) < expit(dyn.brady_event_intercept + dyn.brady_event_per_hour * hour)
        tachy_ev = ~brady_ev & (rng.random(m) < expit(dyn.tachy_event_intercept + dyn.tachy_event_per_hour * hour))
        drift = fhr[surv] + dyn.fhr_revert_rate * (dyn.fhr_setpoint - fhr[surv]) + rng.normal(0.0, dyn.fhr_noise_sd, m)
        new_fhr = np.where(brady_ev, rng.normal(dyn.brady_value_mean, dyn.brady_value_sd, m),
                           np.where(tachy_ev, rng.normal(dyn.tachy_value_mean, dyn.tachy_value_sd, m), drift))
        fhr[surv] = np.clip(new_fhr, FHR_MIN, FHR_MAX)
        persist[surv] = (fhr[surv] < 110.0) & (rng.random(m) < dyn.persist_prob)

        rate = np.maximum(0.0, rng.normal(dyn.dilat_rate_mean, dyn.dilat_rate_sd, m))
        if parous:
            rate *= dyn.parous_rate_factor
        dilat[surv] = np.minimum(MAX_DILATATION, dilat[surv] + rate)
        sbp[surv] = np.clip(sbp[surv] + dyn.sbp_revert_rate * (dyn.sbp_setpoint - sbp[surv])
                            + rng.normal(0.0, dyn.sbp_noise_sd, m), SBP_MIN, SBP_MAX)
        dbp[surv] = np.clip(dbp[surv] + dyn.dbp_revert_rate * (dyn.dbp_setpoint - dbp[surv])
                            + rng.normal(0.0, dyn.dbp_noise_sd, m), DBP_MIN, DBP_MAX)

        done = dilat[surv] >= MAX_DILATATION
        born[surv[done]] = True
        alive[surv[done]] = False

    return {"outcome": outcome, "born": born, "cesarean": cesarean, "at_risk": alive}
