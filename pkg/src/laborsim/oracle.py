"""Ground-truth estimand evaluation against the known simulator.

Two routes:

* ``oracle_mc`` — forward Monte Carlo from the conditioned state under the
  estimand's intervention option (both modes);
* ``oracle_exact`` — backward induction over the enumerated coarse state
  space (coarse mode only, zero standard error).

Agreement between the two routes on the coarse grid is the package's core
acceptance property; everything downstream (estimators, the comparison
reports, the session service) is validated against these numbers.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .coarse import (
    CoarseKernel,
    build_kernel,
    backward_risk,
    simulate_batch,
    state_to_cell,
)
from .config import ScmConfig
from .continuous import simulate_batch_continuous
from .errors import ConfigError, NotAtRiskError
from .estimands import (
    BUILTIN_IDS,
    EstimandSpec,
    METHOD_ORACLE_EXACT,
    METHOD_ORACLE_MC,
    RiskEstimate,
    builtin_estimand,
    builtin_label,
)
from .policy import UsualCarePolicy
from .regimes import FixThenNatural, NaturalCourse
from .rng import substream
from .states import MODE_COARSE, PatientState

DEFAULT_N_MC = 100_000


@lru_cache(maxsize=8)
def kernel_for(cfg: ScmConfig) -> CoarseKernel:
    """Shared kernel per config (configs are frozen, hence hashable)."""
    return build_kernel(cfg)


def needs_usual_care(spec: EstimandSpec) -> bool:
    """Whether evaluating the spec ever consults the usual-care policy:
    true when a natural-course segment starts before the outcome horizon."""
    regime = spec.regime
    if isinstance(regime, NaturalCourse):
        return True
    if isinstance(regime, FixThenNatural):
        return spec.moment_of_use + regime.fix_hours < spec.horizon_hour
    return False


def _check_condition(spec: EstimandSpec, condition: PatientState, cfg: ScmConfig,
                     usual_care: UsualCarePolicy | None) -> int:
    if condition.z != 1:
        raise NotAtRiskError("condition state is not at risk; the estimand population is empty here")
    if condition.k != spec.moment_of_use:
        raise ConfigError(
            f"condition is at hour {condition.k}, spec is consulted at hour {spec.moment_of_use}"
        )
    horizon = spec.horizon_hour
    if horizon <= spec.moment_of_use:
        raise ConfigError(f"horizon {horizon} does not extend past hour {spec.moment_of_use}")
    if horizon > cfg.horizon:
        raise ConfigError(f"horizon {horizon} exceeds the simulated horizon K={cfg.horizon}")
    if needs_usual_care(spec) and usual_care is None:
        raise ConfigError("spec has a natural-course segment: a usual-care policy is required")
    return horizon


def oracle_exact(spec: EstimandSpec, condition: PatientState, cfg: ScmConfig,
                 usual_care: UsualCarePolicy | None = None,
                 label: str = "") -> RiskEstimate:
    """Exact conditional outcome risk by backward induction (coarse mode)."""
    if cfg.mode != MODE_COARSE:
        raise ConfigError("the exact oracle requires a coarse-mode config")
    horizon = _check_condition(spec, condition, cfg, usual_care)
    kernel = kernel_for(cfg)
    cell = state_to_cell(condition)
    idx = kernel.index.get(cell)
    if idx is None:
        raise ConfigError(f"condition cell {cell} is not reachable under this config")
    probs = usual_care.cell_probs if usual_care is not None else None
    values = backward_risk(kernel, spec.regime, spec.moment_of_use, horizon, probs)
    p = float(np.clip(values[idx], 0.0, 1.0))
    return RiskEstimate(p=p, se=0.0, n=0, method=METHOD_ORACLE_EXACT, label=label)


def oracle_mc(spec: EstimandSpec, condition: PatientState, cfg: ScmConfig,
              usual_care: UsualCarePolicy | None = None,
              n_mc: int = DEFAULT_N_MC, rng: np.random.Generator | None = None,
              label: str = "") -> RiskEstimate:
    """Monte Carlo conditional outcome risk: the fraction of ``n_mc``
    forward simulations from the conditioned state, under the intervention
    option, with the outcome by the horizon."""
    if n_mc < 1:
        raise ConfigError("n_mc must be >= 1")
    horizon = _check_condition(spec, condition, cfg, usual_care)
    if rng is None:
        rng = substream(cfg.seed, "oracle-mc", spec.moment_of_use, horizon)
    if cfg.mode == MODE_COARSE:
        kernel = kernel_for(cfg)
        cell = state_to_cell(condition)
        idx = kernel.index.get(cell)
        if idx is None:
            raise ConfigError(f"condition cell {cell} is not reachable under this config")
        probs = usual_care.cell_probs if usual_care is not None else None
        result = simulate_batch(kernel, np.full(n_mc, idx, dtype=np.int64),
                                spec.moment_of_use, horizon, spec.regime, rng, probs)
    else:
        result = simulate_batch_continuous(cfg, condition, n_mc, horizon,
                                           spec.regime, rng, usual_care)
    p = float(result["outcome"].mean())
    se = float(np.sqrt(p * (1.0 - p) / n_mc))
    return RiskEstimate(p=p, se=se, n=n_mc, method=METHOD_ORACLE_MC, label=label)


def risk_profile(estimand_ids: list[int], condition: PatientState, cfg: ScmConfig,
                 usual_care: UsualCarePolicy | None = None,
                 method: str = "auto", n_mc: int = DEFAULT_N_MC,
                 seed: int | None = None) -> list[RiskEstimate]:
    """Batch oracle evaluation of built-in estimands at one condition.

    ``method`` is ``exact``, ``mc``, or ``auto`` (exact when coarse).
    Built-in estimands 1-4 requested at an hour k > 0 are re-anchored at k
    (their regime applied from the current hour) and labeled accordingly.
    Replications draw from a substream keyed by the estimand id, so
    duplicated ids yield identical estimates.
    """
    if method not in ("auto", "exact", "mc"):
        raise ConfigError(f"method must be auto, exact, or mc, got {method!r}")
    if method == "auto":
        resolved = "exact" if cfg.mode == MODE_COARSE else "mc"
    else:
        resolved = method
    base_seed = cfg.seed if seed is None else seed
    k = condition.k
    out: list[RiskEstimate] = []
    for eid in estimand_ids:
        if eid not in BUILTIN_IDS:
            raise ConfigError(f"unknown estimand id {eid}")
        if eid <= 4 and k > 0:
            base = builtin_estimand(eid, 0, horizon=cfg.horizon)
            spec = EstimandSpec(moment_of_use=k, regime=base.regime, horizon=base.horizon)
            label = f"{builtin_label(eid)} [re-anchored at hour {k}]"
        else:
            spec = builtin_estimand(eid, k, horizon=cfg.horizon)
            label = builtin_label(eid, k if eid >= 5 else None)
        if resolved == "exact":
            out.append(oracle_exact(spec, condition, cfg, usual_care, label=label))
        else:
            rng = substream(base_seed, "risk-profile", k, eid, n_mc)
            out.append(oracle_mc(spec, condition, cfg, usual_care,
                                 n_mc=n_mc, rng=rng, label=label))
    return out
