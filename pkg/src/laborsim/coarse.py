"""Finite-state machinery for the coarse mode.

The coarse process lives on a small grid of covariate cells (FHR category
x integer dilatation x binary blood pressures). Because the transition law
factorizes over the vitals given the current cell, the entire one-hour
event distribution from any at-risk cell is an explicit product of config
rows. That makes three things cheap and exact:

* reachable-state enumeration (forward closure from the initial support);
* vectorized Monte Carlo over cell indices (one categorical draw per
  replication-hour);
* exact occupancy and value computations by forward propagation and
  backward induction, used as ground-truth oracles.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import expit

from .config import ScmConfig
from .errors import ConfigError, NotAtRiskError
from .states import (
    BP_HIGH,
    BP_NORMAL,
    FHR_BRADY_PERSISTENT,
    FHR_TACHYCARDIA,
    MAX_DILATATION,
    MODE_COARSE,
    N_FHR_CATEGORIES,
    BaselineCovariates,
    PatientState,
    TimeVaryingCovariates,
)

# Coarse dynamics do not depend on the baseline covariates, so condition
# states built from bare cells carry this reference baseline.
REFERENCE_BASELINE = BaselineCovariates(maternal_age=30.0, parity=0, history_preterm=False)


class Cell(NamedTuple):
    """At-risk covariate cell: everything the coarse dynamics read."""

    fhr: int
    dilat: int
    sbp: int
    dbp: int


def state_to_cell(state: PatientState) -> Cell:
    return Cell(int(state.tv.fhr), int(state.tv.dilatation), int(state.tv.sbp), int(state.tv.dbp))


def cell_to_state(cell: Cell, k: int, baseline: BaselineCovariates = REFERENCE_BASELINE) -> PatientState:
    tv = TimeVaryingCovariates(fhr=cell.fhr, brady_persist=(cell.fhr == FHR_BRADY_PERSISTENT),
                               dilatation=cell.dilat, sbp=cell.sbp, dbp=cell.dbp)
    return PatientState(k=k, baseline=baseline, tv=tv)


def _require_coarse(cfg: ScmConfig) -> None:
    if cfg.mode != MODE_COARSE:
        raise ConfigError("operation requires a coarse-mode config")


def _bp_reachable(to_high: float, stay_high: float) -> dict[int, list[int]]:
    """Successor levels with positive probability, per current level."""
    return {
        BP_NORMAL: [lvl for lvl, p in ((BP_HIGH, to_high), (BP_NORMAL, 1.0 - to_high)) if p > 0.0],
        BP_HIGH: [lvl for lvl, p in ((BP_HIGH, stay_high), (BP_NORMAL, 1.0 - stay_high)) if p > 0.0],
    }


def initial_support(cfg: ScmConfig) -> list[Cell]:
    """Cells with positive probability at the start of labor."""
    _require_coarse(cfg)
    dyn = cfg.coarse
    fhrs = [f for f in range(N_FHR_CATEGORIES) if dyn.fhr_initial[f] > 0.0]
    dilats = [d for d in range(MAX_DILATATION) if dyn.dilat_initial[d] > 0.0]
    sbps = [lvl for lvl, p in ((BP_HIGH, dyn.sbp_initial_high), (BP_NORMAL, 1.0 - dyn.sbp_initial_high)) if p > 0.0]
    dbps = [lvl for lvl, p in ((BP_HIGH, dyn.dbp_initial_high), (BP_NORMAL, 1.0 - dyn.dbp_initial_high)) if p > 0.0]
    return [Cell(f, d, s, b) for f in fhrs for d in dilats for s in sbps for b in dbps]


def enumerate_states(cfg: ScmConfig) -> list[Cell]:
    """All at-risk cells reachable from the initial support under any
    action/noise sequence, duplicate-free and deterministically ordered.

    Cesarean and birth lead out of the at-risk space, so only the
    continue-labor kernel generates successors.
    """
    _require_coarse(cfg)
    dyn = cfg.coarse
    fhr_succ = {
        f: [g for g in range(N_FHR_CATEGORIES) if dyn.fhr_transition[f][g] > 0.0]
        for f in range(N_FHR_CATEGORIES)
    }
    incs = [i for i, p in enumerate(dyn.dilat_increment) if p > 0.0]
    sbp_succ = _bp_reachable(dyn.sbp_to_high, dyn.sbp_stay_high)
    dbp_succ = _bp_reachable(dyn.dbp_to_high, dyn.dbp_stay_high)

    frontier = list(initial_support(cfg))
    seen = set(frontier)
    while frontier:
        cell = frontier.pop()
        for f in fhr_succ[cell.fhr]:
            for inc in incs:
                d = cell.dilat + inc
                if d >= MAX_DILATATION:
                    continue  # birth, leaves the at-risk space
                for s in sbp_succ[cell.sbp]:
                    for b in dbp_succ[cell.dbp]:
                        nxt = Cell(f, d, s, b)
                        if nxt not in seen:
                            seen.add(nxt)
                            frontier.append(nxt)
    return sorted(seen)


@dataclass
class CoarseKernel:
    """Precomputed arrays over the reachable cell space.

    ``survivor_matrix[i, j]`` is the probability of moving from cell i to
    at-risk cell j in one in-labor hour given no outcome; ``born_prob[i]``
    the probability of completing birth instead. Rows of
    ``survivor_matrix`` plus ``born_prob`` sum to one.
    """

    cfg: ScmConfig
    cells: list[Cell]
    index: dict[Cell, int]
    survivor_matrix: np.ndarray     # (n, n)
    born_prob: np.ndarray           # (n,)
    hazard_logit0: np.ndarray       # (n,) logit before the per-hour term
    hazard_per_hour: float
    surgical_prob: np.ndarray       # (n,)
    abnormal: np.ndarray            # (n,) {0,1}
    persist: np.ndarray             # (n,) {0,1}
    high_sbp: np.ndarray            # (n,) {0,1}
    stalled_ref: np.ndarray         # (n,) dilatation, for policy features
    initial_probs: np.ndarray       # (n,)

    def __post_init__(self):
        self._event_cdf_cache: dict[int, np.ndarray] = {}

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def hazard(self, k: int) -> np.ndarray:
        """Per-hour outcome hazard by cell at hour ``k``."""
        return expit(self.hazard_logit0 + self.hazard_per_hour * k)

    def event_probs(self, k: int) -> np.ndarray:
        """(n, n+2) one-hour event distribution under action 0 from each
        cell at hour k: column 0 = outcome, column 1 = birth, columns 2+
        = next at-risk cell."""
        hz = self.hazard(k)
        out = np.empty((self.n_cells, self.n_cells + 2))
        out[:, 0] = hz
        out[:, 1] = (1.0 - hz) * self.born_prob
        out[:, 2:] = (1.0 - hz)[:, None] * self.survivor_matrix
        return out

    def event_cdf(self, k: int) -> np.ndarray:
        key = k if self.hazard_per_hour != 0.0 else -1
        cached = self._event_cdf_cache.get(key)
        if cached is None:
            cached = np.cumsum(self.event_probs(k if key != -1 else 0), axis=1)
            self._event_cdf_cache[key] = cached
        return cached


def build_kernel(cfg: ScmConfig) -> CoarseKernel:
    """Assemble the product-form one-hour kernel on the reachable cells."""
    _require_coarse(cfg)
    dyn = cfg.coarse
    cells = enumerate_states(cfg)
    index = {c: i for i, c in enumerate(cells)}
    n = len(cells)

    fhr_rows = np.array(dyn.fhr_transition)
    inc_probs = np.array(dyn.dilat_increment)
    sbp_rows = np.array([[1.0 - dyn.sbp_to_high, dyn.sbp_to_high],
                         [1.0 - dyn.sbp_stay_high, dyn.sbp_stay_high]])
    dbp_rows = np.array([[1.0 - dyn.dbp_to_high, dyn.dbp_to_high],
                         [1.0 - dyn.dbp_stay_high, dyn.dbp_stay_high]])

    survivor = np.zeros((n, n))
    born = np.zeros(n)
    for i, cell in enumerate(cells):
        for inc, p_inc in enumerate(inc_probs):
            if p_inc == 0.0:
                continue
            d = cell.dilat + inc
            if d >= MAX_DILATATION:
                born[i] += p_inc
                continue
            for f in range(N_FHR_CATEGORIES):
                p_f = fhr_rows[cell.fhr, f]
                if p_f == 0.0:
                    continue
                for s in (BP_NORMAL, BP_HIGH):
                    p_s = sbp_rows[cell.sbp, s]
                    if p_s == 0.0:
                        continue
                    for b in (BP_NORMAL, BP_HIGH):
                        p_b = dbp_rows[cell.dbp, b]
                        if p_b == 0.0:
                            continue
                        survivor[i, index[Cell(f, d, s, b)]] += p_inc * p_f * p_s * p_b

    abnormal = np.array([int(c.fhr in (FHR_BRADY_PERSISTENT, FHR_TACHYCARDIA)) for c in cells])
    persist = np.array([int(c.fhr == FHR_BRADY_PERSISTENT) for c in cells])
    high_sbp = np.array([int(c.sbp == BP_HIGH) for c in cells])
    hz = dyn.hazard
    hazard_logit0 = (hz.intercept + hz.abnormal_fhr * abnormal
                     + hz.brady_persist * persist + hz.high_sbp * high_sbp)
    surgical = expit(dyn.surgical.intercept + dyn.surgical.high_sbp * high_sbp)

    init = np.zeros(n)
    sbp_init = np.array([1.0 - dyn.sbp_initial_high, dyn.sbp_initial_high])
    dbp_init = np.array([1.0 - dyn.dbp_initial_high, dyn.dbp_initial_high])
    for cell in initial_support(cfg):
        init[index[cell]] = (dyn.fhr_initial[cell.fhr] * dyn.dilat_initial[cell.dilat]
                             * sbp_init[cell.sbp] * dbp_init[cell.dbp])

    return CoarseKernel(
        cfg=cfg, cells=cells, index=index,
        survivor_matrix=survivor, born_prob=born,
        hazard_logit0=hazard_logit0, hazard_per_hour=hz.per_hour,
        surgical_prob=np.asarray(surgical), abnormal=abnormal, persist=persist,
        high_sbp=high_sbp,
        stalled_ref=np.array([c.dilat for c in cells], dtype=float),
        initial_probs=init,
    )


def next_distribution(state: PatientState, action: int, cfg: ScmConfig,
                      kernel: CoarseKernel | None = None):
    """Explicit one-hour event distribution from an at-risk coarse state.

    Returns ``(outcome_prob, born_prob, cell_probs)`` where ``cell_probs``
    maps successor at-risk cells to probabilities. For action 1 the only
    events are birth with or without the surgical outcome.
    """
    _require_coarse(cfg)
    if state.z != 1:
        raise NotAtRiskError("next_distribution requires an at-risk state")
    kernel = kernel or build_kernel(cfg)
    i = kernel.index.get(state_to_cell(state))
    if i is None:
        raise ConfigError(f"state cell {state_to_cell(state)} not reachable under this config")
    if action == 1:
        p = float(kernel.surgical_prob[i])
        return p, 1.0 - p, {}
    probs = kernel.event_probs(state.k)[i]
    cell_probs = {kernel.cells[j]: float(probs[2 + j]) for j in range(kernel.n_cells) if probs[2 + j] > 0.0}
    return float(probs[0]), float(probs[1]), cell_probs


# --- hourly action prescriptions ---------------------------------------

ActionProbsFn = Callable[[int, "CoarseKernel"], np.ndarray]
"""Maps (absolute hour, kernel) to the per-cell probability of initiating
a cesarean under the usual-care policy."""


def prescription_vector(regime, t_rel: int, kernel: CoarseKernel) -> np.ndarray | None:
    """Per-cell probability that the regime takes action 1 at relative
    hour ``t_rel`` after its anchor, or ``None`` for natural hours where
    the usual-care policy decides."""
    from . import regimes as rg

    n = kernel.n_cells
    if isinstance(regime, rg.VaginalOnly):
        return np.zeros(n)
    if isinstance(regime, rg.ImmediateCesarean):
        return np.ones(n)
    if isinstance(regime, rg.StaticSequence):
        if t_rel >= len(regime.actions):
            raise ConfigError(f"static sequence exhausted at position {t_rel}")
        return np.full(n, float(regime.actions[t_rel]))
    if isinstance(regime, rg.FixThenNatural):
        if t_rel < regime.fix_hours:
            return np.full(n, float(regime.fix_action))
        return None
    if isinstance(regime, rg.DynamicFhr):
        # Markov in the current cell: a triggered follower is already
        # absorbed, so an at-risk follower is triggered iff flagged now.
        return kernel.abnormal.astype(float)
    if isinstance(regime, rg.NaturalCourse):
        return None
    raise ConfigError(f"unknown regime {regime!r}")


def _resolve_action_probs(regime, anchor: int, hour: int, kernel: CoarseKernel,
                          usual_care_probs: ActionProbsFn | None) -> np.ndarray:
    pinned = prescription_vector(regime, hour - anchor, kernel)
    if pinned is not None:
        return pinned
    if usual_care_probs is None:
        raise ConfigError("regime has a natural segment but no usual-care policy was given")
    return np.asarray(usual_care_probs(hour, kernel), dtype=float)


# --- exact computations -------------------------------------------------

def backward_risk(kernel: CoarseKernel, regime, anchor: int, horizon: int,
                  usual_care_probs: ActionProbsFn | None = None) -> np.ndarray:
    """Exact probability of the composite outcome by ``horizon`` for each
    at-risk cell at hour ``anchor``, following ``regime`` from the anchor.

    Backward induction over hours: the value of a cell one hour before the
    horizon is its one-step event probability; earlier hours mix the
    cesarean branch (one-time surgical risk) and the continue-labor branch
    (hazard now, then the survivor-weighted next-hour value).
    """
    if horizon < anchor:
        raise ConfigError(f"horizon {horizon} precedes anchor hour {anchor}")
    values = np.zeros(kernel.n_cells)
    for hour in range(horizon - 1, anchor - 1, -1):
        p1 = _resolve_action_probs(regime, anchor, hour, kernel, usual_care_probs)
        hz = kernel.hazard(hour)
        continue_value = hz + (1.0 - hz) * (kernel.survivor_matrix @ values)
        values = p1 * kernel.surgical_prob + (1.0 - p1) * continue_value
    return values


def forward_occupancy(kernel: CoarseKernel, horizon: int,
                      action_probs: ActionProbsFn,
                      initial: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Exact hour-by-hour distribution of the population under a policy.

    Returns arrays indexed by hour: ``at_risk[t, cell]`` mass still in
    labor, plus cumulative masses of cesarean initiations, outcomes, and
    births.
    """
    n = kernel.n_cells
    mu = kernel.initial_probs.copy() if initial is None else np.asarray(initial, dtype=float).copy()
    at_risk = np.zeros((horizon + 1, n))
    cum_cesarean = np.zeros(horizon + 1)
    cum_outcome = np.zeros(horizon + 1)
    cum_born = np.zeros(horizon + 1)
    at_risk[0] = mu
    for t in range(horizon):
        p1 = np.asarray(action_probs(t, kernel), dtype=float)
        ces = mu * p1
        stay = mu * (1.0 - p1)
        hz = kernel.hazard(t)
        outcome_mass = float(np.sum(stay * hz)) + float(np.sum(ces * kernel.surgical_prob))
        born_mass = float(np.sum(stay * (1.0 - hz) * kernel.born_prob)) + float(np.sum(ces * (1.0 - kernel.surgical_prob)))
        mu = (stay * (1.0 - hz)) @ kernel.survivor_matrix
        cum_cesarean[t + 1] = cum_cesarean[t] + float(ces.sum())
        cum_outcome[t + 1] = cum_outcome[t] + outcome_mass
        cum_born[t + 1] = cum_born[t] + born_mass
        at_risk[t + 1] = mu
    return {"at_risk": at_risk, "cum_cesarean": cum_cesarean,
            "cum_outcome": cum_outcome, "cum_born": cum_born}


def consistency_profile(kernel: CoarseKernel, regime, horizon: int,
                        action_probs: ActionProbsFn,
                        initial: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Exact per-(hour, cell) masses behind a sequential-positivity report
    for a regime anchored at hour 0 under an observational policy.

    ``at_risk[t, cell]``: mass at risk at t (any history).
    ``consistent[t, cell]``: mass at risk at t whose actions through t
    (inclusive) match the regime; natural hours constrain nothing, and no
    action is taken at the final hour, so the horizon row has no action
    constraint.
    """
    n = kernel.n_cells
    occ = forward_occupancy(kernel, horizon, action_probs, initial)
    rho = kernel.initial_probs.copy() if initial is None else np.asarray(initial, dtype=float).copy()
    consistent = np.zeros((horizon + 1, n))
    for t in range(horizon + 1):
        p1 = np.asarray(action_probs(t, kernel), dtype=float)
        pinned = prescription_vector(regime, t, kernel) if t < horizon else None
        if pinned is None:
            match = np.ones(n)
            continue_frac = 1.0 - p1
        else:
            match = np.where(pinned == 1.0, p1, 1.0 - p1)
            continue_frac = np.where(pinned == 1.0, 0.0, 1.0 - p1)
        consistent[t] = rho * match
        if t < horizon:
            hz = kernel.hazard(t)
            rho = (rho * continue_frac * (1.0 - hz)) @ kernel.survivor_matrix
    return {"at_risk": occ["at_risk"], "consistent": consistent}


# --- vectorized simulation ----------------------------------------------

OUTCOME_SLOT = 0
BORN_SLOT = 1


def simulate_batch(kernel: CoarseKernel, start_cells: np.ndarray, anchor: int,
                   horizon: int, regime, rng: np.random.Generator,
                   usual_care_probs: ActionProbsFn | None = None) -> dict[str, np.ndarray]:
    """Vectorized Monte Carlo from given cells at hour ``anchor`` through
    ``horizon`` under a regime (mixing in usual care on natural hours).

    Returns outcome indicators plus birth/cesarean bookkeeping. One
    categorical event draw per replication-hour; replications advance in
    cell-sorted groups so results are deterministic for a given generator.
    """
    m = len(start_cells)
    cells = np.asarray(start_cells, dtype=np.int64).copy()
    alive = np.ones(m, dtype=bool)
    outcome = np.zeros(m, dtype=bool)
    born = np.zeros(m, dtype=bool)
    cesarean = np.zeros(m, dtype=bool)

    for hour in range(anchor, horizon):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        p1 = _resolve_action_probs(regime, anchor, hour, kernel, usual_care_probs)
        act1 = rng.random(idx.size) < p1[cells[idx]]

        ces_idx = idx[act1]
        if ces_idx.size:
            bad = rng.random(ces_idx.size) < kernel.surgical_prob[cells[ces_idx]]
            outcome[ces_idx] |= bad
            born[ces_idx] = True
            cesarean[ces_idx] = True
            alive[ces_idx] = False

        lab_idx = idx[~act1]
        if lab_idx.size:
            cdf = kernel.event_cdf(hour)
            u = rng.random(lab_idx.size)
            order = np.argsort(cells[lab_idx], kind="stable")
            lab_sorted = lab_idx[order]
            u_sorted = u[order]
            cell_sorted = cells[lab_sorted]
            starts = np.flatnonzero(np.r_[True, cell_sorted[1:] != cell_sorted[:-1]])
            bounds = np.r_[starts, cell_sorted.size]
            for g in range(starts.size):
                lo, hi = bounds[g], bounds[g + 1]
                c = cell_sorted[lo]
                slots = np.searchsorted(cdf[c], u_sorted[lo:hi], side="right")
                np.minimum(slots, kernel.n_cells + 1, out=slots)  # guard rounding at cdf tail
                grp = lab_sorted[lo:hi]
                got_outcome = slots == OUTCOME_SLOT
                got_born = slots == BORN_SLOT
                moved = ~(got_outcome | got_born)
                outcome[grp[got_outcome]] = True
                alive[grp[got_outcome]] = False
                born[grp[got_born]] = True
                alive[grp[got_born]] = False
                cells[grp[moved]] = slots[moved] - 2
    return {"outcome": outcome, "born": born, "cesarean": cesarean,
            "at_risk": alive, "cells": cells}


def sample_initial_cells(kernel: CoarseKernel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw start-of-labor cells from the configured initial distribution."""
    return rng.choice(kernel.n_cells, size=n, p=kernel.initial_probs)


def distress_cell() -> Cell:
    """The designated abnormal-FHR profile used in the confounding
    demonstrations: persistent bradycardia, mid-labor dilatation, normal
    blood pressures."""
    return Cell(fhr=FHR_BRADY_PERSISTENT, dilat=3, sbp=BP_NORMAL, dbp=BP_NORMAL)
