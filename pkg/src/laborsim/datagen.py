"""Observational data generation and sequential-positivity diagnostics.

``generate_dataset`` simulates independent labors under a usual-care
policy and flattens them to person-hour records. The coarse mode is
vectorized over persons (one categorical event draw per person-hour); the
continuous mode simulates per person on derived substreams. Either way the
output is a pure function of (n, config, policy, seed).

``positivity_report`` counts, per hour and covariate stratum, how many
at-risk persons have followed a regime of interest so far — the support an
estimator of that regime's risk would condition on. Cells with fewer
followers than a threshold are flagged; a flagged cell with zero followers
despite an adequately populated risk set is a structural zero (the regime
is unobservable there).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .coarse import build_kernel
from .config import ScmConfig
from .dataset import Dataset, _columns_to_dataset, trajectories_to_dataset
from .errors import ConfigError
from .policy import UsualCarePolicy
from .regimes import DynamicFhr, pinned_action, regime_to_json_dict
from .rng import substream
from .scm import sample_baseline, simulate_trajectory
from .states import (
    AGE_MAX,
    AGE_MIN,
    FHR_BRADY_PERSISTENT,
    FHR_CATEGORIES,
    FHR_LOWER_DEFAULT,
    FHR_TACHYCARDIA,
    FHR_UPPER_DEFAULT,
    MAX_DILATATION,
    MODE_COARSE,
    PARITY_MAX,
)


def generate_dataset(n: int, cfg: ScmConfig, policy: UsualCarePolicy, seed: int) -> Dataset:
    """Simulate ``n`` independent labors under ``policy`` and flatten them
    to person-hour records, deterministically for a given seed."""
    if n < 1:
        raise ConfigError("dataset size n must be >= 1")
    if cfg.mode == MODE_COARSE:
        return _generate_coarse(n, cfg, policy, seed)
    return _generate_continuous(n, cfg, policy, seed)


def generate_trajectories(n: int, cfg: ScmConfig, policy: UsualCarePolicy, seed: int) -> Dataset:
    """Per-person (scalar) generation path: one derived substream per
    person, the same hour step the session service uses. Slower than
    ``generate_dataset`` but exercises the scalar machinery end to end."""
    trajectories = []
    for person in range(n):
        rng = substream(seed, "person", person)
        baseline = sample_baseline(rng, cfg)
        trajectories.append(simulate_trajectory(baseline, policy.as_policy(rng, cfg.mode), rng, cfg))
    return trajectories_to_dataset(trajectories, cfg.mode)


def _sample_baselines(n: int, cfg: ScmConfig, rng: np.random.Generator):
    b = cfg.baseline
    age = np.round(np.clip(rng.normal(b.age_mean, b.age_sd, n), AGE_MIN, AGE_MAX), 4)
    parity = np.minimum(rng.poisson(b.parity_rate, n), PARITY_MAX).astype(np.int64)
    preterm = rng.random(n) < b.preterm_prob
    return age, parity, preterm


def _generate_coarse(n: int, cfg: ScmConfig, policy: UsualCarePolicy, seed: int) -> Dataset:
    kernel = build_kernel(cfg)
    rng = substream(seed, "coarse-dataset")
    age, parity, preterm = _sample_baselines(n, cfg, rng)

    cells = rng.choice(kernel.n_cells, size=n, p=kernel.initial_probs)
    alive = np.ones(n, dtype=bool)
    a_status = np.zeros(n, dtype=np.int64)
    y_status = np.zeros(n, dtype=np.int64)
    born = np.zeros(n, dtype=bool)
    born_vaginal = np.zeros(n, dtype=bool)
    emitted = np.ones(n, dtype=bool)  # absorbed persons emit their final row once

    chunks: list[tuple[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
    for hour in range(cfg.horizon + 1):
        keep = np.flatnonzero(emitted)
        chunks.append((hour, keep, cells[keep].copy(), a_status[keep].copy(),
                       y_status[keep].copy(), born[keep].copy(), born_vaginal[keep].copy()))
        emitted &= alive
        if hour == cfg.horizon or not alive.any():
            break

        idx = np.flatnonzero(alive)
        p1 = policy.cell_probs(hour, kernel)
        act1 = rng.random(idx.size) < p1[cells[idx]]

        ces = idx[act1]
        if ces.size:
            bad = rng.random(ces.size) < kernel.surgical_prob[cells[ces]]
            y_status[ces[bad]] = 1
            born[ces] = True
            a_status[ces] = 1
            alive[ces] = False

        lab = idx[~act1]
        if lab.size:
            cdf = kernel.event_cdf(hour)
            order = np.argsort(cells[lab], kind="stable")
            lab = lab[order]
            u = rng.random(lab.size)
            cell_sorted = cells[lab]
            starts = np.flatnonzero(np.r_[True, cell_sorted[1:] != cell_sorted[:-1]])
            bounds = np.r_[starts, cell_sorted.size]
            for g in range(starts.size):
                lo, hi = bounds[g], bounds[g + 1]
                c = cell_sorted[lo]
                slots = np.searchsorted(cdf[c], u[lo:hi], side="right")
                np.minimum(slots, kernel.n_cells + 1, out=slots)
                grp = lab[lo:hi]
                got_outcome = slots == 0
                got_born = slots == 1
                moved = ~(got_outcome | got_born)
                y_status[grp[got_outcome]] = 1
                alive[grp[got_outcome]] = False
                born[grp[got_born]] = True
                born_vaginal[grp[got_born]] = True
                alive[grp[got_born]] = False
                cells[grp[moved]] = slots[moved] - 2

    fhr_of = np.array([c.fhr for c in kernel.cells])
    dilat_of = np.array([c.dilat for c in kernel.cells])
    sbp_of = np.array([c.sbp for c in kernel.cells])
    dbp_of = np.array([c.dbp for c in kernel.cells])

    person = np.concatenate([c[1] for c in chunks])
    hour_col = np.concatenate([np.full(c[1].size, c[0], dtype=np.int64) for c in chunks])
    cell_col = np.concatenate([c[2] for c in chunks])
    a_col = np.concatenate([c[3] for c in chunks])
    y_col = np.concatenate([c[4] for c in chunks])
    born_col = np.concatenate([c[5] for c in chunks])
    vag_col = np.concatenate([c[6] for c in chunks])
    order = np.lexsort((hour_col, person))

    dilat_col = dilat_of[cell_col]
    # A completed vaginal birth shows full dilatation; other vitals carry
    # their last in-labor values (cesarean rows keep the pre-op vitals).
    dilat_col[vag_col] = MAX_DILATATION

    fhr = fhr_of[cell_col[order]]
    rows = {
        "person_id": person[order],
        "k": hour_col[order],
        "maternal_age": age[person[order]],
        "parity": parity[person[order]],
        "history_preterm": preterm[person[order]],
        "fhr": fhr,
        "brady_persist": fhr == FHR_BRADY_PERSISTENT,
        "dilatation": dilat_col[order],
        "sbp": sbp_of[cell_col[order]],
        "dbp": dbp_of[cell_col[order]],
        "a": a_col[order],
        "z": ((y_col[order] == 0) & (~born_col[order])).astype(np.int64),
        "y": y_col[order],
        "born": born_col[order],
    }
    return _columns_to_dataset(rows, MODE_COARSE, n)


def _generate_continuous(n: int, cfg: ScmConfig, policy: UsualCarePolicy, seed: int) -> Dataset:
    """Vectorized continuous-mode generation, mirroring the scalar hour
    step: policy action, then cesarean branch or (hazard, vitals, birth)."""
    from scipy.special import expit
    from .states import (DBP_MAX, DBP_MIN, FHR_MAX, FHR_MIN,
                         SBP_HIGH_THRESHOLD, SBP_MAX, SBP_MIN)

    dyn = cfg.continuous
    rng = substream(seed, "continuous-dataset")
    age, parity, preterm = _sample_baselines(n, cfg, rng)

    fhr = np.clip(rng.normal(dyn.fhr_initial_mean, dyn.fhr_initial_sd, n),
                  dyn.fhr_initial_min, dyn.fhr_initial_max)
    persist = (fhr < FHR_LOWER_DEFAULT) & (rng.random(n) < dyn.persist_prob)
    dilat = np.clip(rng.normal(dyn.dilat_initial_mean, dyn.dilat_initial_sd, n),
                    dyn.dilat_initial_min, dyn.dilat_initial_max)
    sbp = np.clip(rng.normal(dyn.sbp_initial_mean, dyn.sbp_initial_sd, n), SBP_MIN, SBP_MAX)
    dbp = np.clip(rng.normal(dyn.dbp_initial_mean, dyn.dbp_initial_sd, n), DBP_MIN, DBP_MAX)

    alive = np.ones(n, dtype=bool)
    a_status = np.zeros(n, dtype=np.int64)
    y_status = np.zeros(n, dtype=np.int64)
    born = np.zeros(n, dtype=bool)
    emitted = np.ones(n, dtype=bool)
    parous = parity >= 1
    hz = dyn.hazard

    chunks = []
    for hour in range(cfg.horizon + 1):
        keep = np.flatnonzero(emitted)
        chunks.append((hour, keep, fhr[keep].copy(), persist[keep].copy(), dilat[keep].copy(),
                       sbp[keep].copy(), dbp[keep].copy(), a_status[keep].copy(),
                       y_status[keep].copy(), born[keep].copy()))
        emitted &= alive
        if hour == cfg.horizon or not alive.any():
            break

        idx = np.flatnonzero(alive)
        abn = (((fhr[idx] < FHR_LOWER_DEFAULT) & persist[idx])
               | (fhr[idx] > FHR_UPPER_DEFAULT)).astype(float)
        p1 = policy.probability_arrays(abn, dilat[idx], hour)
        act1 = rng.random(idx.size) < p1

        ces = idx[act1]
        if ces.size:
            p_surg = expit(dyn.surgical.intercept
                           + dyn.surgical.high_sbp * (sbp[ces] >= SBP_HIGH_THRESHOLD))
            y_status[ces[rng.random(ces.size) < p_surg]] = 1
            born[ces] = True
            a_status[ces] = 1
            alive[ces] = False

        lab = idx[~act1]
        if not lab.size:
            continue
        abn_lab = (((fhr[lab] < FHR_LOWER_DEFAULT) & persist[lab])
                   | (fhr[lab] > FHR_UPPER_DEFAULT)).astype(float)
        hazard = expit(hz.intercept + hz.abnormal_fhr * abn_lab
                       + hz.brady_persist * persist[lab]
                       + hz.high_sbp * (sbp[lab] >= SBP_HIGH_THRESHOLD)
                       + hz.per_hour * hour)
        hit = rng.random(lab.size) < hazard
        y_status[lab[hit]] = 1
        alive[lab[hit]] = False
        surv = lab[~hit]
        if not surv.size:
            continue

        m = surv.size
        brady_ev = rng.random(m) < expit(dyn.brady_event_intercept + dyn.brady_event_per_hour * hour)
        tachy_ev = ~brady_ev & (rng.random(m) < expit(dyn.tachy_event_intercept + dyn.tachy_event_per_hour * hour))
        drift = (fhr[surv] + dyn.fhr_revert_rate * (dyn.fhr_setpoint - fhr[surv])
                 + rng.normal(0.0, dyn.fhr_noise_sd, m))
        new_fhr = np.where(brady_ev, rng.normal(dyn.brady_value_mean, dyn.brady_value_sd, m),
                           np.where(tachy_ev, rng.normal(dyn.tachy_value_mean, dyn.tachy_value_sd, m), drift))
        fhr[surv] = np.clip(new_fhr, FHR_MIN, FHR_MAX)
        persist[surv] = (fhr[surv] < FHR_LOWER_DEFAULT) & (rng.random(m) < dyn.persist_prob)
        rate = np.maximum(0.0, rng.normal(dyn.dilat_rate_mean, dyn.dilat_rate_sd, m))
        rate[parous[surv]] *= dyn.parous_rate_factor
        dilat[surv] = np.minimum(MAX_DILATATION, dilat[surv] + rate)
        sbp[surv] = np.clip(sbp[surv] + dyn.sbp_revert_rate * (dyn.sbp_setpoint - sbp[surv])
                            + rng.normal(0.0, dyn.sbp_noise_sd, m), SBP_MIN, SBP_MAX)
        dbp[surv] = np.clip(dbp[surv] + dyn.dbp_revert_rate * (dyn.dbp_setpoint - dbp[surv])
                            + rng.normal(0.0, dyn.dbp_noise_sd, m), DBP_MIN, DBP_MAX)
        done = dilat[surv] >= MAX_DILATATION
        born[surv[done]] = True
        alive[surv[done]] = False

    person = np.concatenate([c[1] for c in chunks])
    hour_col = np.concatenate([np.full(c[1].size, c[0], dtype=np.int64) for c in chunks])
    data = {
        "fhr": np.concatenate([c[2] for c in chunks]),
        "brady_persist": np.concatenate([c[3] for c in chunks]),
        "dilatation": np.concatenate([c[4] for c in chunks]),
        "sbp": np.concatenate([c[5] for c in chunks]),
        "dbp": np.concatenate([c[6] for c in chunks]),
        "a": np.concatenate([c[7] for c in chunks]),
        "y": np.concatenate([c[8] for c in chunks]),
        "born": np.concatenate([c[9] for c in chunks]),
    }
    order = np.lexsort((hour_col, person))
    rows = {
        "person_id": person[order],
        "k": hour_col[order],
        "maternal_age": age[person[order]],
        "parity": parity[person[order]],
        "history_preterm": preterm[person[order]],
        "fhr": np.round(data["fhr"][order], 4),
        "brady_persist": data["brady_persist"][order],
        "dilatation": np.round(data["dilatation"][order], 4),
        "sbp": np.round(data["sbp"][order], 4),
        "dbp": np.round(data["dbp"][order], 4),
        "a": data["a"][order],
        "z": ((data["y"][order] == 0) & (~data["born"][order])).astype(np.int64),
        "y": data["y"][order],
        "born": data["born"][order],
    }
    from .states import MODE_CONTINUOUS
    return _columns_to_dataset(rows, MODE_CONTINUOUS, n)


# --- positivity ----------------------------------------------------------

DILAT_TERCILES = ((0, 3), (4, 6), (7, 10))


def default_stratum_labels() -> list[str]:
    return [f"{cat}/dilat{lo}-{hi}" for cat in FHR_CATEGORIES for lo, hi in DILAT_TERCILES]


def _dilat_bin(dilat: np.ndarray) -> np.ndarray:
    edges = np.array([t[0] for t in DILAT_TERCILES[1:]], dtype=float)
    return np.searchsorted(edges, np.asarray(dilat, dtype=float), side="right")


def stratum_codes(fhr_cat: np.ndarray, dilat: np.ndarray) -> np.ndarray:
    return fhr_cat * len(DILAT_TERCILES) + _dilat_bin(dilat)


def fhr_category_codes(ds: Dataset) -> np.ndarray:
    """FHR category per row, derived from thresholds in continuous mode."""
    if ds.mode == MODE_COARSE:
        return ds.cols["fhr"]
    fhr = ds.cols["fhr"]
    persist = ds.cols["brady_persist"]
    codes = np.zeros(len(ds), dtype=np.int64)
    low = fhr < FHR_LOWER_DEFAULT
    codes[low & persist] = FHR_BRADY_PERSISTENT
    codes[low & ~persist] = 1  # transient bradycardia
    codes[fhr > FHR_UPPER_DEFAULT] = FHR_TACHYCARDIA
    return codes


@dataclass
class PositivityReport:
    """Follower counts per (hour, stratum) for one regime of interest."""

    regime_json: dict
    threshold: int
    hours: np.ndarray          # (rows,)
    strata: np.ndarray         # (rows,) stratum index
    stratum_labels: list[str]
    n_at_risk: np.ndarray      # (rows,)
    n_consistent: np.ndarray   # (rows,)

    @property
    def flagged(self) -> np.ndarray:
        return self.n_consistent < self.threshold

    def structural_zero_rows(self) -> np.ndarray:
        """Flagged rows where the regime is entirely unobserved despite an
        adequately populated risk set."""
        return np.flatnonzero(self.flagged & (self.n_consistent == 0)
                              & (self.n_at_risk >= self.threshold))

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["hour", "stratum", "n_at_risk", "n_consistent", "flagged"])
            for i in range(len(self.hours)):
                w.writerow([int(self.hours[i]), self.stratum_labels[int(self.strata[i])],
                            int(self.n_at_risk[i]), int(self.n_consistent[i]),
                            bool(self.flagged[i])])


def positivity_report(ds: Dataset, regime, threshold: int = 5) -> PositivityReport:
    """Sequential-positivity diagnostics for ``regime`` anchored at hour 0.

    For each hour and (FHR category x dilatation band) stratum, counts the
    at-risk persons and, among them, those whose observed actions through
    that hour match the regime (natural-course hours match anything; the
    final recorded hour has no action and cannot violate). Strata with no
    at-risk persons are omitted.
    """
    pid = ds.cols["person_id"]
    k = ds.cols["k"]
    z = ds.cols["z"]
    actions = ds.action_rows()
    fhr_cat = fhr_category_codes(ds)
    strata = stratum_codes(fhr_cat, ds.cols["dilatation"])
    abnormal = (fhr_cat == FHR_BRADY_PERSISTENT) | (fhr_cat == FHR_TACHYCARDIA)

    size = int(pid.max()) + 1 if len(ds) else 0
    follower = np.ones(size, dtype=bool)
    triggered = np.zeros(size, dtype=bool)
    n_strata = len(default_stratum_labels())
    max_hour = int(k.max()) if len(ds) else -1

    out_hours, out_strata, out_risk, out_cons = [], [], [], []
    for hour in range(max_hour + 1):
        rows = np.flatnonzero((k == hour) & (z == 1))
        if rows.size == 0:
            continue
        p = pid[rows]
        act = actions[rows]
        if isinstance(regime, DynamicFhr):
            np.logical_or.at(triggered, p, abnormal[rows])
            required = triggered[p].astype(np.int64)
            pinned = True
        else:
            scalar = pinned_action(regime, hour)
            pinned = scalar is not None
            required = np.full(rows.size, scalar if pinned else 0, dtype=np.int64)
        if pinned:
            match = (act == -1) | (act == required)
        else:
            match = np.ones(rows.size, dtype=bool)
        consistent = follower[p] & match
        violating = follower[p] & ~match
        follower[p[violating]] = False

        risk_counts = np.bincount(strata[rows], minlength=n_strata)
        cons_counts = np.bincount(strata[rows][consistent], minlength=n_strata)
        occupied = np.flatnonzero(risk_counts > 0)
        out_hours.extend([hour] * occupied.size)
        out_strata.extend(occupied.tolist())
        out_risk.extend(risk_counts[occupied].tolist())
        out_cons.extend(cons_counts[occupied].tolist())

    return PositivityReport(
        regime_json=regime_to_json_dict(regime),
        threshold=threshold,
        hours=np.asarray(out_hours, dtype=np.int64),
        strata=np.asarray(out_strata, dtype=np.int64),
        stratum_labels=default_stratum_labels(),
        n_at_risk=np.asarray(out_risk, dtype=np.int64),
        n_consistent=np.asarray(out_cons, dtype=np.int64),
    )
