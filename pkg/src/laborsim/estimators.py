"""Estimators learned from observational person-hour data.

Three routes to a predicted risk, all validated against the oracles:

* ``fit_naive`` — the standard prediction model the package exists to
  warn about: P(outcome by horizon | state at hour k), ignoring what
  treatment happens afterwards;
* ``fit_gcomp`` / ``gcomp_predict`` — parametric g-computation: fit the
  transition machinery (vitals, hazard, birth, surgical risk, propensity)
  and simulate forward under the intervention option;
* ``ice_estimate`` — iterated conditional expectations: backward
  regressions over regime-consistent records, valid for static regimes.

In coarse mode every component is saturated (one parameter per observed
feature cell, empirical frequencies exactly), so estimator logic can be
isolated from model misspecification. Unobserved cells fall back to the
pooled frequency, which matters only at small sample sizes. In continuous
mode the components are GLM approximations of the generative process;
the feature sets for the hazard and propensity match it exactly, the
vitals models are documented approximations.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .coarse import CoarseKernel, simulate_batch
from .dataset import Dataset
from .errors import ConfigError, DataFormatError, PositivityError
from .estimands import (
    EstimandSpec,
    METHOD_GCOMP,
    METHOD_ICE,
    METHOD_NAIVE,
    RiskEstimate,
)
from .regimes import pinned_action
from .rng import substream
from .states import (
    BP_HIGH,
    FHR_BRADY_PERSISTENT,
    FHR_TACHYCARDIA,
    MAX_DILATATION,
    MODE_COARSE,
    N_FHR_CATEGORIES,
    PatientState,
)

N_DILAT_AT_RISK = MAX_DILATATION  # at-risk dilatation levels 0..9


# --- saturated frequency tables ------------------------------------------

@dataclass
class FrequencyTable:
    """Saturated conditional distribution: counts of ``levels`` outcomes
    per integer key, with the pooled distribution as fallback for keys
    never observed."""

    name: str
    n_keys: int
    levels: int
    counts: np.ndarray  # (n_keys, levels)

    @classmethod
    def fit(cls, name: str, keys: np.ndarray, values: np.ndarray,
            n_keys: int, levels: int) -> "FrequencyTable":
        counts = np.zeros((n_keys, levels))
        np.add.at(counts, (keys, values), 1.0)
        return cls(name=name, n_keys=n_keys, levels=levels, counts=counts)

    @property
    def pooled(self) -> np.ndarray:
        total = self.counts.sum(axis=0)
        if total.sum() == 0:
            raise DataFormatError(f"table {self.name}: no observations at all")
        return total / total.sum()

    def dist(self) -> np.ndarray:
        """(n_keys, levels) conditional distributions, pooled where the
        key was never observed."""
        row_sums = self.counts.sum(axis=1, keepdims=True)
        out = np.tile(self.pooled, (self.n_keys, 1))
        seen = row_sums[:, 0] > 0
        out[seen] = self.counts[seen] / row_sums[seen]
        return out

    def prob(self) -> np.ndarray:
        """P(level 1) per key for binary tables."""
        if self.levels != 2:
            raise ConfigError(f"table {self.name} is not binary")
        return self.dist()[:, 1]

    def n_obs(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_json_dict(self) -> dict:
        return {"name": self.name, "n_keys": self.n_keys, "levels": self.levels,
                "counts": self.counts.tolist()}

    @classmethod
    def from_json_dict(cls, data: dict) -> "FrequencyTable":
        return cls(name=data["name"], n_keys=int(data["n_keys"]), levels=int(data["levels"]),
                   counts=np.asarray(data["counts"], dtype=float))


# --- grid helpers ---------------------------------------------------------

def grid_index(fhr: np.ndarray, dilat: np.ndarray, sbp: np.ndarray, dbp: np.ndarray) -> np.ndarray:
    """Dense index over the full at-risk cell grid (4 x 10 x 2 x 2)."""
    return ((np.asarray(fhr) * N_DILAT_AT_RISK + np.asarray(dilat)) * 2 + np.asarray(sbp)) * 2 + np.asarray(dbp)


N_GRID = N_FHR_CATEGORIES * N_DILAT_AT_RISK * 2 * 2


def _grid_cells():
    from .coarse import Cell
    return [Cell(f, d, s, b)
            for f in range(N_FHR_CATEGORIES)
            for d in range(N_DILAT_AT_RISK)
            for s in (0, 1)
            for b in (0, 1)]


def state_grid_index(state: PatientState) -> int:
    return int(grid_index(np.asarray(int(state.tv.fhr)), np.asarray(int(state.tv.dilatation)),
                          np.asarray(int(state.tv.sbp)), np.asarray(int(state.tv.dbp))))


def _check_coarse(ds: Dataset, what: str) -> None:
    if ds.mode != MODE_COARSE:
        raise ConfigError(f"{what} requires a coarse-mode dataset; "
                          "continuous-mode estimation goes through the GLM components")


def split_by_person(ds: Dataset, train_frac: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Deterministic train/evaluation split by person."""
    persons = np.unique(ds.cols["person_id"])
    rng = substream(seed, "split")
    perm = rng.permutation(persons.size)
    n_train = int(round(train_frac * persons.size))
    train_ids = set(persons[perm[:n_train]].tolist())
    in_train = np.isin(ds.cols["person_id"], list(train_ids))
    take = lambda mask: Dataset(mode=ds.mode, cols={c: ds.cols[c][mask] for c in ds.cols})
    return take(in_train), take(~in_train)


# --- naive estimator -------------------------------------------------------

@dataclass
class NaiveModel:
    """P(outcome by horizon | state at hour k, at risk), treatment ignored.

    Saturated over the coarse state grid; unseen cells fall back to the
    pooled risk among the hour-k risk set.
    """

    k: int
    horizon: int
    table: FrequencyTable

    def predict_cell(self, cell_idx: int) -> RiskEstimate:
        probs = self.table.prob()
        n = int(self.table.n_obs()[cell_idx])
        p = float(probs[cell_idx])
        se = float(np.sqrt(p * (1.0 - p) / n)) if n > 0 else float(np.sqrt(0.25 / max(1, self.table.counts.sum())))
        return RiskEstimate(p=p, se=se, n=n, method=METHOD_NAIVE)

    def predict(self, state: PatientState) -> RiskEstimate:
        return self.predict_cell(state_grid_index(state))


def fit_naive(ds: Dataset, k: int, horizon: int) -> NaiveModel:
    """Fit the naive conditional-risk model at hour ``k``."""
    _check_coarse(ds, "fit_naive")
    rows = ds.at_risk_index(k)
    if rows.size == 0:
        raise DataFormatError(f"no at-risk records at hour {k}")
    outcome_by = ds.outcome_by(horizon)
    person_pos = {int(pid): i for i, pid in enumerate(np.unique(ds.cols["person_id"]))}
    labels = np.array([outcome_by[person_pos[int(p)]] for p in ds.cols["person_id"][rows]])
    keys = grid_index(ds.cols["fhr"][rows], ds.cols["dilatation"][rows],
                      ds.cols["sbp"][rows], ds.cols["dbp"][rows])
    table = FrequencyTable.fit(f"naive@k={k}", keys, labels, N_GRID, 2)
    return NaiveModel(k=k, horizon=horizon, table=table)


# --- g-computation: coarse transition models -------------------------------

def _hazard_key(fhr: np.ndarray, sbp: np.ndarray) -> np.ndarray:
    return np.asarray(fhr) * 2 + np.asarray(sbp)


def _propensity_key(abnormal: np.ndarray, stalled: np.ndarray) -> np.ndarray:
    return np.asarray(abnormal) * 2 + np.asarray(stalled)


@dataclass
class TransitionModels:
    """Fitted coarse transition machinery, saturated per component on its
    generative parents: hazard and surgical risk, each vital's next-value
    table, and the usual-care propensity (per hour with pooled fallback)."""

    hazard: FrequencyTable        # key fhr*2+sbp -> outcome next
    fhr_next: FrequencyTable      # key fhr -> next category
    dilat_next: FrequencyTable    # key dilat -> next dilatation (10 = birth)
    sbp_next: FrequencyTable      # key sbp -> next level
    dbp_next: FrequencyTable      # key dbp -> next level
    surgical: FrequencyTable      # key sbp -> outcome on cesarean
    propensity: FrequencyTable    # key (abnormal*2+stalled) -> action
    propensity_hourly: dict[int, FrequencyTable] = field(default_factory=dict)
    n_rows: int = 0
    hours_seen: tuple[int, ...] = ()

    def summary(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "hours_seen": list(self.hours_seen),
            "components": {
                t.name: float(t.counts.sum())
                for t in (self.hazard, self.fhr_next, self.dilat_next,
                          self.sbp_next, self.dbp_next, self.surgical, self.propensity)
            },
        }

    def as_kernel(self) -> CoarseKernel:
        """Assemble the fitted tables into a one-hour kernel on the full
        cell grid, reusing the exact/Monte Carlo machinery."""
        cells = _grid_cells()
        index = {c: i for i, c in enumerate(cells)}
        fhr = np.array([c.fhr for c in cells])
        dilat = np.array([c.dilat for c in cells])
        sbp = np.array([c.sbp for c in cells])
        dbp = np.array([c.dbp for c in cells])

        fhr_dist = self.fhr_next.dist()          # (4, 4)
        dilat_dist = self.dilat_next.dist()      # (10, 11)
        sbp_dist = self.sbp_next.dist()          # (2, 2)
        dbp_dist = self.dbp_next.dist()          # (2, 2)

        n = len(cells)
        survivor = np.zeros((n, n))
        born = np.zeros(n)
        for i, c in enumerate(cells):
            born[i] = dilat_dist[c.dilat, MAX_DILATATION:].sum()
            for f in range(N_FHR_CATEGORIES):
                pf = fhr_dist[c.fhr, f]
                if pf == 0.0:
                    continue
                for d in range(N_DILAT_AT_RISK):
                    pd = dilat_dist[c.dilat, d]
                    if pd == 0.0:
                        continue
                    for s in (0, 1):
                        ps = sbp_dist[c.sbp, s]
                        if ps == 0.0:
                            continue
                        for b in (0, 1):
                            pb = dbp_dist[c.dbp, b]
                            if pb == 0.0:
                                continue
                            survivor[i, index[(f, d, s, b)]] += pf * pd * ps * pb

        hz_prob = self.hazard.prob()[_hazard_key(fhr, sbp)]
        with np.errstate(divide="ignore"):
            hz_logit = np.log(hz_prob) - np.log1p(-hz_prob)
        abnormal = ((fhr == FHR_BRADY_PERSISTENT) | (fhr == FHR_TACHYCARDIA)).astype(np.int64)
        persist = (fhr == FHR_BRADY_PERSISTENT).astype(np.int64)
        return CoarseKernel(
            cfg=None, cells=cells, index=index,
            survivor_matrix=survivor, born_prob=born,
            hazard_logit0=hz_logit, hazard_per_hour=0.0,
            surgical_prob=self.surgical.prob()[sbp],
            abnormal=abnormal, persist=persist, high_sbp=(sbp == BP_HIGH).astype(np.int64),
            stalled_ref=dilat.astype(float),
            initial_probs=np.full(n, 1.0 / n),
        )

    def propensity_probs(self, hour: int, kernel: CoarseKernel) -> np.ndarray:
        """Fitted usual-care action probabilities per kernel cell."""
        stalled = (kernel.stalled_ref < 1.0 + 0.5 * hour).astype(np.int64)
        key = _propensity_key(kernel.abnormal, stalled)
        hourly = self.propensity_hourly.get(hour)
        pooled = self.propensity.prob()[key]
        if hourly is None:
            return pooled
        seen = hourly.n_obs()[key] > 0
        return np.where(seen, hourly.prob()[key], pooled)

    def to_json_dict(self) -> dict:
        return {
            "hazard": self.hazard.to_json_dict(),
            "fhr_next": self.fhr_next.to_json_dict(),
            "dilat_next": self.dilat_next.to_json_dict(),
            "sbp_next": self.sbp_next.to_json_dict(),
            "dbp_next": self.dbp_next.to_json_dict(),
            "surgical": self.surgical.to_json_dict(),
            "propensity": self.propensity.to_json_dict(),
            "propensity_hourly": {str(h): t.to_json_dict() for h, t in self.propensity_hourly.items()},
            "n_rows": self.n_rows,
            "hours_seen": list(self.hours_seen),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "TransitionModels":
        return cls(
            hazard=FrequencyTable.from_json_dict(data["hazard"]),
            fhr_next=FrequencyTable.from_json_dict(data["fhr_next"]),
            dilat_next=FrequencyTable.from_json_dict(data["dilat_next"]),
            sbp_next=FrequencyTable.from_json_dict(data["sbp_next"]),
            dbp_next=FrequencyTable.from_json_dict(data["dbp_next"]),
            surgical=FrequencyTable.from_json_dict(data["surgical"]),
            propensity=FrequencyTable.from_json_dict(data["propensity"]),
            propensity_hourly={int(h): FrequencyTable.from_json_dict(t)
                               for h, t in data.get("propensity_hourly", {}).items()},
            n_rows=int(data.get("n_rows", 0)),
            hours_seen=tuple(data.get("hours_seen", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def fit_gcomp(ds: Dataset) -> TransitionModels:
    """Fit all transition components from coarse person-hour records.

    Vitals tables use transitions whose successor is informative for that
    vital (outcome-absorbed rows carry frozen vitals and are excluded;
    the dilatation table keeps vaginal births, where 10 marks delivery).
    """
    _check_coarse(ds, "fit_gcomp")
    k = ds.cols["k"]
    z = ds.cols["z"]
    actions = ds.action_rows()
    pid = ds.cols["person_id"]

    at_risk = z == 1
    has_next = actions >= 0
    src = np.flatnonzero(at_risk & has_next)
    if src.size == 0:
        raise DataFormatError("dataset contains no transitions to fit on")
    nxt = src + 1
    if not np.all(pid[nxt] == pid[src]):
        raise DataFormatError("internal row alignment failure")

    max_hour = int(k[src].max())
    for hour in range(max_hour + 1):
        if not np.any(k[src] == hour):
            raise DataFormatError(f"no at-risk transitions recorded at hour {hour}")

    fhr = ds.cols["fhr"]
    dilat = ds.cols["dilatation"]
    sbp = ds.cols["sbp"]
    dbp = ds.cols["dbp"]
    y = ds.cols["y"]
    born = ds.cols["born"]

    act0 = src[actions[src] == 0]
    act1 = src[actions[src] == 1]

    # Outcome hazard on its generative parents (FHR category, SBP level).
    hazard = FrequencyTable.fit("hazard", _hazard_key(fhr[act0], sbp[act0]),
                                ((y[act0 + 1] == 1) & (~born[act0 + 1])).astype(np.int64),
                                N_FHR_CATEGORIES * 2, 2)
    # Vitals among survivor transitions (next row still at risk).
    surv = act0[z[act0 + 1] == 1]
    fhr_next = FrequencyTable.fit("fhr_next", fhr[surv], fhr[surv + 1], N_FHR_CATEGORIES, N_FHR_CATEGORIES)
    sbp_next = FrequencyTable.fit("sbp_next", sbp[surv], sbp[surv + 1], 2, 2)
    dbp_next = FrequencyTable.fit("dbp_next", dbp[surv], dbp[surv + 1], 2, 2)
    # Dilatation: survivor transitions plus vaginal births (dilat 10).
    prog = act0[(z[act0 + 1] == 1) | ((born[act0 + 1]) & (y[act0 + 1] == 0))]
    dilat_next = FrequencyTable.fit("dilat_next", dilat[prog], dilat[prog + 1],
                                    N_DILAT_AT_RISK, MAX_DILATATION + 1)
    if act1.size:
        surgical = FrequencyTable.fit("surgical", sbp[act1], y[act1 + 1], 2, 2)
    else:
        surgical = FrequencyTable("surgical", 2, 2, np.zeros((2, 2)))

    abnormal = ((fhr[src] == FHR_BRADY_PERSISTENT) | (fhr[src] == FHR_TACHYCARDIA)).astype(np.int64)
    stalled = (dilat[src] < 1.0 + 0.5 * k[src]).astype(np.int64)
    pkey = _propensity_key(abnormal, stalled)
    propensity = FrequencyTable.fit("propensity", pkey, actions[src], 4, 2)
    hourly: dict[int, FrequencyTable] = {}
    for hour in range(max_hour + 1):
        m = k[src] == hour
        hourly[hour] = FrequencyTable.fit(f"propensity@{hour}", pkey[m], actions[src][m], 4, 2)

    return TransitionModels(
        hazard=hazard, fhr_next=fhr_next, dilat_next=dilat_next,
        sbp_next=sbp_next, dbp_next=dbp_next, surgical=surgical,
        propensity=propensity, propensity_hourly=hourly,
        n_rows=len(ds), hours_seen=tuple(range(max_hour + 1)),
    )


def gcomp_predict(models: TransitionModels, condition: PatientState, spec: EstimandSpec,
                  n_mc: int = 100_000, rng: np.random.Generator | None = None) -> RiskEstimate:
    """Monte Carlo forward simulation under the intervention option using
    the fitted transition models in place of the true process."""
    if condition.z != 1:
        raise ConfigError("condition state is not at risk")
    if condition.k != spec.moment_of_use:
        raise ConfigError(f"condition hour {condition.k} != spec moment {spec.moment_of_use}")
    if rng is None:
        rng = substream(0, "gcomp", spec.moment_of_use, spec.horizon_hour)
    kernel = models.as_kernel()
    idx = state_grid_index(condition)
    result = simulate_batch(kernel, np.full(n_mc, idx, dtype=np.int64),
                            spec.moment_of_use, spec.horizon_hour, spec.regime, rng,
                            models.propensity_probs)
    p = float(result["outcome"].mean())
    se = float(np.sqrt(p * (1.0 - p) / n_mc))
    return RiskEstimate(p=p, se=se, n=n_mc, method=METHOD_GCOMP)


# --- iterated conditional expectations --------------------------------------

@dataclass
class IceEstimator:
    """Backward sequential-regression estimator for a static regime:
    predicts the estimand at any conditioned state at the anchor hour."""

    spec: EstimandSpec
    values: np.ndarray       # (N_GRID,) fitted value at the anchor hour
    n_anchor: np.ndarray     # (N_GRID,) anchor-stage sample sizes

    def predict_cell(self, cell_idx: int) -> RiskEstimate:
        p = float(np.clip(self.values[cell_idx], 0.0, 1.0))
        n = int(self.n_anchor[cell_idx])
        se = float(np.sqrt(p * (1.0 - p) / n)) if n > 0 else float("nan")
        if not np.isfinite(se):
            se = float(np.sqrt(0.25 / max(1, self.n_anchor.sum())))
        return RiskEstimate(p=p, se=se, n=n, method=METHOD_ICE)

    def predict(self, state: PatientState) -> RiskEstimate:
        return self.predict_cell(state_grid_index(state))


def _static_actions(spec: EstimandSpec) -> list[int]:
    """Per-stage pinned actions for an effectively static regime, or raise."""
    k0, h = spec.moment_of_use, spec.horizon_hour
    try:
        acts = [pinned_action(spec.regime, t - k0) for t in range(k0, h)]
    except ConfigError as exc:
        raise ConfigError(f"ICE supports static regimes only: {exc}") from exc
    if any(a is None for a in acts):
        raise ConfigError(
            "ICE supports static regimes only: the regime has a natural-course "
            "segment before the horizon")
    return acts


def ice_estimate(ds: Dataset, spec: EstimandSpec) -> IceEstimator:
    """Iterated-conditional-expectation fit for a static regime.

    Stage regressions run backward from the horizon; each stage averages
    the next-stage value over regime-consistent at-risk records, saturated
    on the state cell. An hour whose regime-consistent risk set is empty
    while later values are still needed raises PositivityError.
    """
    _check_coarse(ds, "ice_estimate")
    k0, h = spec.moment_of_use, spec.horizon_hour
    actions_required = _static_actions(spec)

    k = ds.cols["k"]
    z = ds.cols["z"]
    actions = ds.action_rows()
    keys = grid_index(ds.cols["fhr"], ds.cols["dilatation"], ds.cols["sbp"], ds.cols["dbp"])
    y = ds.cols["y"]
    pid = ds.cols["person_id"]

    # consistent[i]: row i is at risk at its hour t >= k0 and the person's
    # actions at k0..t-1 all matched the regime.
    consistent = np.zeros(len(ds), dtype=bool)
    follower = np.zeros(int(pid.max()) + 1, dtype=bool)
    max_hour = int(k.max())
    for t in range(k0, min(h, max_hour + 1)):
        rows_t = np.flatnonzero((k == t) & (z == 1))
        if rows_t.size == 0:
            continue
        p = pid[rows_t]
        if t == k0:
            follower[p] = True
        ok = follower[p]
        consistent[rows_t] = ok
        if t - k0 < len(actions_required):
            req = actions_required[t - k0]
            viol = ok & (actions[rows_t] >= 0) & (actions[rows_t] != req)
            follower[p[viol]] = False

    q_values: dict[int, np.ndarray | None] = {}
    q_counts: dict[int, np.ndarray] = {}
    for t in range(h - 1, k0 - 1, -1):
        rows = np.flatnonzero(consistent & (k == t) & (actions == actions_required[t - k0]))
        if rows.size == 0:
            q_values[t] = None
            q_counts[t] = np.zeros(N_GRID)
            continue
        nxt = rows + 1
        targets = np.empty(rows.size)
        absorbed = z[nxt] == 0
        targets[absorbed] = y[nxt[absorbed]]
        open_rows = ~absorbed
        if open_rows.any():
            if t + 1 >= h:
                # Next state is at risk at the horizon: no outcome by h.
                targets[open_rows] = 0.0
            else:
                nxt_q = q_values.get(t + 1)
                if nxt_q is None:
                    raise PositivityError(
                        f"hour {t + 1}: no regime-consistent at-risk records, "
                        "but stage values there are needed; see the positivity report")
                targets[open_rows] = nxt_q[keys[nxt[open_rows]]]
        sums = np.zeros(N_GRID)
        counts = np.zeros(N_GRID)
        np.add.at(sums, keys[rows], targets)
        np.add.at(counts, keys[rows], 1.0)
        pooled = targets.mean()
        vals = np.where(counts > 0, sums / np.maximum(counts, 1.0), pooled)
        q_values[t] = vals
        q_counts[t] = counts

    anchor_vals = q_values.get(k0)
    if anchor_vals is None:
        raise PositivityError(
            f"hour {k0}: no regime-consistent at-risk records at the anchor")
    return IceEstimator(spec=spec, values=anchor_vals, n_anchor=q_counts[k0])
