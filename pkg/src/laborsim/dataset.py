"""Person-hour datasets: columnar in memory, JSONL on disk.

One JSON object per line, one person-hour per line, with the fixed column
set below. Coarse-mode vitals serialize as category strings, continuous
vitals as decimals rounded to four places at dataset-build time, so a
write/read round trip reproduces the in-memory dataset exactly. Ingestion
re-validates every per-person invariant and reports the offending line.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError
from .states import (
    BP_CATEGORIES,
    FHR_CATEGORIES,
    MAX_DILATATION,
    MODE_COARSE,
    MODE_CONTINUOUS,
    Trajectory,
)

COLUMNS = (
    "person_id", "k", "maternal_age", "parity", "history_preterm",
    "fhr", "brady_persist", "dilatation", "sbp", "dbp", "a", "z", "y", "born",
)

ROUND_DECIMALS = 4  # fixed serialization precision for continuous values

_FHR_CODE = {name: i for i, name in enumerate(FHR_CATEGORIES)}
_BP_CODE = {name: i for i, name in enumerate(BP_CATEGORIES)}

_INT_COLUMNS = ("person_id", "k", "parity", "a", "z", "y")
_BOOL_COLUMNS = ("history_preterm", "brady_persist", "born")


@dataclass
class Dataset:
    """Columnar person-hour records, sorted by (person_id, k)."""

    mode: str
    cols: dict[str, np.ndarray]
    n_persons: int = field(default=0)

    def __post_init__(self):
        if self.mode not in (MODE_COARSE, MODE_CONTINUOUS):
            raise DataFormatError(f"unknown dataset mode {self.mode!r}")
        missing = set(COLUMNS) - set(self.cols)
        if missing:
            raise DataFormatError(f"dataset missing columns {sorted(missing)}")
        lengths = {len(v) for v in self.cols.values()}
        if len(lengths) > 1:
            raise DataFormatError("dataset columns have unequal lengths")
        if self.n_persons == 0 and len(self) > 0:
            self.n_persons = int(np.unique(self.cols["person_id"]).size)

    def __len__(self) -> int:
        return len(self.cols["person_id"])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset) or self.mode != other.mode or len(self) != len(other):
            return False
        return all(np.array_equal(self.cols[c], other.cols[c]) for c in COLUMNS)

    def person_slices(self) -> list[slice]:
        """Contiguous row ranges per person, in person order."""
        pid = self.cols["person_id"]
        if len(pid) == 0:
            return []
        starts = np.flatnonzero(np.r_[True, pid[1:] != pid[:-1]])
        bounds = np.r_[starts, len(pid)]
        return [slice(bounds[i], bounds[i + 1]) for i in range(len(starts))]

    def validate(self) -> None:
        """Per-person invariants: gap-free hours, monotone intervention
        status and dilatation, absorbing outcome/birth, at-risk consistency,
        unique (person_id, k)."""
        for sl in self.person_slices():
            pid = int(self.cols["person_id"][sl.start])
            k = self.cols["k"][sl]
            if k[0] != 0:
                raise DataFormatError(f"person {pid}: first hour is {k[0]}, expected 0")
            if np.any(np.diff(k) != 1):
                bad = int(k[np.flatnonzero(np.diff(k) != 1)[0] + 1])
                raise DataFormatError(f"person {pid}: hour gap before hour {bad}")
            for name, label in (("a", "intervention status"), ("y", "outcome indicator"),
                                ("dilatation", "dilatation")):
                v = self.cols[name][sl]
                if np.any(np.diff(v.astype(float)) < 0):
                    bad = int(k[np.flatnonzero(np.diff(v.astype(float)) < 0)[0] + 1])
                    raise DataFormatError(f"person {pid} hour {bad}: {label} decreased")
            born = self.cols["born"][sl].astype(int)
            if np.any(np.diff(born) < 0):
                raise DataFormatError(f"person {pid}: born flag reset")
            z = self.cols["z"][sl]
            y = self.cols["y"][sl]
            expect_z = ((born == 0) & (y == 0)).astype(int)
            if np.any(z != expect_z):
                bad = int(k[np.flatnonzero(z != expect_z)[0]])
                raise DataFormatError(f"person {pid} hour {bad}: z inconsistent with born/y")
            if np.any(z[:-1] == 0):
                bad = int(k[np.flatnonzero(z[:-1] == 0)[0] + 1])
                raise DataFormatError(f"person {pid} hour {bad}: record after absorption")

    def at_risk_index(self, k: int) -> np.ndarray:
        """Row indices of at-risk records at hour k."""
        return np.flatnonzero((self.cols["k"] == k) & (self.cols["z"] == 1))

    def action_rows(self) -> np.ndarray:
        """For each row, the action taken at that hour (a of the next
        hour's row for the same person), or -1 when no transition follows."""
        pid = self.cols["person_id"]
        k = self.cols["k"]
        a = self.cols["a"]
        actions = np.full(len(self), -1, dtype=np.int64)
        adjacent = (pid[1:] == pid[:-1]) & (k[1:] == k[:-1] + 1)
        actions[:-1][adjacent] = a[1:][adjacent]
        return actions

    def outcome_by(self, horizon: int) -> np.ndarray:
        """Per person: cumulative outcome status at ``horizon``."""
        out = np.zeros(self.n_persons, dtype=np.int64)
        for i, sl in enumerate(self.person_slices()):
            k = self.cols["k"][sl]
            y = self.cols["y"][sl]
            within = k <= horizon
            if within.any():
                out[i] = int(y[within][-1])
        return out


def trajectories_to_dataset(trajectories: list[Trajectory], mode: str) -> Dataset:
    """Flatten trajectories to person-hour rows (person_id = list index)."""
    rows: dict[str, list] = {c: [] for c in COLUMNS}
    for pid, traj in enumerate(trajectories):
        for s in traj.states:
            rows["person_id"].append(pid)
            rows["k"].append(s.k)
            rows["maternal_age"].append(round(float(s.baseline.maternal_age), ROUND_DECIMALS))
            rows["parity"].append(s.baseline.parity)
            rows["history_preterm"].append(bool(s.baseline.history_preterm))
            rows["fhr"].append(_round(s.tv.fhr, mode) if mode == MODE_CONTINUOUS else int(s.tv.fhr))
            rows["brady_persist"].append(bool(s.tv.brady_persist))
            rows["dilatation"].append(_round(s.tv.dilatation, mode) if mode == MODE_CONTINUOUS else int(s.tv.dilatation))
            rows["sbp"].append(_round(s.tv.sbp, mode) if mode == MODE_CONTINUOUS else int(s.tv.sbp))
            rows["dbp"].append(_round(s.tv.dbp, mode) if mode == MODE_CONTINUOUS else int(s.tv.dbp))
            rows["a"].append(s.a)
            rows["z"].append(s.z)
            rows["y"].append(s.y)
            rows["born"].append(bool(s.born))
    return _columns_to_dataset(rows, mode, len(trajectories))


def _round(value: float, mode: str) -> float:
    return round(float(value), ROUND_DECIMALS) if mode == MODE_CONTINUOUS else float(value)


def _columns_to_dataset(rows: dict[str, list], mode: str, n_persons: int) -> Dataset:
    cols: dict[str, np.ndarray] = {}
    for name in COLUMNS:
        values = rows[name]
        if name in _INT_COLUMNS:
            cols[name] = np.asarray(values, dtype=np.int64)
        elif name in _BOOL_COLUMNS:
            cols[name] = np.asarray(values, dtype=bool)
        elif name != "maternal_age" and mode == MODE_COARSE:
            cols[name] = np.asarray(values, dtype=np.int64)
        else:
            cols[name] = np.asarray(values, dtype=float)
    return Dataset(mode=mode, cols=cols, n_persons=n_persons)


def write_dataset(ds: Dataset, path: str) -> None:
    """Write JSONL, one person-hour per line, columns in schema order."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(ds)):
            fh.write(json.dumps(_row_to_json(ds, i)) + "\n")


def _row_to_json(ds: Dataset, i: int) -> dict:
    row: dict = {}
    for name in COLUMNS:
        v = ds.cols[name][i]
        if name in _INT_COLUMNS:
            row[name] = int(v)
        elif name in _BOOL_COLUMNS:
            row[name] = bool(v)
        elif ds.mode == MODE_COARSE:
            if name == "fhr":
                row[name] = FHR_CATEGORIES[int(v)]
            elif name in ("sbp", "dbp"):
                row[name] = BP_CATEGORIES[int(v)]
            elif name == "dilatation":
                row[name] = int(v)
            else:  # maternal_age stays numeric in both modes
                row[name] = float(v)
        else:
            row[name] = float(v)
    return row


def read_dataset(path: str) -> Dataset:
    """Ingest a JSONL dataset, re-validating all invariants. Errors carry
    the 1-based line number and name the person and hour involved."""
    rows: dict[str, list] = {c: [] for c in COLUMNS}
    mode: str | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"invalid JSON ({exc})", row=lineno) from exc
            if not isinstance(obj, dict):
                raise DataFormatError("expected a JSON object", row=lineno)
            unknown = set(obj) - set(COLUMNS)
            if unknown:
                raise DataFormatError(f"unknown columns {sorted(unknown)}", row=lineno)
            missing = set(COLUMNS) - set(obj)
            if missing:
                raise DataFormatError(f"missing columns {sorted(missing)}", row=lineno)
            row_mode = MODE_COARSE if isinstance(obj["fhr"], str) else MODE_CONTINUOUS
            if mode is None:
                mode = row_mode
            elif row_mode != mode:
                raise DataFormatError(
                    "coarse and continuous vitals representations mixed in one file", row=lineno)
            _parse_row(obj, mode, rows, lineno)
    if mode is None:
        raise DataFormatError("dataset file contains no rows")
    ds = _columns_to_dataset(rows, mode, n_persons=0)
    _check_sorted(ds)
    try:
        ds.validate()
    except DataFormatError as exc:
        raise DataFormatError(f"ingestion failed: {exc}") from exc
    return ds


def _parse_row(obj: dict, mode: str, rows: dict[str, list], lineno: int) -> None:
    for name in COLUMNS:
        v = obj[name]
        try:
            if name in _INT_COLUMNS:
                if not isinstance(v, int) or isinstance(v, bool):
                    raise DataFormatError(f"column {name} must be an integer, got {v!r}", row=lineno)
                rows[name].append(v)
            elif name in _BOOL_COLUMNS:
                if not isinstance(v, bool):
                    raise DataFormatError(f"column {name} must be a boolean, got {v!r}", row=lineno)
                rows[name].append(v)
            elif mode == MODE_COARSE and name == "fhr":
                rows[name].append(_FHR_CODE[v])
            elif mode == MODE_COARSE and name in ("sbp", "dbp"):
                rows[name].append(_BP_CODE[v])
            elif mode == MODE_COARSE and name == "dilatation":
                if not isinstance(v, int) or not 0 <= v <= MAX_DILATATION:
                    raise DataFormatError(f"coarse dilatation must be 0..{MAX_DILATATION}, got {v!r}", row=lineno)
                rows[name].append(v)
            else:
                if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                    raise DataFormatError(f"column {name} must be a finite number, got {v!r}", row=lineno)
                rows[name].append(float(v))
        except KeyError as exc:
            raise DataFormatError(f"column {name}: unknown category {v!r}", row=lineno) from exc


def _check_sorted(ds: Dataset) -> None:
    pid = ds.cols["person_id"]
    k = ds.cols["k"]
    order_ok = np.all(np.diff(pid) >= 0)
    if not order_ok:
        bad = int(np.flatnonzero(np.diff(pid) < 0)[0]) + 2
        raise DataFormatError("rows not sorted by person_id", row=bad)
    same = pid[1:] == pid[:-1]
    dup = same & (k[1:] == k[:-1])
    if np.any(dup):
        i = int(np.flatnonzero(dup)[0])
        raise DataFormatError(
            f"duplicate record for person {int(pid[i + 1])} hour {int(k[i + 1])}", row=i + 2)
