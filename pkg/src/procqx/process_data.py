"""Event-log model, CSV ingestion and case-level feature extraction."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

PASSED = "Passed"
FAILED = "Failed"
LABELS = (PASSED, FAILED)

FEATURE_NAMES = (
    "total_process_steps",
    "avg_duration_per_step_s",
    "avg_energy_per_step_kwh",
    "planned_setup_time_s",
    "planned_production_duration_s",
    "oee",
    "employee_productivity",
)

EVENT_COLUMNS = ("case_id", "activity", "start_time", "duration_s", "energy_kwh")
CASE_COLUMNS = (
    "case_id",
    "planned_setup_time_s",
    "planned_production_duration_s",
    "oee",
    "employee_productivity",
    "quality_label",
)


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class Event:
    case_id: str
    activity: str
    start_time: datetime
    duration_s: float
    energy_kwh: float

    def __post_init__(self):
        if not (math.isfinite(self.duration_s) and self.duration_s >= 0):
            raise DataError(f"duration_s must be a nonnegative finite number, got {self.duration_s}")
        if not (math.isfinite(self.energy_kwh) and self.energy_kwh >= 0):
            raise DataError(f"energy_kwh must be a nonnegative finite number, got {self.energy_kwh}")


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    planned_setup_time_s: float
    planned_production_duration_s: float
    oee: float
    employee_productivity: float
    quality_label: Optional[str] = None

    def __post_init__(self):
        for name in ("planned_setup_time_s", "planned_production_duration_s"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DataError(f"{name} must be nonnegative, got {value} (case {self.case_id})")
        for name in ("oee", "employee_productivity"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise DataError(f"{name} must lie in [0, 1], got {value} (case {self.case_id})")
        if self.quality_label not in (None, PASSED, FAILED):
            raise DataError(f"quality_label must be Passed, Failed or empty, got {self.quality_label!r}")


@dataclass
class EventLog:
    """Cases keyed by id, each with its record and time-ordered events."""

    cases: Dict[str, Tuple[CaseRecord, List[Event]]] = field(default_factory=dict)

    def __len__(self):
        return len(self.cases)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with optional Passed/Failed labels.

    ``X`` has one row per case and one column per entry of ``feature_names``.
    """

    X: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: Tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
        if X.shape[1] != len(self.feature_names):
            raise DataError(f"{X.shape[1]} columns but {len(self.feature_names)} feature names")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=str)
            if labels.shape != (X.shape[0],):
                raise DataError(f"{labels.shape[0]} labels for {X.shape[0]} rows")
            bad = set(labels.tolist()) - set(LABELS)
            if bad:
                raise DataError(f"unknown labels {sorted(bad)}")
            object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.X.shape[0]

    @property
    def y(self) -> np.ndarray:
        """Labels encoded Passed -> 1, Failed -> 0."""
        if self.labels is None:
            raise DataError("dataset is unlabeled")
        return (self.labels == PASSED).astype(float)

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=int)
        labels = None if self.labels is None else self.labels[idx]
        return LabeledDataset(self.X[idx], labels, self.feature_names)


@dataclass(frozen=True)
class StandardizationParams:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationParams":
        mean = np.asarray(d["mean"], dtype=float)
        std = np.asarray(d["std"], dtype=float)
        if mean.shape != std.shape or mean.ndim != 1:
            raise DataError("standardizer mean/std shapes differ")
        if not np.all(std > 0):
            raise DataError("standardizer std must be positive")
        return cls(mean, std)


# ---------------------------------------------------------------------------
# ingestion


def _parse_time(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _parse_float(text: str, column: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{column} is not finite")
    return value


def _reader(source: TextIO, columns: Sequence[str], what: str) -> csv.DictReader:
    reader = csv.DictReader(source)
    if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != tuple(columns):
        raise DataError(f"{what}: expected header {','.join(columns)}, got {reader.fieldnames}")
    return reader


def load_event_log(events_source: TextIO, cases_source: TextIO) -> EventLog:
    """Read the events and cases CSV streams into a validated :class:`EventLog`."""
    records: Dict[str, CaseRecord] = {}
    reader = _reader(cases_source, CASE_COLUMNS, "cases CSV")
    for row in reader:
        line = reader.line_num
        try:
            label = (row["quality_label"] or "").strip() or None
            rec = CaseRecord(
                case_id=row["case_id"].strip(),
                planned_setup_time_s=_parse_float(row["planned_setup_time_s"], "planned_setup_time_s"),
                planned_production_duration_s=_parse_float(
                    row["planned_production_duration_s"], "planned_production_duration_s"
                ),
                oee=_parse_float(row["oee"], "oee"),
                employee_productivity=_parse_float(row["employee_productivity"], "employee_productivity"),
                quality_label=label,
            )
        except (AttributeError, TypeError, ValueError) as exc:
            raise DataError(f"cases CSV line {line}: {exc}") from None
        if rec.case_id in records:
            raise DataError(f"cases CSV line {line}: duplicate case_id {rec.case_id!r}")
        records[rec.case_id] = rec

    events: Dict[str, List[Event]] = {cid: [] for cid in records}
    reader = _reader(events_source, EVENT_COLUMNS, "events CSV")
    for row in reader:
        line = reader.line_num
        try:
            ev = Event(
                case_id=row["case_id"].strip(),
                activity=row["activity"].strip(),
                start_time=_parse_time(row["start_time"]),
                duration_s=_parse_float(row["duration_s"], "duration_s"),
                energy_kwh=_parse_float(row["energy_kwh"], "energy_kwh"),
            )
        except (AttributeError, TypeError, ValueError) as exc:
            raise DataError(f"events CSV line {line}: {exc}") from None
        if ev.case_id not in records:
            raise DataError(f"events CSV line {line}: unknown case_id {ev.case_id!r}")
        events[ev.case_id].append(ev)

    log = EventLog()
    for cid, rec in records.items():
        if not events[cid]:
            raise DataError(f"case {cid!r} has no events")
        # stable sort keeps file order for simultaneous events
        log.cases[cid] = (rec, sorted(events[cid], key=lambda e: e.start_time))
    return log


def load_event_log_files(events_path, cases_path) -> EventLog:
    with open(events_path, newline="", encoding="utf-8") as ev, open(cases_path, newline="", encoding="utf-8") as cs:
        return load_event_log(ev, cs)


def write_event_log(log: EventLog, events_sink: TextIO, cases_sink: TextIO) -> None:
    ew = csv.writer(events_sink, lineterminator="\n")
    cw = csv.writer(cases_sink, lineterminator="\n")
    ew.writerow(EVENT_COLUMNS)
    cw.writerow(CASE_COLUMNS)
    for cid, (rec, events) in log.cases.items():
        cw.writerow([
            cid,
            repr(rec.planned_setup_time_s),
            repr(rec.planned_production_duration_s),
            repr(rec.oee),
            repr(rec.employee_productivity),
            rec.quality_label or "",
        ])
        for ev in events:
            ew.writerow([
                cid,
                ev.activity,
                ev.start_time.strftime("%Y-%m-%dT%H:%M:%SZ"),
                repr(ev.duration_s),
                repr(ev.energy_kwh),
            ])


# ---------------------------------------------------------------------------
# features


def case_features(record: CaseRecord, events: Sequence[Event]) -> Tuple[float, ...]:
    n = len(events)
    return (
        float(n),
        math.fsum(e.duration_s for e in events) / n,
        math.fsum(e.energy_kwh for e in events) / n,
        record.planned_setup_time_s,
        record.planned_production_duration_s,
        record.oee,
        record.employee_productivity,
    )


def extract_features(log: EventLog) -> LabeledDataset:
    """One feature row per case, in the log's case order.

    Labels are attached only when every case carries one; a log mixing
    labeled and unlabeled cases is rejected.
    """
    if not log.cases:
        raise DataError("event log is empty")
    rows = []
    labels = []
    for rec, events in log.cases.values():
        rows.append(case_features(rec, events))
        labels.append(rec.quality_label)
    n_labeled = sum(lab is not None for lab in labels)
    if 0 < n_labeled < len(labels):
        raise DataError(f"{n_labeled} of {len(labels)} cases are labeled; refusing a partially labeled log")
    return LabeledDataset(np.array(rows, dtype=float), np.array(labels) if n_labeled else None)


# ---------------------------------------------------------------------------
# dataset CSV


def write_dataset(data: LabeledDataset, sink: TextIO) -> None:
    w = csv.writer(sink, lineterminator="\n")
    header = list(data.feature_names) + (["label"] if data.is_labeled else [])
    w.writerow(header)
    for i, row in enumerate(data.X):
        out = [repr(float(v)) for v in row]
        if data.is_labeled:
            out.append(str(data.labels[i]))
        w.writerow(out)


def read_dataset(source: TextIO) -> LabeledDataset:
    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("dataset CSV is empty") from None
    labeled = bool(header) and header[-1] == "label"
    names = header[:-1] if labeled else header
    if tuple(names) != FEATURE_NAMES:
        raise DataError(f"dataset CSV: expected feature columns {','.join(FEATURE_NAMES)}, got {','.join(names)}")
    rows, labels = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"dataset CSV line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            rows.append([_parse_float(v, names[j]) for j, v in enumerate(row[: len(names)])])
        except ValueError as exc:
            raise DataError(f"dataset CSV line {lineno}: {exc}") from None
        if labeled:
            lab = row[-1].strip()
            if lab not in LABELS:
                raise DataError(f"dataset CSV line {lineno}: label must be Passed or Failed, got {lab!r}")
            labels.append(lab)
    if not rows:
        raise DataError("dataset CSV has no rows")
    return LabeledDataset(np.array(rows, dtype=float), np.array(labels) if labeled else None)


def read_dataset_file(path) -> LabeledDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return read_dataset(fh)


def write_dataset_file(data: LabeledDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_dataset(data, fh)


# ---------------------------------------------------------------------------
# splitting and standardization


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def stratified_split(
    data: LabeledDataset, ratios: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0
) -> Tuple[LabeledDataset, ...]:
    """Split into ``len(ratios)`` disjoint parts preserving class proportions.

    Split sizes and per-class counts come from rounding cumulative targets,
    so every class lands within one row of its global share in every split.
    Rows keep their original relative order inside each split.
    """
    ratios = [float(r) for r in ratios]
    if any(not (r > 0) for r in ratios):
        raise DataError(f"split ratios must be positive, got {ratios}")
    if abs(math.fsum(ratios) - 1.0) > 1e-9:
        raise DataError(f"split ratios must sum to 1, got {ratios} (sum {math.fsum(ratios)})")
    if not data.is_labeled:
        raise DataError("stratified_split needs a labeled dataset")

    n = len(data)
    fr = [Fraction(r) for r in ratios]
    total = sum(fr)
    cum = [_round_half_up(n * sum(fr[: s + 1]) / total) for s in range(len(fr))]
    cum[-1] = n

    rng = np.random.default_rng(seed)
    parts: List[List[int]] = [[] for _ in ratios]
    for label in LABELS:
        idx = np.flatnonzero(data.labels == label)
        if idx.size == 0:
            continue
        if idx.size < len(ratios):
            raise DataError(f"class {label} has {idx.size} rows, fewer than {len(ratios)} splits")
        idx = rng.permutation(idx)
        prev = 0
        for s, c in enumerate(cum):
            upto = _round_half_up(Fraction(c * idx.size, n))
            parts[s].extend(idx[prev:upto].tolist())
            prev = upto
    return tuple(data.subset(sorted(p)) for p in parts)


def fit_standardizer(train: LabeledDataset) -> StandardizationParams:
    """Population z-score parameters; constant columns get std 1."""
    if len(train) == 0:
        raise DataError("cannot fit a standardizer on an empty dataset")
    mean = train.X.mean(axis=0)
    std = train.X.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return StandardizationParams(mean, std)


def standardize(params: StandardizationParams, X: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=float) - params.mean) / params.std


def destandardize(params: StandardizationParams, Z: np.ndarray) -> np.ndarray:
    return np.asarray(Z, dtype=float) * params.std + params.mean


def apply_standardizer(params: StandardizationParams, data: LabeledDataset) -> LabeledDataset:
    return LabeledDataset(standardize(params, data.X), data.labels, data.feature_names)


def invert_standardizer(params: StandardizationParams, data: LabeledDataset) -> LabeledDataset:
    return LabeledDataset(destandardize(params, data.X), data.labels, data.feature_names)
