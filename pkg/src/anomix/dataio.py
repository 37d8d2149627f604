"""Ingestion of labeled series, detector score files and anomaly windows.

The expected corpus layout is the public NAB one:

    <root>/data/<group>/<series>.csv                series: timestamp,value
    <root>/results/<detector>/<group>/<detector>_<series>.csv
                                                    scores: ...,anomaly_score,...
    <root>/labels/combined_windows.json             {"<group>/<series>.csv":
                                                     [["start","end"], ...]}

Series timestamps must be "YYYY-MM-DD HH:MM:SS" and strictly increasing.
Window files may carry fractional seconds (the public corpus does), so their
timestamps parse permissively. Membership in a window is inclusive at both
ends. Detector scores must lie in [0, 1]; alignment to the series timestamps
is strict by default, or forward-filled from the most recent earlier reading
with fill="ffill". All load errors name the file and line they came from.
"""

from __future__ import annotations

import bisect
import csv
import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

TIMESTAMP_FMT = "%Y-%m-%d %H:%M:%S"


class DataError(ValueError):
    """A data file failed validation; the message carries file context."""


@dataclass(frozen=True)
class LabeledSeries:
    """One series with binary anomaly outcomes attached."""

    name: str
    timestamps: tuple[datetime, ...]
    values: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.timestamps)
        if n == 0:
            raise ValueError("a labeled series cannot be empty")
        if self.values.shape != (n,) or self.outcomes.shape != (n,):
            raise ValueError("values and outcomes must match the timestamps")
        if not np.isin(self.outcomes, (0, 1)).all():
            raise ValueError("outcomes must be 0 or 1")

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class ExpertPanel:
    """Aligned detector scores for one series: one column per detector."""

    detector_names: tuple[str, ...]
    scores: np.ndarray  # (slots, detectors), each in [0, 1]

    def __post_init__(self) -> None:
        if len(self.detector_names) == 0:
            raise ValueError("a panel needs at least one detector")
        if self.scores.ndim != 2 or self.scores.shape[1] != len(self.detector_names):
            raise ValueError("scores must have one column per detector")


def parse_timestamp(text: str, permissive: bool = False) -> datetime:
    """Parse a corpus timestamp; permissive additionally accepts fractional seconds."""
    try:
        return datetime.strptime(text, TIMESTAMP_FMT)
    except ValueError:
        if permissive:
            try:
                return datetime.strptime(text, "%Y-%m-%d %H:%M:%S.%f")
            except ValueError:
                pass
        raise ValueError(f"bad timestamp {text!r}; expected YYYY-MM-DD HH:MM:SS") from None


def _open_csv(path: Path, required: tuple[str, ...]):
    try:
        handle = open(path, newline="")
    except OSError as err:
        raise DataError(f"{path}: cannot open ({err})") from None
    reader = csv.DictReader(handle)
    fields = reader.fieldnames or ()
    missing = [c for c in required if c not in fields]
    if missing:
        handle.close()
        raise DataError(f"{path}:1: missing required columns {missing}, found {list(fields)}")
    return handle, reader


def load_series(path) -> tuple[str, list[datetime], np.ndarray]:
    """Load a timestamp,value series file.

    Returns (name, timestamps, values) with the file's base name as the
    series name. Timestamps must parse and be strictly increasing; violations
    report the offending line.
    """
    path = Path(path)
    handle, reader = _open_csv(path, ("timestamp", "value"))
    timestamps: list[datetime] = []
    values: list[float] = []
    with handle:
        for row in reader:
            line = reader.line_num
            try:
                ts = parse_timestamp(row["timestamp"])
            except ValueError as err:
                raise DataError(f"{path}:{line}: {err}") from None
            if timestamps and ts <= timestamps[-1]:
                raise DataError(
                    f"{path}:{line}: timestamps must be strictly increasing "
                    f"({ts} after {timestamps[-1]})"
                )
            try:
                value = float(row["value"])
            except (TypeError, ValueError):
                raise DataError(f"{path}:{line}: bad value {row['value']!r}") from None
            timestamps.append(ts)
            values.append(value)
    if not timestamps:
        raise DataError(f"{path}: empty series")
    return path.name, timestamps, np.asarray(values)


def _load_score_column(path: Path) -> tuple[list[datetime], np.ndarray]:
    """One detector file: sorted (timestamps, scores in [0, 1])."""
    handle, reader = _open_csv(path, ("timestamp", "anomaly_score"))
    stamps: list[datetime] = []
    scores: list[float] = []
    seen: set[datetime] = set()
    with handle:
        for row in reader:
            line = reader.line_num
            try:
                ts = parse_timestamp(row["timestamp"])
            except ValueError as err:
                raise DataError(f"{path}:{line}: {err}") from None
            if ts in seen:
                raise DataError(f"{path}:{line}: duplicate timestamp {ts}")
            seen.add(ts)
            try:
                score = float(row["anomaly_score"])
            except (TypeError, ValueError):
                raise DataError(
                    f"{path}:{line}: bad anomaly_score {row['anomaly_score']!r}"
                ) from None
            if not np.isfinite(score) or not 0.0 <= score <= 1.0:
                raise DataError(
                    f"{path}:{line}: anomaly_score {score!r} outside [0, 1]"
                )
            stamps.append(ts)
            scores.append(score)
    if not stamps:
        raise DataError(f"{path}: empty score file")
    order = np.argsort(np.asarray(stamps, dtype="datetime64[us]"), kind="stable")
    return [stamps[i] for i in order], np.asarray(scores)[order]


def load_expert_scores(
    paths, detector_names, timestamps, fill: str = "strict"
) -> ExpertPanel:
    """Align one score file per detector to the series timestamps.

    With fill="strict" every series timestamp must appear in every detector
    file. With fill="ffill" a missing timestamp takes the detector's most
    recent earlier reading; a gap before the first reading is still an error.
    """
    if fill not in ("strict", "ffill"):
        raise ValueError(f"fill must be 'strict' or 'ffill', got {fill!r}")
    paths = [Path(p) for p in paths]
    detector_names = tuple(detector_names)
    if len(paths) != len(detector_names) or not paths:
        raise ValueError("need one score file per detector name")
    columns = []
    for name, path in zip(detector_names, paths):
        stamps, scores = _load_score_column(path)
        aligned = np.empty(len(timestamps))
        for i, ts in enumerate(timestamps):
            at = bisect.bisect_right(stamps, ts) - 1
            if at >= 0 and stamps[at] == ts:
                aligned[i] = scores[at]
            elif fill == "ffill" and at >= 0:
                aligned[i] = scores[at]
            else:
                raise DataError(
                    f"{path}: detector {name!r} has no score at {ts}"
                    + ("" if fill == "strict" else " and nothing earlier to fill from")
                )
        columns.append(aligned)
    return ExpertPanel(detector_names, np.column_stack(columns))


def load_windows(path) -> dict[str, list[tuple[datetime, datetime]]]:
    """Load an anomaly-window file: series relpath -> [(start, end), ...]."""
    path = Path(path)
    try:
        with open(path) as handle:
            raw = json.load(handle)
    except OSError as err:
        raise DataError(f"{path}: cannot open ({err})") from None
    except json.JSONDecodeError as err:
        raise DataError(f"{path}: not valid JSON ({err})") from None
    if not isinstance(raw, dict):
        raise DataError(f"{path}: expected an object mapping series to window lists")
    out: dict[str, list[tuple[datetime, datetime]]] = {}
    for key, windows in raw.items():
        pairs = []
        for w in windows:
            if not isinstance(w, (list, tuple)) or len(w) != 2:
                raise DataError(f"{path}: window {w!r} of {key!r} is not a [start, end] pair")
            try:
                start = parse_timestamp(w[0], permissive=True)
                end = parse_timestamp(w[1], permissive=True)
            except ValueError as err:
                raise DataError(f"{path}: {key!r}: {err}") from None
            if end < start:
                raise DataError(f"{path}: {key!r}: window ends before it starts ({w!r})")
            pairs.append((start, end))
        out[key] = pairs
    return out


def windows_to_outcomes(windows, timestamps) -> np.ndarray:
    """Binary outcomes: 1 where a timestamp falls inside any window, ends inclusive."""
    out = np.zeros(len(timestamps), dtype=np.int8)
    for start, end in windows:
        if end < start:
            raise ValueError(f"window ends before it starts ({start} .. {end})")
        lo = bisect.bisect_left(timestamps, start)
        hi = bisect.bisect_right(timestamps, end)
        out[lo:hi] = 1
    return out


def outcomes_to_windows(timestamps, outcomes) -> list[tuple[datetime, datetime]]:
    """Maximal runs of positive outcomes as inclusive windows.

    Inverse of windows_to_outcomes for windows that start and end on series
    timestamps.
    """
    y = np.asarray(outcomes)
    if y.shape != (len(timestamps),):
        raise ValueError("outcomes must hold one value per timestamp")
    windows = []
    start = None
    for i, flag in enumerate(y):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            windows.append((timestamps[start], timestamps[i - 1]))
            start = None
    if start is not None:
        windows.append((timestamps[start], timestamps[len(y) - 1]))
    return windows


def discover_series(corpus_root) -> list[str]:
    """Sorted relative paths of every series file under <root>/data."""
    data_dir = Path(corpus_root) / "data"
    if not data_dir.is_dir():
        raise DataError(f"{corpus_root}: no data/ directory; not a corpus root")
    return sorted(
        p.relative_to(data_dir).as_posix() for p in data_dir.rglob("*.csv")
    )


def detector_score_path(corpus_root, detector: str, relpath: str) -> Path:
    """Where a detector's score file for a series lives in the corpus layout."""
    rel = Path(relpath)
    return (
        Path(corpus_root) / "results" / detector / rel.parent / f"{detector}_{rel.name}"
    )
