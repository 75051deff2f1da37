"""Ingestion of power time-series CSV files.

Expected format: header ``timestamp,power_kw``, ISO-8601 timestamps,
strictly increasing rows at a uniform sampling interval.  Slicing a daily
clock window (e.g. 10:00-17:00) yields contiguous runs; log-returns are
taken inside runs only, never across the overnight gap.
"""
import csv
from dataclasses import dataclass
from datetime import datetime, time, timezone

import numpy as np

from .errors import MalformedSeries

HEADER = ("timestamp", "power_kw")


@dataclass(frozen=True)
class PowerSeries:
    timestamps: np.ndarray  # datetime64[us]
    values: np.ndarray      # kW
    dt_hours: float

    def __len__(self):
        return len(self.values)


def _parse_timestamp(text: str, row: int) -> datetime:
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise MalformedSeries(f"row {row}: bad timestamp {text!r}") from exc
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(timezone.utc).replace(tzinfo=None)
    return stamp


def load_power_csv(path) -> PowerSeries:
    """Read and validate a power CSV; errors name the offending row.

    Row numbers in messages are 1-based file lines (header is line 1).
    """
    stamps = []
    values = []
    lines = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedSeries("no data rows: file is empty") from None
        if [h.strip().lower() for h in header] != list(HEADER):
            raise MalformedSeries(
                f"row 1: header must be 'timestamp,power_kw', got {','.join(header)!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise MalformedSeries(f"row {line_no}: expected 2 columns, got {len(row)}")
            stamps.append(_parse_timestamp(row[0].strip(), line_no))
            try:
                values.append(float(row[1]))
            except ValueError as exc:
                raise MalformedSeries(f"row {line_no}: bad power value {row[1]!r}") from exc
            lines.append(line_no)
    if not values:
        raise MalformedSeries("no data rows")
    if len(values) < 2:
        raise MalformedSeries("no data rows: need at least 2 samples")

    seconds = np.array(
        [(t - stamps[0]).total_seconds() for t in stamps], dtype=float
    )
    gaps = np.diff(seconds)
    if np.any(gaps <= 0):
        bad = lines[int(np.argmax(gaps <= 0)) + 1]  # later row of the pair
        raise MalformedSeries(f"row {bad}: timestamps not strictly increasing")
    step = gaps[0]
    uneven = np.abs(gaps - step) > 1e-3
    if np.any(uneven):
        idx = int(np.argmax(uneven))
        raise MalformedSeries(
            f"row {lines[idx + 1]}: non-uniform sampling interval "
            f"({gaps[idx]:.3f}s vs expected {step:.3f}s)"
        )
    return PowerSeries(
        timestamps=np.array(stamps, dtype="datetime64[us]"),
        values=np.asarray(values, dtype=float),
        dt_hours=step / 3600.0,
    )


def parse_clock(text: str) -> time:
    hh, mm = text.strip().split(":")
    return time(hour=int(hh), minute=int(mm))


def daily_window_runs(series: PowerSeries, start: time, end: time):
    """Split the series into contiguous runs whose clock time is in [start, end]."""
    clocks = series.timestamps.astype("datetime64[us]").astype(object)
    inside = np.array([start <= t.time() <= end for t in clocks])
    runs = []
    begin = None
    for i, flag in enumerate(inside):
        if flag and begin is None:
            begin = i
        elif not flag and begin is not None:
            runs.append(series.values[begin:i])
            begin = None
    if begin is not None:
        runs.append(series.values[begin:])
    return [run for run in runs if len(run) >= 2]


def window_log_returns(series: PowerSeries, window: "tuple[time, time] | None"):
    """Log-returns at the file's sampling interval, restricted to the window."""
    if window is None:
        runs = [series.values]
    else:
        runs = daily_window_runs(series, window[0], window[1])
    pieces = []
    for run in runs:
        if np.any(run <= 0):
            raise MalformedSeries("window contains non-positive power values")
        pieces.append(np.diff(np.log(run)))
    if not pieces:
        return np.array([])
    return np.concatenate(pieces)
