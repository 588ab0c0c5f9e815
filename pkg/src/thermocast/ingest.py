"""Loading, cleaning and resampling of raw sensor streams.

The raw material is a per-minute (or otherwise regular) CSV export with one
timestamp column and one column per sensor. This module turns that into
gap-free 15-minute SensorFrames:

  load_csv -> RawSeries per channel (gaps marked NaN, ledger of causes)
  fill_gaps -> short gaps interpolated, long gaps split the series
  resample -> means over wall-clock-aligned blocks
  build_frames -> the above per channel, intersected into common frames
  split -> train / validation / test partitions by index ranges

Channels are named by single ids: d (indoor temperature, the target),
W (sun irradiance), H (relative humidity), Q (air quality as CO2 ppm) and
R (rain indicator). The hour-of-day channel h is derived from timestamps
downstream and never stored.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping

import numpy as np

from .exceptions import DataError

CHANNELS = ("d", "W", "H", "Q", "R")

#: points per day at the working cadence used for default partitions
DEFAULT_PERIOD = 900


@dataclass
class RawSeries:
    """One channel on a regular time grid; NaN entries mark gaps.

    resampled marks block means produced by resample(); it relaxes the rain
    domain from {0, 1} to the proportion range [0, 1].
    """

    channel: str
    start: int  # epoch seconds, UTC
    period: int  # seconds between consecutive samples
    values: np.ndarray
    resampled: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.channel not in CHANNELS:
            raise DataError(f"unknown channel {self.channel!r}, expected one of {CHANNELS}")
        if self.period <= 0:
            raise DataError(f"period must be positive, got {self.period}")
        if self.values.ndim != 1:
            raise DataError("values must be a 1-D array")
        self._check_ranges()

    def _check_ranges(self):
        v = self.values[~np.isnan(self.values)]
        if np.any(np.isinf(v)):
            raise DataError(f"channel {self.channel}: infinite values")
        if self.channel == "W" and np.any(v < 0):
            raise DataError("channel W: irradiance must be non-negative")
        if self.channel == "H" and (np.any(v < 0) or np.any(v > 100)):
            raise DataError("channel H: humidity must lie in [0, 100]")
        if self.channel == "R":
            if self.resampled:
                if np.any(v < 0) or np.any(v > 1):
                    raise DataError("channel R: rain proportion must lie in [0, 1]")
            elif not np.all(np.isin(v, (0.0, 1.0))):
                raise DataError("channel R: rain must be 0 or 1 before resampling")

    def __len__(self):
        return len(self.values)

    @property
    def end(self) -> int:
        """Exclusive end timestamp of the covered span."""
        return self.start + len(self.values) * self.period

    def timestamps(self) -> np.ndarray:
        return self.start + self.period * np.arange(len(self.values), dtype=np.int64)


@dataclass(frozen=True)
class GapRecord:
    """One ledger entry describing a gap and what was done about it."""

    channel: str
    start_index: int
    length: int
    cause: str  # "unparseable" | "missing-rows" | "gap" | "boundary"
    action: str  # "pending" | "interpolated" | "split" | "truncated"


def write_gap_ledger(records: Iterable[GapRecord], path) -> None:
    """Emit the gap ledger as a CSV report."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "start_index", "length", "cause", "action"])
        for r in records:
            writer.writerow([r.channel, r.start_index, r.length, r.cause, r.action])


def _parse_timestamp(text: str) -> int:
    """Epoch seconds from either a numeric string or ISO-8601 (UTC if naive)."""
    text = text.strip()
    try:
        seconds = float(text)
    except ValueError:
        try:
            stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
        except ValueError as exc:
            raise DataError(f"unparseable timestamp {text!r}") from exc
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=timezone.utc)
        seconds = stamp.timestamp()
    if seconds != int(seconds):
        raise DataError(f"timestamp {text!r} is not on a whole-second grid")
    return int(seconds)


def load_csv(
    path,
    schema: Mapping[str, str],
    timestamp_column: str = "timestamp",
    resampled: bool = False,
) -> tuple[dict[str, RawSeries], list[GapRecord]]:
    """Read a sensor CSV into one RawSeries per mapped channel.

    schema maps channel ids (subset of CHANNELS) to column names. Rows with
    unparseable numeric values become NaN gaps; rows missing entirely from
    the regular time grid become NaN gaps too. Both are recorded in the
    returned ledger with action "pending" (fill_gaps decides what happens).
    Non-monotonic timestamps are fatal.
    """
    unknown = [c for c in schema if c not in CHANNELS]
    if unknown:
        raise DataError(f"schema maps unknown channels {unknown}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [col for col in [timestamp_column, *schema.values()] if col not in header]
        if missing:
            raise DataError(f"csv {path} is missing columns {missing}")
        stamps: list[int] = []
        raw: dict[str, list[float]] = {ch: [] for ch in schema}
        for row in reader:
            stamps.append(_parse_timestamp(row[timestamp_column]))
            for ch, col in schema.items():
                text = (row[col] or "").strip()
                try:
                    raw[ch].append(float(text))
                except ValueError:
                    raw[ch].append(math.nan)
    if len(stamps) < 2:
        raise DataError(f"csv {path} holds fewer than two rows")
    stamps_arr = np.asarray(stamps, dtype=np.int64)
    diffs = np.diff(stamps_arr)
    if np.any(diffs <= 0):
        bad = int(np.argmax(diffs <= 0))
        raise DataError(f"timestamps are not strictly increasing at row {bad + 1}")
    period = int(np.gcd.reduce(diffs))
    positions = (stamps_arr - stamps_arr[0]) // period
    n = int(positions[-1]) + 1

    series: dict[str, RawSeries] = {}
    ledger: list[GapRecord] = []
    for ch in schema:
        values = np.full(n, np.nan)
        values[positions] = raw[ch]
        series[ch] = RawSeries(ch, int(stamps_arr[0]), period, values, resampled=resampled)
        for start, length, cause in _describe_gaps(values, positions, n):
            ledger.append(GapRecord(ch, start, length, cause, "pending"))
    return series, ledger


def _describe_gaps(values: np.ndarray, positions: np.ndarray, n: int):
    present = np.zeros(n, dtype=bool)
    present[positions] = True
    isnan = np.isnan(values)
    i = 0
    while i < n:
        if not isnan[i]:
            i += 1
            continue
        j = i
        while j < n and isnan[j]:
            j += 1
        cause = "unparseable" if present[i:j].any() else "missing-rows"
        yield i, j - i, cause
        i = j


def fill_gaps(series: RawSeries, max_gap: int = 5) -> tuple[list[RawSeries], list[GapRecord]]:
    """Resolve NaN gaps: interpolate short ones, split on long ones.

    Interior gaps of at most max_gap samples are filled by linear
    interpolation between their neighbours (rain is re-rounded to keep the
    0/1 domain). Longer interior gaps split the series into independent
    segments. Gaps touching either boundary are truncated away. Returns the
    gap-free segments in time order plus ledger entries for every action.
    """
    values = series.values
    n = len(values)
    isnan = np.isnan(values)
    ledger: list[GapRecord] = []
    if isnan.all():
        ledger.append(GapRecord(series.channel, 0, n, "boundary", "truncated"))
        return [], ledger

    filled = values.copy()
    cut_points: list[int] = []  # segment boundaries as index pairs
    runs = []
    i = 0
    while i < n:
        if not isnan[i]:
            i += 1
            continue
        j = i
        while j < n and isnan[j]:
            j += 1
        runs.append((i, j))
        i = j

    keep_from, keep_to = 0, n
    for lo, hi in runs:
        if lo == 0:
            keep_from = hi
            ledger.append(GapRecord(series.channel, lo, hi - lo, "boundary", "truncated"))
        elif hi == n:
            keep_to = lo
            ledger.append(GapRecord(series.channel, lo, hi - lo, "boundary", "truncated"))
        elif hi - lo <= max_gap:
            left, right = filled[lo - 1], filled[hi]
            steps = np.arange(1, hi - lo + 1, dtype=float) / (hi - lo + 1)
            interp = left + steps * (right - left)
            if series.channel == "R":
                interp = np.round(interp)
            filled[lo:hi] = interp
            ledger.append(GapRecord(series.channel, lo, hi - lo, "gap", "interpolated"))
        else:
            cut_points.append(lo)
            cut_points.append(hi)
            ledger.append(GapRecord(series.channel, lo, hi - lo, "gap", "split"))

    bounds = [keep_from, *[c for c in cut_points if keep_from < c < keep_to], keep_to]
    segments = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        chunk = filled[lo:hi]
        if len(chunk) == 0 or np.isnan(chunk).any():
            continue  # the inside of a long gap
        segments.append(
            RawSeries(series.channel, series.start + lo * series.period, series.period, chunk)
        )
    return segments, ledger


def resample(series: RawSeries, period: int = DEFAULT_PERIOD) -> RawSeries:
    """Mean over blocks of period seconds, aligned to the wall clock.

    Block boundaries sit at timestamps divisible by period (minutes 0, 15,
    30, 45 for the default), each output sample is stamped with its block
    start and averages the raw samples in [start, start + period). Partial
    blocks at either end are dropped. The rain indicator turns into the
    proportion of active raw samples per block. The input must be gap-free.
    """
    if period <= 0 or period % series.period != 0:
        raise DataError(
            f"resample period {period} must be a positive multiple of the raw period {series.period}"
        )
    if np.isnan(series.values).any():
        raise DataError("resample requires a gap-free series; run fill_gaps first")
    per = period // series.period
    first = -(-series.start // period) * period  # ceil to the next aligned boundary
    i0 = (first - series.start) // series.period
    blocks = (len(series.values) - i0) // per
    if blocks <= 0:
        return RawSeries(series.channel, first, period, np.empty(0), resampled=True)
    chunk = series.values[i0 : i0 + blocks * per]
    means = chunk.reshape(blocks, per).mean(axis=1)
    return RawSeries(series.channel, int(first), period, means, resampled=True)


@dataclass
class SensorFrame:
    """Aligned, gap-free resampled channels sharing one time grid."""

    start: int
    period: int
    channels: dict[str, np.ndarray]

    def __post_init__(self):
        lengths = {ch: len(v) for ch, v in self.channels.items()}
        if len(set(lengths.values())) > 1:
            raise DataError(f"channel lengths differ: {lengths}")
        for ch, v in self.channels.items():
            arr = np.asarray(v, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise DataError(f"channel {ch}: frame values must be finite")
            self.channels[ch] = arr

    def __len__(self):
        return len(next(iter(self.channels.values()))) if self.channels else 0

    def timestamps(self) -> np.ndarray:
        return self.start + self.period * np.arange(len(self), dtype=np.int64)

    def hours(self) -> np.ndarray:
        """Hour of day (UTC) for every position."""
        return (self.timestamps() // 3600) % 24

    def slice(self, lo: int, hi: int) -> "SensorFrame":
        if not (0 <= lo < hi <= len(self)):
            raise DataError(f"slice [{lo}, {hi}) outside frame of length {len(self)}")
        return SensorFrame(
            self.start + lo * self.period,
            self.period,
            {ch: v[lo:hi].copy() for ch, v in self.channels.items()},
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            names = list(self.channels)
            writer.writerow(["timestamp", *names])
            stamps = self.timestamps()
            for i in range(len(self)):
                iso = datetime.fromtimestamp(int(stamps[i]), tz=timezone.utc)
                writer.writerow(
                    [iso.strftime("%Y-%m-%dT%H:%M:%SZ"), *[repr(float(self.channels[ch][i])) for ch in names]]
                )

    @classmethod
    def from_csv(cls, path) -> "SensorFrame":
        series, ledger = load_csv(path, _sniff_schema(path), resampled=True)
        if any(np.isnan(s.values).any() for s in series.values()):
            raise DataError(f"frame csv {path} contains gaps")
        periods = {s.period for s in series.values()}
        starts = {s.start for s in series.values()}
        if len(periods) != 1 or len(starts) != 1:
            raise DataError(f"frame csv {path} channels disagree on the grid")
        return cls(starts.pop(), periods.pop(), {ch: s.values for ch, s in series.items()})


def _sniff_schema(path) -> dict[str, str]:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), [])
    schema = {name: name for name in header if name in CHANNELS}
    if not schema:
        raise DataError(f"csv {path} has no channel columns (expected some of {CHANNELS})")
    return schema


def _intersect(a: list[tuple[int, int]], b: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if lo < hi:
            out.append((lo, hi))
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return out


def build_frames(
    series: Iterable[RawSeries],
    period: int = DEFAULT_PERIOD,
    max_gap: int = 5,
) -> tuple[list[SensorFrame], list[GapRecord]]:
    """Clean every channel, intersect their coverage, resample into frames.

    Each maximal span covered by every channel at once yields one frame;
    spans producing zero full blocks are dropped. Frames arrive in time
    order. The ledger collects every gap action taken along the way.
    """
    by_channel: dict[str, list[RawSeries]] = {}
    ledger: list[GapRecord] = []
    for s in series:
        if s.channel in by_channel:
            raise DataError(f"duplicate channel {s.channel}")
        segments, records = fill_gaps(s, max_gap)
        by_channel[s.channel] = segments
        ledger.extend(records)
    if not by_channel:
        raise DataError("no channels given")

    spans = None
    for segments in by_channel.values():
        intervals = [(seg.start, seg.end) for seg in segments]
        spans = intervals if spans is None else _intersect(spans, intervals)
    frames = []
    for lo, hi in spans or []:
        resampled: dict[str, np.ndarray] = {}
        starts = set()
        for ch, segments in by_channel.items():
            seg = next(s for s in segments if s.start <= lo and s.end >= hi)
            i_from = (lo - seg.start) // seg.period
            i_to = (hi - seg.start) // seg.period
            window = RawSeries(ch, seg.start + i_from * seg.period, seg.period, seg.values[i_from:i_to])
            block = resample(window, period)
            resampled[ch] = block.values
            starts.add(block.start)
        if any(len(v) == 0 for v in resampled.values()):
            continue
        frames.append(SensorFrame(starts.pop(), period, resampled))
    return frames, ledger


@dataclass(frozen=True)
class PartitionSpec:
    """Half-open index ranges for the train / validation / test partitions."""

    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]

    def __post_init__(self):
        for name, (lo, hi) in self.items():
            if not (0 <= lo < hi):
                raise DataError(f"partition {name} range [{lo}, {hi}) is empty or negative")
        if not (self.train[1] <= self.val[0] and self.val[1] <= self.test[0]):
            raise DataError("partitions must be ordered train, val, test without overlap")

    def items(self):
        return (("train", self.train), ("val", self.val), ("test", self.test))


def default_partition(
    period: int = DEFAULT_PERIOD,
    train_days: int = 21,
    val_days: int = 7,
    test_days: int = 7,
) -> PartitionSpec:
    """Sequential day-based split: 21 train, 7 validation, 7 test by default."""
    ppd = 86400 // period
    a = train_days * ppd
    b = a + val_days * ppd
    c = b + test_days * ppd
    return PartitionSpec((0, a), (a, b), (b, c))


def split(frame: SensorFrame, spec: PartitionSpec) -> dict[str, SensorFrame]:
    """Cut one frame into the three partitions described by spec."""
    if spec.test[1] > len(frame):
        raise DataError(
            f"partition spec needs {spec.test[1]} points but the frame holds {len(frame)}"
        )
    return {name: frame.slice(lo, hi) for name, (lo, hi) in spec.items()}
