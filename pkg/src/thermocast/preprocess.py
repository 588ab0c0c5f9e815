"""Turning sensor frames into supervised learning patterns.

The target channel d enters the model as first differences (step-to-step
changes), value covariates (W, H, Q, R) are z-scored with statistics taken
from the training partition only, and the hour of day becomes a 24-slot
one-hot block. One pattern per admissible origin t packs:

  [ d deltas over the past I(d) steps,
    one z-scored window of length I(x) per selected value covariate,
    one 24-wide one-hot block per selected hour position ]

against a target of the next Z deltas of d. All windows run oldest to
newest. Absolute forecasts come back via invert_difference with the
pattern's anchor (the last observed temperature at the origin).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .exceptions import DataError
from .ingest import SensorFrame
from .validation import as_float_vector

#: layout order of value-covariate windows inside a pattern
COVARIATE_ORDER = ("W", "H", "Q", "R")
ALL_COVARIATES = ("h",) + COVARIATE_ORDER
HOURS = 24


def difference(values) -> np.ndarray:
    """First differences: out[i] = values[i+1] - values[i]."""
    v = as_float_vector(values, "values")
    if len(v) < 2:
        raise DataError("difference needs at least two samples")
    return np.diff(v)


def invert_difference(deltas, anchor) -> np.ndarray:
    """Rebuild absolute values from deltas and the last observed value.

    out[i] = anchor + sum(deltas[:i+1]), so feeding the deltas of a series
    together with its first value reproduces the series (sans that value).
    A 2-D delta matrix is anchored row-wise by a vector of anchors.
    """
    arr = np.asarray(deltas, dtype=float)
    if arr.ndim == 1:
        return float(anchor) + np.cumsum(arr)
    if arr.ndim == 2:
        anchors = as_float_vector(anchor, "anchor")
        if len(anchors) != arr.shape[0]:
            raise ValueError("need one anchor per delta row")
        return anchors[:, None] + np.cumsum(arr, axis=1)
    raise ValueError("deltas must be 1-D or 2-D")


def znormalize(values, mean: float, std: float) -> np.ndarray:
    """Center and scale by precomputed statistics; zero spread is an error."""
    if std == 0.0:
        raise DataError("cannot z-normalize with zero standard deviation")
    return (np.asarray(values, dtype=float) - mean) / std


def encode_hour(hour: int) -> np.ndarray:
    """One-hot over the 24 hours of the day."""
    if not 0 <= int(hour) <= 23:
        raise DataError(f"hour must lie in 0..23, got {hour}")
    out = np.zeros(HOURS)
    out[int(hour)] = 1.0
    return out


#: key under which the training statistics of the differenced target live
DELTA_KEY = "d_delta"


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and population standard deviation."""

    means: dict[str, float]
    stds: dict[str, float]

    def require(self, channel: str) -> tuple[float, float]:
        if channel not in self.means:
            raise DataError(f"normalization statistics missing for channel {channel!r}")
        return self.means[channel], self.stds[channel]


def compute_norm_stats(
    frame: SensorFrame, channels: Iterable[str], include_deltas: bool = False
) -> NormStats:
    """Statistics over the given frame; call this on the training partition.

    Standard deviations are population ones (divide by n). When
    include_deltas is set the statistics of the differenced target are
    stored under DELTA_KEY as well.
    """
    means: dict[str, float] = {}
    stds: dict[str, float] = {}
    for ch in channels:
        if ch not in frame.channels:
            raise DataError(f"frame has no channel {ch!r}")
        v = frame.channels[ch]
        means[ch] = float(np.mean(v))
        stds[ch] = float(np.std(v))
    if include_deltas:
        dd = difference(frame.channels["d"])
        means[DELTA_KEY] = float(np.mean(dd))
        stds[DELTA_KEY] = float(np.std(dd))
    return NormStats(means, stds)


@dataclass(frozen=True)
class WindowSpec:
    """Shape of one supervised pattern.

    past_size is the look-back I(d) on the differenced target. covariates
    picks any of h, W, H, Q, R; value covariates look back covariate_past
    steps (an int for all, or a per-channel mapping), the hour channel
    contributes hour_blocks one-hot blocks for positions t, t-1, ...
    future_window is the number of deltas Z to predict. normalize_deltas
    additionally z-scores the past d-delta window (targets stay raw).
    """

    past_size: int = 5
    covariates: tuple[str, ...] = ()
    covariate_past: int | Mapping[str, int] = 5
    hour_blocks: int = 1
    future_window: int = 12
    normalize_deltas: bool = False

    def __post_init__(self):
        if self.past_size < 1:
            raise DataError(f"past_size must be >= 1, got {self.past_size}")
        if self.future_window < 1:
            raise DataError(f"future_window must be >= 1, got {self.future_window}")
        if self.hour_blocks < 1:
            raise DataError(f"hour_blocks must be >= 1, got {self.hour_blocks}")
        bad = [c for c in self.covariates if c not in ALL_COVARIATES]
        if bad:
            raise DataError(f"unknown covariates {bad}, expected a subset of {ALL_COVARIATES}")
        if len(set(self.covariates)) != len(self.covariates):
            raise DataError("covariates must not repeat")
        canonical = tuple(c for c in ALL_COVARIATES if c in self.covariates)
        object.__setattr__(self, "covariates", canonical)
        for ch in self.value_covariates:
            if self.past_of(ch) < 1:
                raise DataError(f"past size for {ch!r} must be >= 1")

    @property
    def value_covariates(self) -> tuple[str, ...]:
        return tuple(c for c in self.covariates if c != "h")

    @property
    def with_hour(self) -> bool:
        return "h" in self.covariates

    def past_of(self, channel: str) -> int:
        if channel == "d":
            return self.past_size
        if channel == "h":
            return self.hour_blocks
        if isinstance(self.covariate_past, Mapping):
            if channel not in self.covariate_past:
                raise DataError(f"covariate_past mapping lacks {channel!r}")
            return int(self.covariate_past[channel])
        return int(self.covariate_past)

    @property
    def max_past(self) -> int:
        sizes = [self.past_size] + [self.past_of(c) for c in self.covariates]
        return max(sizes)

    @property
    def input_size(self) -> int:
        size = self.past_size
        size += sum(self.past_of(c) for c in self.value_covariates)
        if self.with_hour:
            size += HOURS * self.hour_blocks
        return size


@dataclass
class PatternSet:
    """Assembled model inputs/targets plus the bookkeeping to undo them."""

    inputs: np.ndarray  # (n, input_size)
    targets: np.ndarray  # (n, Z) raw deltas
    origins: np.ndarray  # (n,) frame index t of each pattern
    anchors: np.ndarray  # (n,) absolute temperature at each origin
    spec: WindowSpec

    def __post_init__(self):
        n = self.inputs.shape[0]
        if not (self.targets.shape[0] == len(self.origins) == len(self.anchors) == n):
            raise DataError("pattern arrays disagree on the number of windows")
        if not np.all(np.isfinite(self.inputs)) or not np.all(np.isfinite(self.targets)):
            raise DataError("patterns contain non-finite entries")

    def __len__(self):
        return self.inputs.shape[0]

    def absolute_targets(self) -> np.ndarray:
        """Targets mapped back to the original scale, shape (n, Z)."""
        return invert_difference(self.targets, self.anchors)

    def to_csv(self, path) -> None:
        """One row per window: origin index, then inputs, then targets."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["origin"]
                + [f"x{i}" for i in range(self.inputs.shape[1])]
                + [f"y{i}" for i in range(self.targets.shape[1])]
            )
            for o, x, y in zip(self.origins, self.inputs, self.targets):
                writer.writerow([int(o), *[repr(float(v)) for v in x], *[repr(float(v)) for v in y]])


def admissible_origins(n_frame: int, spec: WindowSpec) -> np.ndarray:
    """Frame positions that can anchor a full pattern, stride 1."""
    t_min = spec.max_past
    t_max = n_frame - 1 - spec.future_window
    if t_max < t_min:
        raise DataError(
            f"frame of {n_frame} points is too short for past {t_min} + future {spec.future_window}"
        )
    return np.arange(t_min, t_max + 1)


def build_patterns(
    frame: SensorFrame, spec: WindowSpec, stats: NormStats | None = None
) -> PatternSet:
    """Slide the window spec over a frame and assemble every pattern.

    stats must hold training-partition statistics for each value covariate
    (and for DELTA_KEY when spec.normalize_deltas is on); pass them even
    when building validation or test patterns so nothing leaks.
    """
    if "d" not in frame.channels:
        raise DataError("frame lacks the target channel d")
    for ch in spec.value_covariates:
        if ch not in frame.channels:
            raise DataError(f"frame lacks covariate channel {ch!r}")
    if spec.value_covariates or spec.normalize_deltas:
        if stats is None:
            raise DataError("window spec needs normalization statistics, none given")

    origins = admissible_origins(len(frame), spec)
    t0 = origins[0]
    n = len(origins)
    z = spec.future_window
    deltas = difference(frame.channels["d"])

    parts: list[np.ndarray] = []
    d_win = sliding_window_view(deltas, spec.past_size)
    past = d_win[t0 - spec.past_size : t0 - spec.past_size + n]
    if spec.normalize_deltas:
        past = znormalize(past, *stats.require(DELTA_KEY))
    parts.append(past)

    for ch in spec.value_covariates:
        mean, std = stats.require(ch)
        width = spec.past_of(ch)
        win = sliding_window_view(frame.channels[ch], width)
        rows = win[t0 - width + 1 : t0 - width + 1 + n]
        parts.append(znormalize(rows, mean, std))

    if spec.with_hour:
        hours = frame.hours()
        eye = np.eye(HOURS)
        for back in range(spec.hour_blocks - 1, -1, -1):
            parts.append(eye[hours[origins - back]])

    inputs = np.ascontiguousarray(np.concatenate(parts, axis=1))
    t_win = sliding_window_view(deltas, z)
    targets = np.ascontiguousarray(t_win[t0 : t0 + n])
    anchors = frame.channels["d"][origins].copy()
    return PatternSet(inputs, targets, origins, anchors, spec)


class PatternBuilder(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper: fit statistics on train, transform any frame."""

    def __init__(self, spec: WindowSpec = WindowSpec()):
        self.spec = spec

    def fit(self, frame: SensorFrame, y=None):
        include = self.spec.normalize_deltas
        self.stats_ = compute_norm_stats(frame, self.spec.value_covariates, include_deltas=include)
        return self

    def transform(self, frame: SensorFrame) -> PatternSet:
        if not hasattr(self, "stats_"):
            raise NotFittedError("PatternBuilder.transform called before fit")
        return build_patterns(frame, self.spec, self.stats_)
