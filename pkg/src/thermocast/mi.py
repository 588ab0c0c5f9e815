"""Histogram estimates of mutual information between sensor channels.

Each variable is discretized into equal-width bins spanning its own
[min, max]; dependence with the indoor temperature is then scored in
bits, both over all samples and restricted to daylight (irradiance
above zero).  The normalized score divides the information by the mean
of the two marginal entropies, so a variable scores exactly 2 against
itself and roughly 0 against an independent one.

The entropy and information sums are arranged so that MI(X;X) equals
H(X) bit-for-bit, not merely within tolerance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .ingest import SensorFrame
from .validation import as_float_vector, check_finite

DEFAULT_BINS = 64
VARIABLE_ORDER = ("d", "h", "W", "H", "R", "Q")
_NEGATIVE_FLOOR = -1e-12


@dataclass(frozen=True)
class HistogramPair:
    """Joint equal-width histogram of two variables on a common sample."""

    bins: int
    edges_x: np.ndarray
    edges_y: np.ndarray
    joint: np.ndarray

    @property
    def total(self) -> float:
        return float(self.joint.sum())

    @property
    def marginal_x(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def marginal_y(self) -> np.ndarray:
        return self.joint.sum(axis=0)


def _edges(values: np.ndarray, bins: int, name: str) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        raise DataError(f"degenerate variable {name!r}: all samples equal {lo}")
    return np.linspace(lo, hi, bins + 1)


def histogram_pair(x, y, bins: int = DEFAULT_BINS) -> HistogramPair:
    if bins < 2:
        raise DataError("need at least 2 bins")
    xs = as_float_vector(x, "x")
    ys = as_float_vector(y, "y")
    check_finite(xs, "x")
    check_finite(ys, "y")
    if xs.size != ys.size:
        raise DataError(f"length mismatch: {xs.size} vs {ys.size}")
    if xs.size < bins:
        raise DataError(f"need at least {bins} samples for {bins} bins, got {xs.size}")
    edges_x = _edges(xs, bins, "x")
    edges_y = _edges(ys, bins, "y")
    joint, _, _ = np.histogram2d(xs, ys, bins=[edges_x, edges_y])
    return HistogramPair(bins=bins, edges_x=edges_x, edges_y=edges_y, joint=joint)


def entropy(counts) -> float:
    """Shannon entropy in bits of a histogram (any shape)."""
    arr = np.asarray(counts, dtype=float).ravel()
    if arr.size == 0 or np.any(arr < 0):
        raise DataError("histogram counts must be non-negative and non-empty")
    total = arr.sum()
    if total <= 0:
        raise DataError("empty histogram has no entropy")
    p = arr[arr > 0] / total
    return float(np.sum(-(p * np.log2(p))))


def _information(pair: HistogramPair) -> float:
    """Information sum over occupied joint cells, clamped at zero.

    The per-cell term is written as p*(log p - log pa - log pb) and the
    cells are visited in row-major order: on a self-pair the joint is
    diagonal, every cell reduces to -(p*log p), and the sum reproduces
    the entropy of the marginal exactly.
    """
    total = pair.total
    rows, cols = np.nonzero(pair.joint)
    p = pair.joint[rows, cols] / total
    pa = pair.marginal_x[rows] / total
    pb = pair.marginal_y[cols] / total
    info = float(np.sum(p * (np.log2(p) - np.log2(pa) - np.log2(pb))))
    if info < _NEGATIVE_FLOOR:
        raise DataError(f"information sum {info} fell below the numerical floor")
    return max(info, 0.0)


def mutual_information(x, y, bins: int = DEFAULT_BINS) -> float:
    """MI(X;Y) in bits from an equal-width joint histogram."""
    return _information(histogram_pair(x, y, bins))


def normalized_mi(x, y, bins: int = DEFAULT_BINS) -> float:
    """Information scaled by the mean marginal entropy: 2 for a variable
    against itself, near 0 for independent variables, always in [0, 2]."""
    pair = histogram_pair(x, y, bins)
    h_x = entropy(pair.marginal_x)
    h_y = entropy(pair.marginal_y)
    if h_x + h_y <= 0.0:
        raise DataError("both variables carry zero entropy")
    return 4.0 * _information(pair) / (h_x + h_y)


# ---------------------------------------------------------------------------
# frame-level reporting
# ---------------------------------------------------------------------------


def frame_variables(frame: SensorFrame) -> dict[str, np.ndarray]:
    """Channels of a frame as aligned sample arrays, with the derived
    hour-of-day variable added under the key "h"."""
    out: dict[str, np.ndarray] = {}
    hours = frame.hours().astype(float)
    for name in VARIABLE_ORDER:
        if name == "h":
            out["h"] = hours
        elif name in frame.channels:
            out[name] = np.asarray(frame.channels[name], dtype=float)
    return out


def day_filter(variables: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Keep only daylight samples (irradiance strictly positive) in
    every variable.  The result is a bag of aligned samples for
    distribution work; it is no longer an evenly spaced series."""
    if "W" not in variables:
        raise DataError("daylight filtering needs the irradiance variable W")
    mask = np.asarray(variables["W"], dtype=float) > 0.0
    return {name: np.asarray(vals)[mask] for name, vals in variables.items()}


@dataclass(frozen=True)
class MiReport:
    """Information of every variable against indoor temperature, over
    all samples and over daylight samples only.  Entries are NaN where
    the estimate is undefined (variable constant after filtering)."""

    bins: int
    variables: tuple
    mi_all: tuple
    nmi_all: tuple
    mi_day: tuple
    nmi_day: tuple


def _scores(target: np.ndarray, values: np.ndarray, bins: int) -> tuple[float, float]:
    try:
        pair = histogram_pair(values, target, bins)
    except DataError:
        return math.nan, math.nan
    info = _information(pair)
    h_sum = entropy(pair.marginal_x) + entropy(pair.marginal_y)
    return info, 4.0 * info / h_sum


def build_report(frame: SensorFrame, bins: int = DEFAULT_BINS) -> MiReport:
    """Score every available variable against indoor temperature."""
    variables = frame_variables(frame)
    if "d" not in variables:
        raise DataError("frame has no indoor-temperature channel d")
    daylight = day_filter(variables)

    names = tuple(variables)
    mi_all, nmi_all, mi_day, nmi_day = [], [], [], []
    for name in names:
        info, norm = _scores(variables["d"], variables[name], bins)
        mi_all.append(info)
        nmi_all.append(norm)
        info, norm = _scores(daylight["d"], daylight[name], bins)
        mi_day.append(info)
        nmi_day.append(norm)
    return MiReport(
        bins=bins,
        variables=names,
        mi_all=tuple(mi_all),
        nmi_all=tuple(nmi_all),
        mi_day=tuple(mi_day),
        nmi_day=tuple(nmi_day),
    )


def write_report(report: MiReport, path) -> None:
    """CSV with one row per (metric, variant) and one column per variable."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "variant", *report.variables])
        for label, variant, row in (
            ("mi_bits", "all-hours", report.mi_all),
            ("nmi", "all-hours", report.nmi_all),
            ("mi_bits", "day-only", report.mi_day),
            ("nmi", "day-only", report.nmi_day),
        ):
            writer.writerow([label, variant, *[repr(v) for v in row]])
