"""Forecast error measures and their dataset-level aggregation.

All three measures score one forecast window (length Z) against the observed
values on the original scale. Dataset-level values are the plain mean of the
per-window scores, reported with a 99% normal-approximation confidence
interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DataError
from .validation import as_float_matrix, as_float_vector, check_same_length

# 99% two-sided normal quantile used for all confidence intervals.
Z_99 = 2.5758


def _window_pair(pred, target):
    p = as_float_vector(pred, "pred")
    t = as_float_vector(target, "target")
    check_same_length(p, t, "pred and target")
    if len(p) == 0:
        raise ValueError("windows must be non-empty")
    return p, t


def mae(pred, target) -> float:
    """Mean absolute error over one window."""
    p, t = _window_pair(pred, target)
    return float(np.mean(np.abs(p - t)))


def rmse(pred, target) -> float:
    """Root mean squared error over one window."""
    p, t = _window_pair(pred, target)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def smape(pred, target) -> float:
    """Symmetric mean absolute percentage error over one window, in percent.

    Each term is |p - t| / ((|p| + |t|) / 2), so the result lives in
    [0, 200]. A term where both values are exactly zero has no defined
    percentage and raises DataError rather than silently contributing 0.
    """
    p, t = _window_pair(pred, target)
    denom = (np.abs(p) + np.abs(t)) / 2.0
    if np.any(denom == 0.0):
        raise DataError("smape undefined: prediction and target both zero")
    return float(np.mean(np.abs(p - t) / denom) * 100.0)


@dataclass(frozen=True)
class WindowError:
    """Per-window scores for one forecast origin."""

    origin: int
    mae: float
    rmse: float
    smape: float


@dataclass(frozen=True)
class AggregateError:
    """Dataset-level score: mean over windows with a 99% CI.

    count == 1 means the interval is degenerate (mean +/- 0); consumers
    should treat such rows as unsupported by a spread estimate.
    """

    kind: str
    mean: float
    lower: float
    upper: float
    count: int
    per_horizon: tuple[float, ...] | None = None


_KINDS = ("mae", "rmse", "smape")


def window_errors(preds, targets, origins: Sequence[int] | None = None) -> list[WindowError]:
    """Score every row of two (n, Z) matrices; origins default to 0..n-1."""
    p = as_float_matrix(preds, "preds")
    t = as_float_matrix(targets, "targets")
    if p.shape != t.shape:
        raise ValueError(f"preds and targets must share a shape, got {p.shape} vs {t.shape}")
    if origins is None:
        origins = range(p.shape[0])
    origins = list(origins)
    if len(origins) != p.shape[0]:
        raise ValueError("origins must have one entry per window")
    return [
        WindowError(int(o), mae(pi, ti), rmse(pi, ti), smape(pi, ti))
        for o, pi, ti in zip(origins, p, t)
    ]


def _mean_ci(values: np.ndarray, kind: str) -> AggregateError:
    n = len(values)
    m = float(np.mean(values))
    if n == 1:
        return AggregateError(kind, m, m, m, 1)
    half = Z_99 * float(np.std(values, ddof=1)) / math.sqrt(n)
    return AggregateError(kind, m, m - half, m + half, n)


def aggregate(errors: Sequence[WindowError], kind: str) -> AggregateError:
    """Mean of one per-window measure with its 99% CI."""
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    if len(errors) == 0:
        raise ValueError("cannot aggregate zero windows")
    values = np.array([getattr(e, kind) for e in errors], dtype=float)
    return _mean_ci(values, kind)


def _horizon_terms(preds: np.ndarray, targets: np.ndarray, kind: str) -> np.ndarray:
    """Per-window inner terms at each horizon step, shape (n, Z)."""
    diff = preds - targets
    if kind == "mae":
        return np.abs(diff)
    if kind == "rmse":
        return diff**2
    denom = (np.abs(preds) + np.abs(targets)) / 2.0
    if np.any(denom == 0.0):
        raise DataError("smape undefined: prediction and target both zero")
    return np.abs(diff) / denom * 100.0


def horizon_profile(preds, targets, kind: str) -> list[AggregateError]:
    """Per-horizon aggregation: one AggregateError per forecast step.

    For mae and smape the step means average back to the dataset-level
    value exactly (same inner terms, regrouped). For rmse the profile is
    the per-step root mean square, which does not average back; its CI is
    the square-error CI mapped through the square root (lower clamped
    at zero).
    """
    p = as_float_matrix(preds, "preds")
    t = as_float_matrix(targets, "targets")
    if p.shape != t.shape:
        raise ValueError(f"preds and targets must share a shape, got {p.shape} vs {t.shape}")
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    terms = _horizon_terms(p, t, kind)
    out = []
    for z in range(terms.shape[1]):
        agg = _mean_ci(terms[:, z], kind)
        if kind == "rmse":
            agg = AggregateError(
                kind,
                float(np.sqrt(agg.mean)),
                float(np.sqrt(max(agg.lower, 0.0))),
                float(np.sqrt(agg.upper)),
                agg.count,
            )
        out.append(agg)
    return out


def evaluate_forecasts(preds, targets, origins: Sequence[int] | None = None) -> dict[str, AggregateError]:
    """All three aggregate measures for a block of forecast windows.

    The per_horizon field carries the step-wise means (length Z) so a
    horizon-degradation curve can be read straight off the result.
    """
    errors = window_errors(preds, targets, origins)
    out = {}
    for kind in _KINDS:
        agg = aggregate(errors, kind)
        profile = horizon_profile(preds, targets, kind)
        out[kind] = AggregateError(
            kind,
            agg.mean,
            agg.lower,
            agg.upper,
            agg.count,
            per_horizon=tuple(a.mean for a in profile),
        )
    return out
