"""Committees over the look-back sweep of the network forecaster.

Training one network per past-window size I(d) gives a family of members
whose validation scores differ; this module turns those scores into a
single forecaster three ways:

  best      pick the member with the lowest validation MAE alone
  comb-eq   average every member with equal weight 1/M
  comb-exp  softmax over inverse validation MAEs: exp(1/mae_i) / sum_j exp(1/mae_j)

Weights always sum to one, so combining in delta space and rebuilding the
absolute forecast once is identical to rebuilding each member and then
averaging. Note the comb-exp map saturates: when the spread of 1/mae is
large the best member soaks up essentially all the weight. That is the
intended behaviour and is left uncorrected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .exceptions import ConfigError, DataError
from .ingest import SensorFrame
from .preprocess import NormStats, PatternSet, WindowSpec, build_patterns, invert_difference

STRATEGIES = ("best", "comb-eq", "comb-exp")


@dataclass(frozen=True)
class MemberScore:
    """Validation result of one sweep member."""

    member_id: str
    past_size: int
    val_mae: float


@dataclass(frozen=True)
class EnsembleSpec:
    """Strategy plus the resolved member weights (aligned by position)."""

    strategy: str
    member_ids: tuple[str, ...]
    weights: tuple[float, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if not self.member_ids:
            raise ConfigError("an ensemble needs at least one member")
        if not (len(self.member_ids) == len(self.weights) == len(self.scores)):
            raise ConfigError("member_ids, weights and scores must align")
        if any(w < 0 for w in self.weights):
            raise ConfigError("weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ConfigError(f"weights must sum to 1, got {sum(self.weights)!r}")


def _check_scores(scores: Sequence[MemberScore]) -> None:
    if not scores:
        raise ConfigError("need at least one member score")
    ids = [s.member_id for s in scores]
    if len(set(ids)) != len(ids):
        raise ConfigError("member ids must be unique")
    for s in scores:
        if not np.isfinite(s.val_mae) or s.val_mae < 0:
            raise DataError(f"member {s.member_id}: validation MAE {s.val_mae!r} is unusable")


def select_best(scores: Sequence[MemberScore]) -> EnsembleSpec:
    """The single lowest-MAE member; ties go to the smallest past size."""
    _check_scores(scores)
    winner = min(scores, key=lambda s: (s.val_mae, s.past_size))
    return EnsembleSpec("best", (winner.member_id,), (1.0,), (winner.val_mae,))


def combine_uniform(scores: Sequence[MemberScore]) -> EnsembleSpec:
    """Equal weight 1/M for every member."""
    _check_scores(scores)
    m = len(scores)
    return EnsembleSpec(
        "comb-eq",
        tuple(s.member_id for s in scores),
        (1.0 / m,) * m,
        tuple(s.val_mae for s in scores),
    )


def softmax_weights(val_maes: Sequence[float]) -> np.ndarray:
    """Softmax over inverse scores, shifted by the maximum for stability."""
    maes = np.asarray(val_maes, dtype=float)
    if np.any(maes == 0.0):
        raise DataError(
            "a member has validation MAE 0; softmax weighting is undefined, use the best strategy"
        )
    inv = 1.0 / maes
    shifted = inv - np.max(inv)
    e = np.exp(shifted)
    return e / e.sum()


def combine_softmax(scores: Sequence[MemberScore]) -> EnsembleSpec:
    """Weights proportional to exp(1 / validation MAE)."""
    _check_scores(scores)
    weights = softmax_weights([s.val_mae for s in scores])
    return EnsembleSpec(
        "comb-exp",
        tuple(s.member_id for s in scores),
        tuple(float(w) for w in weights),
        tuple(s.val_mae for s in scores),
    )


def make_spec(strategy: str, scores: Sequence[MemberScore]) -> EnsembleSpec:
    if strategy == "best":
        return select_best(scores)
    if strategy == "comb-eq":
        return combine_uniform(scores)
    if strategy == "comb-exp":
        return combine_softmax(scores)
    raise ConfigError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")


def combine_deltas(weights: Sequence[float], member_deltas: Sequence[np.ndarray]) -> np.ndarray:
    """Weighted sum of per-member delta forecasts (vectors or matrices)."""
    if len(weights) != len(member_deltas):
        raise ConfigError("need exactly one weight per member forecast")
    stack = [np.asarray(d, dtype=float) for d in member_deltas]
    shapes = {d.shape for d in stack}
    if len(shapes) != 1:
        raise DataError(f"member forecasts disagree on shape: {sorted(shapes)}")
    out = np.zeros(stack[0].shape)
    for w, d in zip(weights, stack):
        out += w * d
    return out


def predict_ensemble(
    spec: EnsembleSpec, member_deltas: Sequence[np.ndarray], anchor
) -> np.ndarray:
    """Combine members in delta space, then rebuild absolute values once.

    member_deltas must follow spec.member_ids order. Because the weights
    sum to one, this equals rebuilding each member against the same anchor
    and averaging the absolute forecasts.
    """
    return invert_difference(combine_deltas(spec.weights, member_deltas), anchor)


@dataclass
class Member:
    """One fitted forecaster plus the window shape it was trained on."""

    member_id: str
    forecaster: object  # anything with .predict(inputs) in delta space
    window: WindowSpec


class Ensemble:
    """A resolved EnsembleSpec bound to its fitted members.

    Members must share the future window and covariate layout; they are
    expected to differ only in the look-back on the target deltas.
    """

    def __init__(self, spec: EnsembleSpec, members: Sequence[Member]):
        by_id: Mapping[str, Member] = {m.member_id: m for m in members}
        missing = [mid for mid in spec.member_ids if mid not in by_id]
        if missing:
            raise ConfigError(f"spec references unknown members {missing}")
        self.spec = spec
        self.members = [by_id[mid] for mid in spec.member_ids]
        zs = {m.window.future_window for m in self.members}
        covs = {m.window.covariates for m in self.members}
        if len(zs) != 1 or len(covs) != 1:
            raise ConfigError("ensemble members must share future window and covariates")

    def predict_window(self, inputs: Sequence[np.ndarray], anchor) -> np.ndarray:
        """Absolute forecast for one origin given each member's input vector."""
        deltas = [m.forecaster.predict(np.atleast_2d(x))[0] for m, x in zip(self.members, inputs)]
        return predict_ensemble(self.spec, deltas, anchor)

    def predict_frame(
        self, frame: SensorFrame, stats: NormStats | None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Forecast every admissible origin of a frame.

        Members with different look-backs admit different origin ranges;
        only origins admissible for all of them are kept. Returns
        (origins, absolute predictions, absolute targets), the latter two
        shaped (n, Z).
        """
        sets: list[PatternSet] = [build_patterns(frame, m.window, stats) for m in self.members]
        start = max(ps.origins[0] for ps in sets)
        trimmed = [ps.origins[0] for ps in sets]
        deltas = []
        for ps, member, t0 in zip(sets, self.members, trimmed):
            offset = start - t0
            deltas.append(member.forecaster.predict(ps.inputs[offset:]))
        reference = sets[int(np.argmax(trimmed))]
        offset = start - reference.origins[0]
        origins = reference.origins[offset:]
        anchors = reference.anchors[offset:]
        combined = combine_deltas(self.spec.weights, deltas)
        preds = invert_difference(combined, anchors)
        targets = invert_difference(reference.targets[offset:], anchors)
        return origins, preds, targets
