"""Hyperparameter exploration: the grid over covariate sets, network
layouts and optimizer constants, the look-back sweep that feeds the
ensembles, and box-and-whisker summaries per hyperparameter axis.

Results go to an append-only CSV keyed by a deterministic trial id, so
an interrupted run picks up exactly where it stopped.  Trials are
independent; with --jobs > 1 they run in worker processes while rows
are still appended in enumeration order.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from .ensemble import Member, MemberScore
from .exceptions import ConfigError
from .ingest import SensorFrame
from .metrics import evaluate_forecasts
from .mlp import MlpForecaster, parse_hidden_layout
from .preprocess import (
    WindowSpec,
    build_patterns,
    compute_norm_stats,
    invert_difference,
)

DEFAULT_LAYOUTS = ("8t", "16t", "24t", "8t-8t", "24t-8t", "24t-16t", "16l-8l", "24l")
DEFAULT_ETAS = (0.0005, 0.001, 0.005)
DEFAULT_MUS = (0.001, 0.005)
DEFAULT_EPSILONS = (1e-6, 1e-5, 1e-4)
DEFAULT_SWEEP = (1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21)

_RESULT_COLUMNS = (
    "trial_id",
    "covariates",
    "layout",
    "eta",
    "mu",
    "epsilon",
    "past_size",
    "covariate_past",
    "hour_blocks",
    "future_window",
    "epochs",
    "patience",
    "seed",
    "val_mae",
    "val_rmse",
    "val_smape",
    "best_epoch",
    "diverged",
    "train_seconds",
)


def encode_covariates(covariates) -> str:
    """Input channels as a label: the target plus any covariates."""
    return "+".join(("d", *covariates))


def decode_covariates(label: str) -> tuple[str, ...]:
    parts = label.split("+")
    if parts[0] != "d":
        raise ConfigError(f"covariate label must start with 'd': {label!r}")
    return tuple(parts[1:])


@dataclass(frozen=True)
class TrainSettings:
    """Everything one training run needs besides the data."""

    covariates: tuple = ()
    layout: str = "8t"
    eta: float = 0.005
    mu: float = 0.001
    epsilon: float = 1e-6
    past_size: int = 5
    covariate_past: int = 5
    hour_blocks: int = 1
    future_window: int = 12
    epochs: int = 300
    patience: int = 25
    seed: int = 0

    @property
    def trial_id(self) -> str:
        return "|".join(
            [
                encode_covariates(self.covariates),
                self.layout,
                f"eta={self.eta!r}",
                f"mu={self.mu!r}",
                f"eps={self.epsilon!r}",
                f"past={self.past_size}",
                f"seed={self.seed}",
            ]
        )

    def window(self) -> WindowSpec:
        return WindowSpec(
            past_size=self.past_size,
            covariates=self.covariates,
            covariate_past=self.covariate_past,
            hour_blocks=self.hour_blocks,
            future_window=self.future_window,
        )

    def forecaster(self) -> MlpForecaster:
        sizes, activations = parse_hidden_layout(self.layout)
        return MlpForecaster(
            hidden=sizes,
            activation=activations,
            learning_rate=self.eta,
            momentum=self.mu,
            weight_decay=self.epsilon,
            epochs=self.epochs,
            patience=self.patience,
            seed=self.seed,
        )


@dataclass(frozen=True)
class GridSpec:
    """Axes of the exploration; the default vocabulary mirrors the
    values the recommended configurations draw from."""

    covariate_sets: tuple = ((),)
    layouts: tuple = DEFAULT_LAYOUTS
    etas: tuple = DEFAULT_ETAS
    mus: tuple = DEFAULT_MUS
    epsilons: tuple = DEFAULT_EPSILONS
    seeds: tuple = (0,)
    past_size: int = 5
    covariate_past: int = 5
    hour_blocks: int = 1
    future_window: int = 12
    epochs: int = 300
    patience: int = 25
    sweep_sizes: tuple = DEFAULT_SWEEP

    def __post_init__(self):
        for name in ("covariate_sets", "layouts", "etas", "mus", "epsilons", "seeds"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"grid axis {name} must not be empty")
        if len(self.sweep_sizes) == 0:
            raise ConfigError("sweep_sizes must not be empty")


def enumerate_grid(spec: GridSpec) -> list[TrainSettings]:
    """Full Cartesian product in fixed lexicographic order."""
    out = []
    for covariates in spec.covariate_sets:
        for layout in spec.layouts:
            for eta in spec.etas:
                for mu in spec.mus:
                    for epsilon in spec.epsilons:
                        for seed in spec.seeds:
                            out.append(
                                TrainSettings(
                                    covariates=tuple(covariates),
                                    layout=layout,
                                    eta=eta,
                                    mu=mu,
                                    epsilon=epsilon,
                                    past_size=spec.past_size,
                                    covariate_past=spec.covariate_past,
                                    hour_blocks=spec.hour_blocks,
                                    future_window=spec.future_window,
                                    epochs=spec.epochs,
                                    patience=spec.patience,
                                    seed=seed,
                                )
                            )
    return out


@dataclass(frozen=True)
class TrialResult:
    settings: TrainSettings
    val_mae: float
    val_rmse: float
    val_smape: float
    best_epoch: int
    diverged: bool
    train_seconds: float

    def row(self) -> list:
        s = self.settings
        return [
            s.trial_id,
            encode_covariates(s.covariates),
            s.layout,
            repr(s.eta),
            repr(s.mu),
            repr(s.epsilon),
            s.past_size,
            s.covariate_past,
            s.hour_blocks,
            s.future_window,
            s.epochs,
            s.patience,
            s.seed,
            repr(self.val_mae),
            repr(self.val_rmse),
            repr(self.val_smape),
            self.best_epoch,
            int(self.diverged),
            repr(self.train_seconds),
        ]


def _result_from_row(row: dict) -> TrialResult:
    settings = TrainSettings(
        covariates=decode_covariates(row["covariates"]),
        layout=row["layout"],
        eta=float(row["eta"]),
        mu=float(row["mu"]),
        epsilon=float(row["epsilon"]),
        past_size=int(row["past_size"]),
        covariate_past=int(row["covariate_past"]),
        hour_blocks=int(row["hour_blocks"]),
        future_window=int(row["future_window"]),
        epochs=int(row["epochs"]),
        patience=int(row["patience"]),
        seed=int(row["seed"]),
    )
    return TrialResult(
        settings=settings,
        val_mae=float(row["val_mae"]),
        val_rmse=float(row["val_rmse"]),
        val_smape=float(row["val_smape"]),
        best_epoch=int(row["best_epoch"]),
        diverged=bool(int(row["diverged"])),
        train_seconds=float(row["train_seconds"]),
    )


def read_results(path) -> list[TrialResult]:
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is not None and tuple(reader.fieldnames) != _RESULT_COLUMNS:
            raise ConfigError(f"{path}: unexpected results header {reader.fieldnames}")
        return [_result_from_row(row) for row in reader]


def _train_one(settings: TrainSettings, train_frame: SensorFrame, val_frame: SensorFrame):
    """Train one network; returns (forecaster, window, stats, result)."""
    window = settings.window()
    stats = compute_norm_stats(train_frame, window.value_covariates)
    train_set = build_patterns(train_frame, window, stats)
    val_set = build_patterns(val_frame, window, stats)

    started = time.perf_counter()
    forecaster = settings.forecaster()
    forecaster.fit(train_set, validation=val_set)
    elapsed = time.perf_counter() - started

    preds = invert_difference(forecaster.predict(val_set.inputs), val_set.anchors)
    scores = evaluate_forecasts(preds, val_set.absolute_targets(), val_set.origins)
    mae = scores["mae"].mean
    rmse = scores["rmse"].mean
    smape = scores["smape"].mean
    report = forecaster.report_
    diverged = report.stopping_reason == "diverged" or not np.isfinite([mae, rmse, smape]).all()
    result = TrialResult(
        settings=settings,
        val_mae=float(mae),
        val_rmse=float(rmse),
        val_smape=float(smape),
        best_epoch=report.best_epoch,
        diverged=diverged,
        train_seconds=elapsed,
    )
    return forecaster, window, stats, result


def _execute_trial(settings: TrainSettings, train_frame: SensorFrame, val_frame: SensorFrame) -> TrialResult:
    """One grid cell; module-level so worker processes can import it."""
    return _train_one(settings, train_frame, val_frame)[3]


def run_grid(
    spec: GridSpec,
    train_frame: SensorFrame,
    val_frame: SensorFrame,
    results_path,
    jobs: int = 1,
) -> list[TrialResult]:
    """Execute every missing grid cell, appending rows as they finish.

    Cells already present in the results file are not recomputed, so a
    killed run resumes by rerunning the same command.  Returns all
    results in enumeration order.
    """
    configs = enumerate_grid(spec)
    done: dict[str, TrialResult] = {}
    fresh_file = not os.path.exists(results_path)
    if not fresh_file:
        for result in read_results(results_path):
            done[result.settings.trial_id] = result

    todo = [s for s in configs if s.trial_id not in done]
    with open(results_path, "a", newline="") as handle:
        writer = csv.writer(handle)
        if fresh_file:
            writer.writerow(_RESULT_COLUMNS)
            handle.flush()

        def record(result: TrialResult) -> None:
            done[result.settings.trial_id] = result
            writer.writerow(result.row())
            handle.flush()

        if jobs <= 1:
            for settings in todo:
                record(_execute_trial(settings, train_frame, val_frame))
        else:
            task = partial(_execute_trial, train_frame=train_frame, val_frame=val_frame)
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for result in pool.map(task, todo):
                    record(result)

    return [done[s.trial_id] for s in configs]


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

_AXES = {
    "covariates": lambda s: encode_covariates(s.covariates),
    "layout": lambda s: s.layout,
    "eta": lambda s: s.eta,
    "mu": lambda s: s.mu,
    "epsilon": lambda s: s.epsilon,
    "past_size": lambda s: s.past_size,
    "seed": lambda s: s.seed,
}


@dataclass(frozen=True)
class BoxStats:
    """Five-number summary of validation MAE over one axis value."""

    axis: str
    value: object
    count: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


def box_stats(results, axis: str) -> list[BoxStats]:
    """Quartiles (linear interpolation between closest ranks) of the
    validation MAE, grouped by one hyperparameter axis.  Diverged
    trials are left out."""
    if axis not in _AXES:
        raise ConfigError(f"unknown axis {axis!r}; use one of {sorted(_AXES)}")
    key = _AXES[axis]
    groups: dict = {}
    for result in results:
        if result.diverged:
            continue
        groups.setdefault(key(result.settings), []).append(result.val_mae)
    out = []
    for value in sorted(groups):
        values = np.asarray(groups[value], dtype=float)
        lo, q1, med, q3, hi = np.percentile(values, [0, 25, 50, 75, 100])
        out.append(
            BoxStats(
                axis=axis,
                value=value,
                count=values.size,
                minimum=float(lo),
                q1=float(q1),
                median=float(med),
                q3=float(q3),
                maximum=float(hi),
            )
        )
    return out


def write_box_stats(stats, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["axis", "value", "count", "min", "q1", "median", "q3", "max"])
        for s in stats:
            writer.writerow(
                [s.axis, s.value, s.count]
                + [repr(v) for v in (s.minimum, s.q1, s.median, s.q3, s.maximum)]
            )


# ---------------------------------------------------------------------------
# look-back sweep
# ---------------------------------------------------------------------------


def sweep_past_sizes(
    base: TrainSettings,
    sizes,
    train_frame: SensorFrame,
    val_frame: SensorFrame,
) -> tuple[list[MemberScore], list[Member]]:
    """Train one model per look-back size with shared hyperparameters.

    Returns the validation scores (ready for the ensemble weighters)
    and the trained members themselves.
    """
    sizes = tuple(sizes)
    if not sizes:
        raise ConfigError("no look-back sizes to sweep")
    if len(set(sizes)) != len(sizes):
        raise ConfigError("look-back sizes must not repeat")
    scores, members = [], []
    for size in sizes:
        settings = replace(base, past_size=int(size))
        forecaster, window, _, result = _train_one(settings, train_frame, val_frame)
        member_id = f"I{size}"
        scores.append(MemberScore(member_id, int(size), result.val_mae))
        members.append(Member(member_id, forecaster, window))
    return scores, members
