"""Run orchestration: a JSON config in, files under one directory out.

Each stage is a plain function from a parsed RunConfig to artifacts on
disk. Nothing here consults the clock or the machine, so rerunning a
stage from the same config reproduces every artifact byte for byte; the
manifest written alongside records sha256 hashes of the config, the
inputs and everything produced, which is what makes that claim checkable.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .baselines import (
    fit_arima,
    fit_ets_family,
    rolling_forecast_arima,
    rolling_forecast_ets,
    select_by_aic,
)
from .ensemble import STRATEGIES, Ensemble, make_spec
from .exceptions import ConfigError, DataError
from .ingest import (
    CHANNELS,
    DEFAULT_PERIOD,
    PartitionSpec,
    SensorFrame,
    build_frames,
    default_partition,
    load_csv,
    split,
    write_gap_ledger,
)
from .metrics import evaluate_forecasts, horizon_profile
from .mi import DEFAULT_BINS, build_report, write_report
from .persist import (
    decode_arima,
    decode_ensemble,
    decode_ets,
    decode_mlp,
    encode_arima,
    encode_ensemble,
    encode_ets,
    encode_mlp,
    encode_stats,
    load_model,
    save_model,
)
from .preprocess import WindowSpec, build_patterns, compute_norm_stats, invert_difference
from .search import (
    DEFAULT_SWEEP,
    GridSpec,
    TrainSettings,
    box_stats,
    encode_covariates,
    run_grid,
    sweep_past_sizes,
    write_box_stats,
)
from .synth import SynthConfig, generate, write_csv

RUN_FORMAT = "thermocast-run"
MANIFEST_FORMAT = "thermocast-manifest"
RUN_VERSION = 1

ARIMA_EXOGS = ("none", "hour-factor", "hour-quad")
SPLITS = ("train", "val", "test")
_METRIC_ORDER = ("smape", "mae", "rmse")

EVAL_HEADER = ("model", "kind", "mean", "lower", "upper", "n")
HORIZON_HEADER = ("model", "kind", "horizon", "minutes", "mean", "lower", "upper")


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class CsvSource:
    """A raw sensor CSV plus the column schema to read it with."""

    path: str
    schema: dict[str, str]
    period: int = DEFAULT_PERIOD
    max_gap: int = 5


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline stage needs, already validated."""

    out: Path
    source: SynthConfig | CsvSource
    partition: PartitionSpec
    model: TrainSettings
    sweep_sizes: tuple[int, ...] = DEFAULT_SWEEP
    strategy: str = "comb-exp"
    grid: GridSpec | None = None
    mi_bins: int = DEFAULT_BINS
    split: str = "val"
    arima_exogs: tuple[str, ...] = ARIMA_EXOGS


_MISSING = object()


def _field(data: Mapping, name: str, kind, where: str = "", default=_MISSING):
    """Typed lookup with a dotted-path diagnostic on failure."""
    label = f"{where}{name}"
    if name not in data:
        if default is _MISSING:
            raise ConfigError(f"{label} is required")
        return default
    value = data[name]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if isinstance(value, bool) and kind is not bool or not isinstance(value, kind):
        raise ConfigError(f"{label} must be a {kind.__name__}, got {type(value).__name__}")
    return value


def _reject_unknown(data: Mapping, known, where: str = "") -> None:
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown field {where}{unknown[0]}")


def _positive_int(data, name, where, default=_MISSING, minimum=1) -> int:
    value = _field(data, name, int, where, default)
    if value < minimum:
        raise ConfigError(f"{where}{name} must be >= {minimum}, got {value}")
    return value


def _positive_float(data, name, where, default=_MISSING, strict=True) -> float:
    value = _field(data, name, float, where, default)
    if value < 0.0 or (strict and value == 0.0):
        bound = ">" if strict else ">="
        raise ConfigError(f"{where}{name} must be {bound} 0, got {value!r}")
    return value


def _parse_source(data: Mapping) -> SynthConfig | CsvSource:
    _reject_unknown(data, {"synth", "csv", "schema", "period", "max_gap"}, "data.")
    if ("synth" in data) == ("csv" in data):
        raise ConfigError("data must hold exactly one of data.synth or data.csv")
    if "synth" in data:
        section = _field(data, "synth", dict, "data.")
        names = {f.name for f in dataclasses.fields(SynthConfig)}
        _reject_unknown(section, names, "data.synth.")
        return SynthConfig(**section)
    path = _field(data, "csv", str, "data.")
    schema = _field(data, "schema", dict, "data.")
    for ch, col in schema.items():
        if ch not in CHANNELS:
            raise ConfigError(f"data.schema maps unknown channel {ch!r}")
        if not isinstance(col, str):
            raise ConfigError(f"data.schema.{ch} must be a column name")
    if "d" not in schema:
        raise ConfigError("data.schema must map the target channel d")
    period = _positive_int(data, "period", "data.", default=DEFAULT_PERIOD)
    max_gap = _positive_int(data, "max_gap", "data.", default=5, minimum=0)
    return CsvSource(path, dict(schema), period, max_gap)


def _parse_partition(data, period: int) -> PartitionSpec:
    if data is None:
        return default_partition(period)
    if not isinstance(data, dict):
        raise ConfigError("partition must be an object")
    if "train" in data:  # explicit index ranges
        _reject_unknown(data, SPLITS, "partition.")
        ranges = {}
        for name in SPLITS:
            pair = _field(data, name, list, "partition.")
            if len(pair) != 2 or not all(isinstance(v, int) for v in pair):
                raise ConfigError(f"partition.{name} must be a [lo, hi] index pair")
            ranges[name] = (pair[0], pair[1])
        return PartitionSpec(ranges["train"], ranges["val"], ranges["test"])
    _reject_unknown(data, {"train_days", "val_days", "test_days"}, "partition.")
    return default_partition(
        period,
        train_days=_positive_int(data, "train_days", "partition.", default=21),
        val_days=_positive_int(data, "val_days", "partition.", default=7),
        test_days=_positive_int(data, "test_days", "partition.", default=7),
    )


def _parse_covariates(raw, where: str) -> tuple[str, ...]:
    if not isinstance(raw, list) or not all(isinstance(c, str) for c in raw):
        raise ConfigError(f"{where} must be a list of channel names")
    return tuple(raw)


def _parse_model(data: Mapping, where: str = "model.") -> TrainSettings:
    names = {f.name for f in dataclasses.fields(TrainSettings)}
    _reject_unknown(data, names, where)
    kwargs = {}
    if "covariates" in data:
        kwargs["covariates"] = _parse_covariates(data["covariates"], where + "covariates")
    if "layout" in data:
        kwargs["layout"] = _field(data, "layout", str, where)
    for name in ("eta", "mu", "epsilon"):
        if name in data:
            kwargs[name] = _positive_float(data, name, where, strict=(name == "eta"))
    for name, minimum in (
        ("past_size", 1),
        ("covariate_past", 1),
        ("hour_blocks", 1),
        ("future_window", 1),
        ("epochs", 1),
        ("patience", 0),
        ("seed", 0),
    ):
        if name in data:
            kwargs[name] = _positive_int(data, name, where, minimum=minimum)
    return TrainSettings(**kwargs)


def _parse_grid(data: Mapping) -> GridSpec:
    names = {f.name for f in dataclasses.fields(GridSpec)}
    _reject_unknown(data, names, "grid.")
    kwargs = {}
    if "covariate_sets" in data:
        raw = _field(data, "covariate_sets", list, "grid.")
        kwargs["covariate_sets"] = tuple(
            _parse_covariates(entry, "grid.covariate_sets entries") for entry in raw
        )
    for name in ("layouts", "etas", "mus", "epsilons", "seeds", "sweep_sizes"):
        if name in data:
            kwargs[name] = tuple(_field(data, name, list, "grid."))
    for name, minimum in (
        ("past_size", 1),
        ("covariate_past", 1),
        ("hour_blocks", 1),
        ("future_window", 1),
        ("epochs", 1),
        ("patience", 0),
    ):
        if name in data:
            kwargs[name] = _positive_int(data, name, "grid.", minimum=minimum)
    return GridSpec(**kwargs)


def parse_run_config(path) -> RunConfig:
    """Load and validate a run config file; diagnostics name the field."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"run config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("run config must be a JSON object")
    if data.get("format") != RUN_FORMAT:
        raise ConfigError(f'format must be "{RUN_FORMAT}"')
    if data.get("version") != RUN_VERSION:
        raise ConfigError(f"version must be {RUN_VERSION}")
    _reject_unknown(
        data,
        {
            "format",
            "version",
            "out",
            "data",
            "partition",
            "model",
            "sweep",
            "ensemble",
            "grid",
            "mi_bins",
            "split",
            "arima",
        },
    )
    source = _parse_source(_field(data, "data", dict))
    period = source.period if isinstance(source, CsvSource) else DEFAULT_PERIOD

    sweep = data.get("sweep", list(DEFAULT_SWEEP))
    if not isinstance(sweep, list) or not all(
        isinstance(s, int) and not isinstance(s, bool) and s >= 1 for s in sweep
    ):
        raise ConfigError("sweep must be a list of past sizes (integers >= 1)")

    strategy = _field(data, "ensemble", str, default="comb-exp")
    if strategy not in STRATEGIES:
        raise ConfigError(f"ensemble must be one of {STRATEGIES}, got {strategy!r}")

    split_name = _field(data, "split", str, default="val")
    if split_name not in SPLITS:
        raise ConfigError(f"split must be one of {SPLITS}, got {split_name!r}")

    arima_exogs = data.get("arima", list(ARIMA_EXOGS))
    if not isinstance(arima_exogs, list) or any(e not in ARIMA_EXOGS for e in arima_exogs):
        raise ConfigError(f"arima must list variants from {ARIMA_EXOGS}")

    return RunConfig(
        out=Path(_field(data, "out", str)),
        source=source,
        partition=_parse_partition(data.get("partition"), period),
        model=_parse_model(_field(data, "model", dict, default={})),
        sweep_sizes=tuple(sweep),
        strategy=strategy,
        grid=_parse_grid(_field(data, "grid", dict)) if "grid" in data else None,
        mi_bins=_positive_int(data, "mi_bins", "", default=DEFAULT_BINS, minimum=2),
        split=split_name,
        arima_exogs=tuple(arima_exogs),
    )


def apply_seed(run: RunConfig, seed: int) -> RunConfig:
    """Route one override seed into every seeded corner of the config."""
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")
    run = replace(run, model=replace(run.model, seed=seed))
    if isinstance(run.source, SynthConfig):
        run = replace(run, source=replace(run.source, seed=seed))
    if run.grid is not None:
        run = replace(run, grid=replace(run.grid, seeds=(seed,)))
    return run


# ---------------------------------------------------------------------------
# shared plumbing


def _load_series(run: RunConfig):
    if isinstance(run.source, SynthConfig):
        return generate(run.source)
    series, _ = load_csv(run.source.path, run.source.schema)
    return series


def build_run_frames(run: RunConfig):
    """All contiguous resampled frames the configured source yields."""
    series = _load_series(run)
    if isinstance(run.source, CsvSource):
        return build_frames(series.values(), run.source.period, run.source.max_gap)
    return build_frames(series.values())


def main_frame(run: RunConfig) -> SensorFrame:
    """The longest contiguous frame; modeling stages run on this one."""
    frames, _ = build_run_frames(run)
    return max(frames, key=len)


def _partitions(run: RunConfig):
    frame = main_frame(run)
    return frame, split(frame, run.partition)


def _ensure_out(run: RunConfig) -> Path:
    run.out.mkdir(parents=True, exist_ok=True)
    return run.out


def _cell(value) -> str:
    if isinstance(value, float):  # includes numpy doubles; repr of the plain float is stable
        return repr(float(value))
    return str(value)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _metric_rows(model_id: str, preds, targets, origins=None):
    results = evaluate_forecasts(preds, targets, origins)
    for kind in _METRIC_ORDER:
        agg = results[kind]
        yield (model_id, kind, agg.mean, agg.lower, agg.upper, agg.count)


def _horizon_rows(model_id: str, preds, targets, period: int):
    for kind in _METRIC_ORDER:
        for z, agg in enumerate(horizon_profile(preds, targets, kind), start=1):
            yield (model_id, kind, z, z * period // 60, agg.mean, agg.lower, agg.upper)


def _train_window(run: RunConfig):
    """Window, training stats and train/val pattern sets for run.model."""
    frame, parts = _partitions(run)
    window = run.model.window()
    stats = compute_norm_stats(parts["train"], window.value_covariates)
    train_set = build_patterns(parts["train"], window, stats)
    val_set = build_patterns(parts["val"], window, stats)
    return frame, parts, window, stats, train_set, val_set


# ---------------------------------------------------------------------------
# stages


def stage_synth(run: RunConfig, jobs: int = 1) -> dict[str, Path]:
    if not isinstance(run.source, SynthConfig):
        raise ConfigError("the synth command needs a data.synth section")
    out = _ensure_out(run)
    path = out / "synthetic.csv"
    write_csv(generate(run.source), path)
    return {"synthetic.csv": path}


def stage_ingest(run: RunConfig, jobs: int = 1) -> dict[str, Path]:
    frames, ledger = build_run_frames(run)
    out = _ensure_out(run)
    artifacts: dict[str, Path] = {}
    for k, frame in enumerate(frames):
        name = f"frame_{k:02d}.csv"
        frame.to_csv(out / name)
        artifacts[name] = out / name
    write_gap_ledger(ledger, out / "gaps.csv")
    artifacts["gaps.csv"] = out / "gaps.csv"
    return artifacts


def stage_preprocess(run: RunConfig, jobs: int = 1) -> dict[str, Path]:
    frame, parts = _partitions(run)
    window = run.model.window()
    stats = compute_norm_stats(parts["train"], window.value_covariates)
    out = _ensure_out(run)
    artifacts: dict[str, Path] = {}
    for name in SPLITS:
        ps = build_patterns(parts[name], window, stats)
        fname = f"patterns_{name}.csv"
        ps.to_csv(out / fname)
        artifacts[fname] = out / fname
    stats_path = out / "norm_stats.json"
    _write_json(stats_path, {"format": "thermocast-stats", "version": 1, **encode_stats(stats)})
    artifacts["norm_stats.json"] = stats_path
    return artifacts


def stage_train(run: RunConfig, jobs: int = 1) -> dict[str, Path]:
    frame, parts, window, stats, train_set, val_set = _train_window(run)
    forecaster = run.model.forecaster().fit(train_set, validation=val_set)
    out = _ensure_out(run)

    model_path = out / "model.json"
    payload = encode_mlp(
        forecaster.net_, forecaster.config_, window=window, stats=stats, report=forecaster.report_
    )
    save_model(model_path, "mlp", payload)

    report = forecaster.report_
    # on divergence the loss history can outrun the validation history by one
    history = [
        (epoch, loss, report.val_mae[epoch - 1] if epoch <= len(report.val_mae) else float("nan"))
        for epoch, loss in enumerate(report.train_loss, start=1)
    ]
    report_path = out / "train_report.csv"
    _write_rows(report_path, ("epoch", "train_loss", "val_mae"), history)

    preds = forecaster.predict_absolute(val_set)
    metrics_path = out / "val_metrics.csv"
    model_id = f"ann({encode_covariates(run.model.covariates)})"
    _write_rows(
        metrics_path,
        EVAL_HEADER,
        _metric_rows(model_id, preds, val_set.absolute_targets(), val_set.origins),
    )
    return {
        "model.json": model_path,
        "train_report.csv": report_path,
        "val_metrics.csv": metrics_path,
    }


def _sweep_members(run: RunConfig):
    frame, parts = _partitions(run)
    scores, members = sweep_past_sizes(run.model, run.sweep_sizes, parts["train"], parts["val"])
    stats = compute_norm_stats(parts["train"], run.model.window().value_covariates)
    return parts, scores, members, stats


def _write_members(out: Path, members, stats) -> dict[str, Path]:
    artifacts: dict[str, Path] = {}
    for member in members:
        name = f"member_{member.member_id}.json"
        payload = encode_mlp(
            member.forecaster.net_,
            member.forecaster.config_,
            window=member.window,
            stats=stats,
            report=member.forecaster.report_,
        )
        save_model(out / name, "mlp", payload)
        artifacts[name] = out / name
    return artifacts


def stage_sweep(run: RunConfig, jobs: int = 1) -> dict[str, Path]:
    parts, scores, members, stats = _sweep_members(run)
    out = _ensure_out(run)
    artifacts = _write_members(out, members, stats)
    scores_path = out / "sweep_scores.csv"
    _write_rows(
        scores_path,
        ("member_id", "past_size", "val_mae"),
        [(s.member_id, s.past_size, s.val_mae) for s in scores],
    )
    artifacts["sweep_scores.csv"] = scores_path
    return artifacts


def stage_ensemble(run: RunConfig, jobs: int = 1) -> dict[str, Path]:
    parts, scores, members, stats = _sweep_members(run)
    spec = make_spec(run.strategy, scores)
    by_id = {m.member_id: m for m in members}
    ensemble = Ensemble(spec, [by_id[mid] for mid in spec.member_ids])

    out = _ensure_out(run)
    artifacts = _write_members(out, ensemble.members, stats)
    payload = encode_ensemble(ensemble, stats)
    payload["member_files"] = {mid: f"member_{mid}.json" for mid in spec.member_ids}
    model_path = out / "ensemble.json"
    save_model(model_path, "ensemble", payload)
    artifacts["ensemble.json"] = model_path

    origins, preds, targets = ensemble.predict_frame(parts[run.split], stats)
    metrics_path = out / "ensemble_metrics.csv"
    _write_rows(
        metrics_path,
        EVAL_HEADER,
        _metric_rows(f"ensemble({run.strategy})", preds, targets, origins),
    )
    artifacts["ensemble_metrics.csv"] = metrics_path
    return artifacts


def _baseline_window(run: RunConfig) -> WindowSpec:
    """Origin/target geometry for the rolling baselines: the model's
    look-back and horizon, with no covariate channels to restrict it."""
    return WindowSpec(
        past_size=max(run.model.past_size, 2),  # AR(2) needs two deltas of history
        future_window=run.model.future_window,
    )


def _rolling_targets(run: RunConfig, frame: SensorFrame, parts):
    """Absolute origins into `frame`, target windows, and the history
    (values and hours) visible up to the end of the evaluated split."""
    window = _baseline_window(run)
    part = parts[run.split]
    ps = build_patterns(part, window)
    lo, hi = dict(run.partition.items())[run.split]
    origins = lo + ps.origins
    history = frame.channels["d"][:hi]
    hours = frame.hours()[:hi]
    return origins, ps.absolute_targets(), history, hours


def stage_baseline(run: RunConfig, jobs: int = 1) -> dict[str, Path]:
    frame, parts = _partitions(run)
    train_d = parts["train"].channels["d"]
    train_hours = parts["train"].hours()

    family = fit_ets_family(train_d)
    chosen = select_by_aic(family)
    arimas = [
        fit_arima(train_d, exog, hours=None if exog == "none" else train_hours)
        for exog in run.arima_exogs
    ]

    out = _ensure_out(run)
    artifacts: dict[str, Path] = {}
    _write_rows(
        out / "ets_family.csv",
        ("name", "aic", "mse", "n_params", "alpha", "beta", "phi"),
        [(m.name, m.aic, m.mse, m.n_params, m.alpha, m.beta, m.phi) for m in family],
    )
    artifacts["ets_family.csv"] = out / "ets_family.csv"
    save_model(out / "ets.json", "ets", encode_ets(chosen))
    artifacts["ets.json"] = out / "ets.json"
    for exog, model in zip(run.arima_exogs, arimas):
        name = f"arima_{exog}.json"
        save_model(out / name, "arima", encode_arima(model))
        artifacts[name] = out / name

    origins, targets, history, hours = _rolling_targets(run, frame, parts)
    horizon = run.model.future_window
    rows = list(
        _metric_rows(
            f"ets({chosen.name})",
            rolling_forecast_ets(chosen, history, origins, horizon),
            targets,
            origins,
        )
    )
    for exog, model in zip(run.arima_exogs, arimas):
        preds = rolling_forecast_arima(
            model, history, origins, horizon, hours=None if exog == "none" else hours
        )
        rows.extend(_metric_rows(f"arima({exog})", preds, targets, origins))
    _write_rows(out / "baseline_metrics.csv", EVAL_HEADER, rows)
    artifacts["baseline_metrics.csv"] = out / "baseline_metrics.csv"
    return artifacts


def _model_forecasts(run: RunConfig, frame: SensorFrame, parts, path):
    """Load one persisted model and forecast the evaluated split.

    Returns (model id, absolute predictions, absolute targets, origins).
    """
    kind, payload = load_model(path)
    part = parts[run.split]
    if kind == "mlp":
        bundle = decode_mlp(payload)
        if bundle.window is None:
            raise DataError(f"model {path} carries no window; cannot rebuild its inputs")
        ps = build_patterns(part, bundle.window, bundle.stats)
        preds = invert_difference(bundle.forecaster().predict(ps.inputs), ps.anchors)
        model_id = f"ann({encode_covariates(bundle.window.covariates)})"
        return model_id, preds, ps.absolute_targets(), ps.origins
    if kind == "ensemble":
        ensemble, stats = decode_ensemble(payload)
        origins, preds, targets = ensemble.predict_frame(part, stats)
        return f"ensemble({ensemble.spec.strategy})", preds, targets, origins
    origins, targets, history, hours = _rolling_targets(run, frame, parts)
    horizon = run.model.future_window
    if kind == "ets":
        model = decode_ets(payload)
        preds = rolling_forecast_ets(model, history, origins, horizon)
        return f"ets({model.name})", preds, targets, origins
    model = decode_arima(payload)
    preds = rolling_forecast_arima(
        model, history, origins, horizon, hours=None if model.exog == "none" else hours
    )
    return f"arima({model.exog})", preds, targets, origins


def _evaluate_models(run: RunConfig, model_paths: Sequence):
    if not model_paths:
        raise ConfigError("no model files given to evaluate")
    frame, parts = _partitions(run)
    results = [_model_forecasts(run, frame, parts, path) for path in model_paths]
    horizons = {preds.shape[1] for _, preds, _, _ in results}
    if len(horizons) > 1:
        raise DataError(f"models disagree on the forecast horizon: {sorted(horizons)}")
    return frame, results


def stage_evaluate(run: RunConfig, model_paths: Sequence, jobs: int = 1) -> dict[str, Path]:
    frame, results = _evaluate_models(run, model_paths)
    out = _ensure_out(run)
    rows = []
    horizon_rows = []
    for model_id, preds, targets, origins in results:
        rows.extend(_metric_rows(model_id, preds, targets, origins))
        horizon_rows.extend(_horizon_rows(model_id, preds, targets, frame.period))
    _write_rows(out / "evaluation.csv", EVAL_HEADER, rows)
    _write_rows(out / "horizons.csv", HORIZON_HEADER, horizon_rows)
    return {"evaluation.csv": out / "evaluation.csv", "horizons.csv": out / "horizons.csv"}


def stage_report(run: RunConfig, model_paths: Sequence, jobs: int = 1) -> dict[str, Path]:
    """Side-by-side comparison table: one row per model, in input order."""
    frame, results = _evaluate_models(run, model_paths)
    out = _ensure_out(run)
    header = ["model", "n"]
    for kind in _METRIC_ORDER:
        header += [kind, f"{kind}_lower", f"{kind}_upper"]
    rows = []
    horizon_rows = []
    for model_id, preds, targets, origins in results:
        summary = evaluate_forecasts(preds, targets, origins)
        row = [model_id, summary["mae"].count]
        for kind in _METRIC_ORDER:
            agg = summary[kind]
            row += [agg.mean, agg.lower, agg.upper]
        rows.append(row)
        horizon_rows.extend(_horizon_rows(model_id, preds, targets, frame.period))
    _write_rows(out / "report.csv", header, rows)
    _write_rows(out / "report_horizons.csv", HORIZON_HEADER, horizon_rows)
    return {
        "report.csv": out / "report.csv",
        "report_horizons.csv": out / "report_horizons.csv",
    }


def stage_mi(run: RunConfig, jobs: int = 1) -> dict[str, Path]:
    frame = main_frame(run)
    report = build_report(frame, bins=run.mi_bins)
    out = _ensure_out(run)
    write_report(report, out / "mi.csv")
    return {"mi.csv": out / "mi.csv"}


_GRID_AXES = (
    ("covariates", "covariate_sets"),
    ("layout", "layouts"),
    ("eta", "etas"),
    ("mu", "mus"),
    ("epsilon", "epsilons"),
    ("seed", "seeds"),
)


def stage_gridsearch(run: RunConfig, jobs: int = 1) -> dict[str, Path]:
    if run.grid is None:
        raise ConfigError("the gridsearch command needs a grid section")
    frame, parts = _partitions(run)
    out = _ensure_out(run)
    results_path = out / "grid_results.csv"
    results = run_grid(run.grid, parts["train"], parts["val"], results_path, jobs=jobs)
    artifacts = {"grid_results.csv": results_path}
    for axis, field_name in _GRID_AXES:
        if len(getattr(run.grid, field_name)) < 2:
            continue  # a box plot over one value says nothing
        name = f"grid_box_{axis}.csv"
        write_box_stats(box_stats(results, axis), out / name)
        artifacts[name] = out / name
    return artifacts


# ---------------------------------------------------------------------------
# dispatch and manifests

_PLAIN_STAGES = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "preprocess": stage_preprocess,
    "train": stage_train,
    "sweep": stage_sweep,
    "ensemble": stage_ensemble,
    "baseline": stage_baseline,
    "mi": stage_mi,
    "gridsearch": stage_gridsearch,
}
_MODEL_STAGES = {"evaluate": stage_evaluate, "report": stage_report}
COMMANDS = tuple(_PLAIN_STAGES) + tuple(_MODEL_STAGES)


def run_stage(
    command: str, run: RunConfig, jobs: int = 1, models: Sequence = ()
) -> dict[str, Path]:
    """Execute one named stage and return its artifacts by file name."""
    if command in _MODEL_STAGES:
        return _MODEL_STAGES[command](run, models, jobs=jobs)
    if command not in _PLAIN_STAGES:
        raise ConfigError(f"unknown command {command!r}")
    if models:
        raise ConfigError(f"the {command} command takes no model files")
    return _PLAIN_STAGES[command](run, jobs=jobs)


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    run: RunConfig,
    command: str,
    config_path,
    artifacts: Mapping[str, Path],
    models: Sequence = (),
) -> Path:
    """Record content hashes of everything one stage touched.

    The manifest holds no timestamps, so a rerun that reproduces the
    artifacts reproduces the manifest too.
    """
    inputs: dict[str, str] = {}
    if isinstance(run.source, CsvSource):
        inputs[run.source.path] = file_sha256(run.source.path)
    for path in models:
        inputs[str(path)] = file_sha256(path)
    payload = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "command": command,
        "config": {"path": str(config_path), "sha256": file_sha256(config_path)},
        "inputs": inputs,
        "artifacts": {name: file_sha256(p) for name, p in sorted(artifacts.items())},
        "tool": {"name": "thermocast", "version": __version__},
    }
    path = _ensure_out(run) / f"manifest_{command}.json"
    _write_json(path, payload)
    return path
