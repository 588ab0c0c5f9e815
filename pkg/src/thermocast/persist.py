"""Versioned JSON persistence for trained forecasters.

Every model file is an envelope

    {"format": "thermocast-model", "version": 1, "kind": ..., "payload": ...}

with kind one of mlp | ets | arima | ensemble.  Floats are written with
their shortest round-tripping representation, so loading reproduces the
training-time parameters to the last bit, and the writer emits sorted
keys with fixed indentation, so re-saving an unchanged model reproduces
the file byte for byte.  Perceptron payloads carry the window shape and
normalization statistics they were trained with; ensembles embed their
members whole.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .baselines import ArimaModel, EtsModel
from .ensemble import Ensemble, EnsembleSpec, Member
from .exceptions import ConfigError
from .mlp import Mlp, MlpConfig, MlpForecaster, TrainReport
from .preprocess import NormStats, WindowSpec

FORMAT = "thermocast-model"
VERSION = 1
KINDS = ("mlp", "ets", "arima", "ensemble")


def save_model(path, kind: str, payload: dict) -> None:
    if kind not in KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; use one of {KINDS}")
    doc = {"format": FORMAT, "version": VERSION, "kind": kind, "payload": payload}
    with open(path, "w") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_model(path) -> tuple[str, dict]:
    with open(path) as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ConfigError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise ConfigError(f"{path}: unsupported format version {doc.get('version')!r}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"{path}: unknown model kind {kind!r}")
    return kind, doc["payload"]


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------


def encode_window(spec: WindowSpec) -> dict:
    past = spec.covariate_past
    return {
        "past_size": spec.past_size,
        "covariates": list(spec.covariates),
        "covariate_past": past if isinstance(past, int) else dict(past),
        "hour_blocks": spec.hour_blocks,
        "future_window": spec.future_window,
        "normalize_deltas": spec.normalize_deltas,
    }


def decode_window(data: dict) -> WindowSpec:
    past = data["covariate_past"]
    return WindowSpec(
        past_size=int(data["past_size"]),
        covariates=tuple(data["covariates"]),
        covariate_past=past if isinstance(past, int) else {k: int(v) for k, v in past.items()},
        hour_blocks=int(data["hour_blocks"]),
        future_window=int(data["future_window"]),
        normalize_deltas=bool(data["normalize_deltas"]),
    )


def encode_stats(stats: NormStats) -> dict:
    return {"means": dict(stats.means), "stds": dict(stats.stds)}


def decode_stats(data: dict) -> NormStats:
    return NormStats(means=dict(data["means"]), stds=dict(data["stds"]))


# ---------------------------------------------------------------------------
# perceptrons
# ---------------------------------------------------------------------------


@dataclass
class MlpBundle:
    """A revived perceptron with everything needed to use it on new data."""

    net: Mlp
    config: MlpConfig
    window: WindowSpec | None = None
    stats: NormStats | None = None
    report: TrainReport | None = None

    def forecaster(self) -> MlpForecaster:
        fc = MlpForecaster(
            hidden=self.config.hidden,
            activation=self.config.activations,
            learning_rate=self.config.learning_rate,
            momentum=self.config.momentum,
            weight_decay=self.config.weight_decay,
            epochs=self.config.epochs,
            patience=self.config.patience,
            seed=self.config.seed,
        )
        fc.net_ = self.net
        fc.config_ = self.config
        fc.report_ = self.report if self.report is not None else TrainReport()
        return fc


def encode_mlp(
    net: Mlp,
    config: MlpConfig,
    window: WindowSpec | None = None,
    stats: NormStats | None = None,
    report: TrainReport | None = None,
) -> dict:
    payload = {
        "config": {
            "n_inputs": config.n_inputs,
            "hidden": list(config.hidden),
            "n_outputs": config.n_outputs,
            "activations": list(config.activations),
            "learning_rate": config.learning_rate,
            "momentum": config.momentum,
            "weight_decay": config.weight_decay,
            "epochs": config.epochs,
            "patience": config.patience,
            "seed": config.seed,
        },
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "window": None if window is None else encode_window(window),
        "stats": None if stats is None else encode_stats(stats),
        "report": None
        if report is None
        else {
            "train_loss": [float(v) for v in report.train_loss],
            "val_mae": [float(v) for v in report.val_mae],
            "best_epoch": report.best_epoch,
            "stopping_reason": report.stopping_reason,
        },
    }
    return payload


def decode_mlp(payload: dict) -> MlpBundle:
    c = payload["config"]
    config = MlpConfig(
        n_inputs=int(c["n_inputs"]),
        hidden=tuple(int(h) for h in c["hidden"]),
        n_outputs=int(c["n_outputs"]),
        activations=tuple(c["activations"]),
        learning_rate=float(c["learning_rate"]),
        momentum=float(c["momentum"]),
        weight_decay=float(c["weight_decay"]),
        epochs=int(c["epochs"]),
        patience=int(c["patience"]),
        seed=int(c["seed"]),
    )
    weights = [np.asarray(w, dtype=float) for w in payload["weights"]]
    biases = [np.asarray(b, dtype=float) for b in payload["biases"]]
    sizes = config.layer_sizes
    expected = [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]
    if [w.shape for w in weights] != expected:
        raise ConfigError(
            f"stored weights {[w.shape for w in weights]} do not match the "
            f"declared layer sizes {sizes}"
        )
    if [b.shape for b in biases] != [(s,) for s in sizes[1:]]:
        raise ConfigError("stored biases do not match the declared layer sizes")
    net = Mlp(weights, biases, config.activations)
    r = payload.get("report")
    report = None
    if r is not None:
        report = TrainReport(
            train_loss=[float(v) for v in r["train_loss"]],
            val_mae=[float(v) for v in r["val_mae"]],
            best_epoch=int(r["best_epoch"]),
            stopping_reason=str(r["stopping_reason"]),
        )
    window = payload.get("window")
    stats = payload.get("stats")
    return MlpBundle(
        net=net,
        config=config,
        window=None if window is None else decode_window(window),
        stats=None if stats is None else decode_stats(stats),
        report=report,
    )


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------


def encode_ets(model: EtsModel) -> dict:
    return {
        "error": model.error,
        "trend": model.trend,
        "alpha": model.alpha,
        "beta": model.beta,
        "phi": model.phi,
        "l0": model.l0,
        "b0": model.b0,
        "level": model.level,
        "slope": model.slope,
        "aic": model.aic,
        "mse": model.mse,
    }


def decode_ets(payload: dict) -> EtsModel:
    return EtsModel(
        error=str(payload["error"]),
        trend=str(payload["trend"]),
        alpha=float(payload["alpha"]),
        beta=float(payload["beta"]),
        phi=float(payload["phi"]),
        l0=float(payload["l0"]),
        b0=float(payload["b0"]),
        level=float(payload["level"]),
        slope=float(payload["slope"]),
        aic=float(payload["aic"]),
        mse=float(payload["mse"]),
    )


def encode_arima(model: ArimaModel) -> dict:
    return {
        "exog": model.exog,
        "const": model.const,
        "phi1": model.phi1,
        "phi2": model.phi2,
        "hour_coef": list(model.hour_coef),
        "quad_coef": list(model.quad_coef),
        "sigma2": model.sigma2,
        "dropped_hours": list(model.dropped_hours),
        "stationary": model.stationary,
    }


def decode_arima(payload: dict) -> ArimaModel:
    return ArimaModel(
        exog=str(payload["exog"]),
        const=float(payload["const"]),
        phi1=float(payload["phi1"]),
        phi2=float(payload["phi2"]),
        hour_coef=tuple(float(v) for v in payload["hour_coef"]),
        quad_coef=tuple(float(v) for v in payload["quad_coef"]),
        sigma2=float(payload["sigma2"]),
        dropped_hours=tuple(int(v) for v in payload["dropped_hours"]),
        stationary=bool(payload["stationary"]),
    )


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


def encode_ensemble(ensemble: Ensemble, stats: NormStats | None = None) -> dict:
    members = []
    for member in ensemble.members:
        fc = member.forecaster
        if not hasattr(fc, "net_") or not hasattr(fc, "config_"):
            raise ConfigError(
                f"member {member.member_id!r} is not a trained perceptron and "
                "cannot be persisted"
            )
        members.append(
            {
                "member_id": member.member_id,
                "mlp": encode_mlp(
                    fc.net_, fc.config_, member.window, None, getattr(fc, "report_", None)
                ),
            }
        )
    spec = ensemble.spec
    return {
        "strategy": spec.strategy,
        "member_ids": list(spec.member_ids),
        "weights": list(spec.weights),
        "scores": list(spec.scores),
        "members": members,
        "stats": None if stats is None else encode_stats(stats),
    }


def decode_ensemble(payload: dict) -> tuple[Ensemble, NormStats | None]:
    spec = EnsembleSpec(
        strategy=str(payload["strategy"]),
        member_ids=tuple(payload["member_ids"]),
        weights=tuple(float(w) for w in payload["weights"]),
        scores=tuple(float(s) for s in payload["scores"]),
    )
    members = []
    for entry in payload["members"]:
        bundle = decode_mlp(entry["mlp"])
        if bundle.window is None:
            raise ConfigError(
                f"ensemble member {entry['member_id']!r} lacks its window shape"
            )
        members.append(
            Member(
                member_id=str(entry["member_id"]),
                forecaster=bundle.forecaster(),
                window=bundle.window,
            )
        )
    stats = payload.get("stats")
    return Ensemble(spec, members), None if stats is None else decode_stats(stats)
