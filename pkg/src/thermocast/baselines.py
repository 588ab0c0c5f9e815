"""Classical forecasting baselines.

Two families, both fit on the training partition only:

* exponential smoothing over the error x trend grid {A,M} x {N,A,Ad}
  (no seasonal component), fitted by minimizing the in-sample one-step
  error of the model's own innovation form and compared by AIC;
* a once-differenced second-order autoregression with an optional
  hour-of-day regressor block (23 dummies against a midnight reference,
  or hour and hour-squared scalars), fit by conditional least squares.

Multi-step forecasts come from the damped/linear trend extrapolation
(exponential smoothing) or from iterating the one-step recursion and
cumulatively summing back onto the last observed level (AR).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import ConfigError, DataError, DivergenceError
from .validation import as_float_vector, check_finite

ETS_ERRORS = ("A", "M")
ETS_TRENDS = ("N", "A", "Ad")
EXOG_KINDS = ("none", "hour-factor", "hour-quad")

_FIT_START = {"alpha": 0.3, "beta": 0.1, "phi": 0.95}
_NM_OPTIONS = {"xatol": 1e-8, "fatol": 1e-8}
_PENALTY = 1e12


# ---------------------------------------------------------------------------
# exponential smoothing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EtsModel:
    """Fitted smoothing state: parameters plus the end-of-sample level
    and slope that forecasts continue from."""

    error: str
    trend: str
    alpha: float
    beta: float
    phi: float
    l0: float
    b0: float
    level: float
    slope: float
    aic: float = math.nan
    mse: float = math.nan

    def __post_init__(self) -> None:
        if self.error not in ETS_ERRORS:
            raise ConfigError(f"unknown error type {self.error!r}; use one of {ETS_ERRORS}")
        if self.trend not in ETS_TRENDS:
            raise ConfigError(f"unknown trend type {self.trend!r}; use one of {ETS_TRENDS}")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must lie in [0, 1]")
        if not 0.0 < self.phi <= 1.0:
            raise ConfigError("phi must lie in (0, 1]")

    @property
    def n_params(self) -> int:
        """Free parameters the fit optimized (smoothing + initial state)."""
        return {"N": 2, "A": 4, "Ad": 5}[self.trend]

    @property
    def name(self) -> str:
        return f"{self.error}{self.trend}N"


def _ets_filter(values, error, trend, alpha, beta, phi, l0, b0):
    """Single filtered pass.  Returns (model-error SSE, absolute-residual
    SSE, final level, final slope) or None when the parameters are
    unusable on this data (non-positive forecast under relative errors,
    numeric overflow)."""
    trended = trend != "N"
    damp = phi if trend == "Ad" else 1.0
    relative = error == "M"
    level, slope = l0, b0
    se_model = 0.0
    se_abs = 0.0
    for y in values:
        mu = level + damp * slope if trended else level
        resid = y - mu
        if relative:
            if mu <= 1e-12:
                return None
            e = resid / mu
        else:
            e = resid
        se_model += e * e
        se_abs += resid * resid
        level = mu + alpha * resid
        if trended:
            slope = damp * slope + beta * resid
    if not (math.isfinite(se_model) and math.isfinite(se_abs)):
        return None
    return se_model, se_abs, level, slope


def _unpack(trend, params):
    if trend == "N":
        alpha, l0 = params
        return float(alpha), 0.0, 1.0, float(l0), 0.0
    if trend == "A":
        alpha, beta, l0, b0 = params
        return float(alpha), float(beta), 1.0, float(l0), float(b0)
    alpha, beta, phi, l0, b0 = params
    return float(alpha), float(beta), float(phi), float(l0), float(b0)


def _box_violation(trend, alpha, beta, phi):
    """Distance outside the admissible region (0 when strictly inside)."""
    margin = 0.0
    margin += max(0.0, 1e-9 - alpha) + max(0.0, alpha - (1.0 - 1e-9))
    if trend != "N":
        margin += max(0.0, 1e-9 - beta) + max(0.0, beta - alpha + 1e-9)
    if trend == "Ad":
        margin += max(0.0, 0.8 - phi) + max(0.0, phi - (1.0 - 1e-9))
    return margin


def _clamp_into_box(trend, alpha, beta, phi):
    alpha = min(max(alpha, 1e-4), 1.0 - 1e-4)
    if trend != "N":
        beta = min(max(beta, 1e-6), alpha * (1.0 - 1e-6))
    if trend == "Ad":
        phi = min(max(phi, 0.8 + 1e-6), 1.0 - 1e-6)
    return alpha, beta, phi


def _pack(trend, alpha, beta, phi, l0, b0):
    if trend == "N":
        return [alpha, l0]
    if trend == "A":
        return [alpha, beta, l0, b0]
    return [alpha, beta, phi, l0, b0]


def fit_ets(values, error: str = "A", trend: str = "N") -> EtsModel:
    """Fit one smoothing variant by Nelder-Mead on the one-step errors.

    Relative-error variants require strictly positive data.  The
    smoothing parameters are boxed (alpha in (0,1), beta in (0,alpha),
    phi in (0.8,1)); if the optimizer settles outside the box it is
    clamped back and restarted once before giving up.
    """
    if error not in ETS_ERRORS:
        raise ConfigError(f"unknown error type {error!r}; use one of {ETS_ERRORS}")
    if trend not in ETS_TRENDS:
        raise ConfigError(f"unknown trend type {trend!r}; use one of {ETS_TRENDS}")
    arr = as_float_vector(values, "values")
    check_finite(arr, "values")
    n = arr.size
    if n < 10:
        raise DataError(f"need at least 10 observations to fit, got {n}")
    if error == "M" and arr.min() <= 0.0:
        raise DataError("relative-error smoothing needs strictly positive data")

    series = [float(v) for v in arr]

    def objective(params):
        alpha, beta, phi, l0, b0 = _unpack(trend, params)
        violation = _box_violation(trend, alpha, beta, phi)
        if violation > 0.0:
            return _PENALTY * (1.0 + violation)
        out = _ets_filter(series, error, trend, alpha, beta, phi, l0, b0)
        if out is None:
            return _PENALTY
        return out[0] / n

    start = _pack(
        trend,
        _FIT_START["alpha"],
        _FIT_START["beta"],
        _FIT_START["phi"],
        series[0],
        float(np.mean(np.diff(arr))),
    )
    result = minimize(objective, start, method="Nelder-Mead", options=_NM_OPTIONS)
    alpha, beta, phi, l0, b0 = _unpack(trend, result.x)
    if _box_violation(trend, alpha, beta, phi) > 0.0:
        alpha, beta, phi = _clamp_into_box(trend, alpha, beta, phi)
        result = minimize(
            objective,
            _pack(trend, alpha, beta, phi, l0, b0),
            method="Nelder-Mead",
            options=_NM_OPTIONS,
        )
        alpha, beta, phi, l0, b0 = _unpack(trend, result.x)
        if _box_violation(trend, alpha, beta, phi) > 0.0:
            raise DivergenceError(
                f"{error}{trend}N fit left the parameter box twice; data is "
                "unsuited to this variant"
            )

    out = _ets_filter(series, error, trend, alpha, beta, phi, l0, b0)
    if out is None:
        raise DivergenceError(f"{error}{trend}N filter failed at the fitted optimum")
    se_model, se_abs, level, slope = out
    k = {"N": 2, "A": 4, "Ad": 5}[trend]
    aic = n * math.log(max(se_abs, 1e-300) / n) + 2 * k
    return EtsModel(
        error=error,
        trend=trend,
        alpha=alpha,
        beta=beta,
        phi=phi,
        l0=l0,
        b0=b0,
        level=level,
        slope=slope,
        aic=aic,
        mse=se_model / n,
    )


def fit_ets_family(values, errors=ETS_ERRORS, trends=ETS_TRENDS) -> list[EtsModel]:
    """Fit every requested variant; relative-error variants are skipped
    (not failed) when the data touches zero."""
    arr = as_float_vector(values, "values")
    models = []
    for error in errors:
        if error == "M" and arr.min() <= 0.0:
            continue
        for trend in trends:
            models.append(fit_ets(arr, error, trend))
    if not models:
        raise DataError("no smoothing variant is applicable to this data")
    return models


def select_by_aic(models) -> EtsModel:
    """Minimal AIC; ties broken toward fewer parameters."""
    models = list(models)
    if not models:
        raise ConfigError("no candidate models to select from")
    return min(models, key=lambda m: (m.aic, m.n_params))


def _trend_sum(trend: str, phi: float, horizon: int) -> np.ndarray:
    """Per-horizon multiplier on the slope: h for a linear trend, the
    geometric partial sums of phi for a damped one, 0 with no trend."""
    steps = np.arange(1, horizon + 1, dtype=float)
    if trend == "N":
        return np.zeros(horizon)
    if trend == "A":
        return steps
    return np.cumsum(phi ** steps)


def forecast_ets(model: EtsModel, horizon: int) -> np.ndarray:
    """Point forecasts from the model's end-of-sample state."""
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    return model.level + _trend_sum(model.trend, model.phi, horizon) * model.slope


def ets_state_path(model: EtsModel, values) -> tuple[np.ndarray, np.ndarray]:
    """Re-filter a series with the fitted parameters from (l0, b0),
    returning the level and slope held after observing each point.
    One pass serves every forecast origin in a rolling evaluation."""
    arr = as_float_vector(values, "values")
    check_finite(arr, "values")
    trended = model.trend != "N"
    damp = model.phi if model.trend == "Ad" else 1.0
    level, slope = model.l0, model.b0
    levels = np.empty(arr.size)
    slopes = np.empty(arr.size)
    for t, y in enumerate(arr):
        mu = level + damp * slope if trended else level
        resid = y - mu
        level = mu + model.alpha * resid
        if trended:
            slope = damp * slope + model.beta * resid
        levels[t] = level
        slopes[t] = slope
    return levels, slopes


def rolling_forecast_ets(model: EtsModel, values, origins, horizon: int) -> np.ndarray:
    """Forecast matrix (one row per origin) from the filtered state at
    each origin index of `values`."""
    levels, slopes = ets_state_path(model, values)
    origins = np.asarray(origins, dtype=int)
    if origins.size and (origins.min() < 0 or origins.max() >= levels.size):
        raise DataError("forecast origins fall outside the series")
    mult = _trend_sum(model.trend, model.phi, horizon)
    return levels[origins, None] + mult[None, :] * slopes[origins, None]


# ---------------------------------------------------------------------------
# differenced autoregression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArimaModel:
    """AR(2) on first differences with optional hour regressors."""

    exog: str
    const: float
    phi1: float
    phi2: float
    hour_coef: tuple = ()
    quad_coef: tuple = ()
    sigma2: float = math.nan
    dropped_hours: tuple = ()
    stationary: bool = True

    def __post_init__(self) -> None:
        if self.exog not in EXOG_KINDS:
            raise ConfigError(f"unknown exog kind {self.exog!r}; use one of {EXOG_KINDS}")
        if self.exog == "hour-factor" and len(self.hour_coef) != 23:
            raise ConfigError("hour-factor models carry 23 dummy coefficients")
        if self.exog == "hour-quad" and len(self.quad_coef) != 2:
            raise ConfigError("hour-quad models carry 2 coefficients")

    def exog_term(self, hour: int) -> float:
        """Regression contribution for a predicted step at this hour."""
        if self.exog == "none":
            return 0.0
        hour = int(hour)
        if not 0 <= hour <= 23:
            raise DataError(f"hour {hour} outside 0..23")
        if self.exog == "hour-factor":
            return 0.0 if hour == 0 else self.hour_coef[hour - 1]
        return self.quad_coef[0] * hour + self.quad_coef[1] * hour * hour


def _check_hours(hours, n, name="hours"):
    arr = np.asarray(hours)
    if arr.ndim != 1 or arr.size != n:
        raise DataError(f"{name} must be one value per observation")
    if not np.all((arr >= 0) & (arr <= 23) & (arr == arr.astype(int))):
        raise DataError(f"{name} must be whole hours in 0..23")
    return arr.astype(int)


def _ar_char_roots(phi1: float, phi2: float) -> np.ndarray:
    """Roots of 1 - phi1*z - phi2*z^2."""
    if abs(phi2) < 1e-12:
        if abs(phi1) < 1e-12:
            return np.array([])
        return np.array([1.0 / phi1])
    return np.roots([-phi2, -phi1, 1.0])


def fit_arima(values, exog: str = "none", hours=None) -> ArimaModel:
    """Conditional least squares for an AR(2) on first differences.

    Each regression row predicts one delta from an intercept, the two
    preceding deltas, and (optionally) regressors built from the hour
    of the *predicted* time step.  Hour-factor levels never seen in
    training lose their dummy column (recorded on the model).  A fit
    whose AR polynomial has roots on or inside the unit circle is
    reported with a warning rather than rejected.
    """
    if exog not in EXOG_KINDS:
        raise ConfigError(f"unknown exog kind {exog!r}; use one of {EXOG_KINDS}")
    arr = as_float_vector(values, "values")
    check_finite(arr, "values")
    n = arr.size
    if n < 30:
        raise DataError(f"need at least 30 observations to fit, got {n}")
    if exog != "none":
        if hours is None:
            raise DataError(f"{exog} regression needs the hour of each observation")
        hours = _check_hours(hours, n)

    deltas = np.diff(arr)
    target = deltas[2:]
    columns = [np.ones_like(target), deltas[1:-1], deltas[:-2]]
    labels = ["const", "phi1", "phi2"]
    dropped: list[int] = []
    if exog == "hour-factor":
        predicted_hours = hours[3:]
        for level in range(1, 24):
            column = (predicted_hours == level).astype(float)
            if column.any():
                columns.append(column)
                labels.append(f"hour{level}")
            else:
                dropped.append(level)
    elif exog == "hour-quad":
        predicted_hours = hours[3:].astype(float)
        columns.append(predicted_hours)
        columns.append(predicted_hours**2)
        labels += ["hour", "hour2"]

    design = np.column_stack(columns)
    coef, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    residuals = target - design @ coef
    df = target.size - design.shape[1]
    sigma2 = float(residuals @ residuals / df) if df > 0 else 0.0

    named = dict(zip(labels, coef))
    phi1, phi2 = float(named["phi1"]), float(named["phi2"])
    roots = _ar_char_roots(phi1, phi2)
    stationary = bool(roots.size == 0 or np.min(np.abs(roots)) > 1.0)
    if not stationary:
        warnings.warn(
            "fitted AR polynomial has a root on or inside the unit circle; "
            "long-horizon forecasts may wander",
            stacklevel=2,
        )

    hour_coef = ()
    quad_coef = ()
    if exog == "hour-factor":
        hour_coef = tuple(float(named.get(f"hour{h}", 0.0)) for h in range(1, 24))
    elif exog == "hour-quad":
        quad_coef = (float(named["hour"]), float(named["hour2"]))
    return ArimaModel(
        exog=exog,
        const=float(named["const"]),
        phi1=phi1,
        phi2=phi2,
        hour_coef=hour_coef,
        quad_coef=quad_coef,
        sigma2=sigma2,
        dropped_hours=tuple(dropped),
        stationary=stationary,
    )


def forecast_arima(model: ArimaModel, history, future_hours=None, horizon: int = 12) -> np.ndarray:
    """Iterate the delta recursion `horizon` steps, feeding predictions
    back as lags, then cumulative-sum onto the last observed value."""
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    arr = as_float_vector(history, "history")
    check_finite(arr, "history")
    if arr.size < 3:
        raise DataError("history must supply at least 3 values (2 deltas)")
    if model.exog != "none":
        if future_hours is None:
            raise DataError(f"{model.exog} model needs the hour of every future step")
        future_hours = _check_hours(future_hours, horizon, "future_hours")

    prev1 = float(arr[-1] - arr[-2])
    prev2 = float(arr[-2] - arr[-3])
    deltas = np.empty(horizon)
    for h in range(horizon):
        step = model.const + model.phi1 * prev1 + model.phi2 * prev2
        if model.exog != "none":
            step += model.exog_term(future_hours[h])
        deltas[h] = step
        prev2, prev1 = prev1, step
    return float(arr[-1]) + np.cumsum(deltas)


def rolling_forecast_arima(
    model: ArimaModel, values, origins, horizon: int, hours=None
) -> np.ndarray:
    """Forecast matrix (one row per origin index into `values`);
    origins need two deltas of history, so they must be >= 2."""
    arr = as_float_vector(values, "values")
    origins = np.asarray(origins, dtype=int)
    if origins.size and origins.min() < 2:
        raise DataError("rolling origins need two deltas of history (origin >= 2)")
    if model.exog != "none":
        if hours is None:
            raise DataError(f"{model.exog} model needs the hour of each observation")
        hours = _check_hours(hours, arr.size)
    rows = np.empty((origins.size, horizon))
    for k, t in enumerate(origins):
        future = None
        if model.exog != "none":
            future = hours[t + 1 : t + 1 + horizon]
            if future.size < horizon:
                raise DataError("hours do not cover the forecast window")
        rows[k] = forecast_arima(model, arr[t - 2 : t + 1], future, horizon)
    return rows


# ---------------------------------------------------------------------------
# estimator wrappers
# ---------------------------------------------------------------------------


class EtsForecaster(BaseEstimator):
    """Thin estimator facade over fit_ets/forecast_ets."""

    def __init__(self, error: str = "A", trend: str = "N"):
        self.error = error
        self.trend = trend

    def fit(self, values, y=None):
        self.model_ = fit_ets(values, self.error, self.trend)
        return self

    def _require_fit(self) -> EtsModel:
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit first")
        return self.model_

    def predict(self, horizon: int) -> np.ndarray:
        return forecast_ets(self._require_fit(), horizon)

    def rolling(self, values, origins, horizon: int) -> np.ndarray:
        return rolling_forecast_ets(self._require_fit(), values, origins, horizon)


class ArimaForecaster(BaseEstimator):
    """Thin estimator facade over fit_arima/forecast_arima."""

    def __init__(self, exog: str = "none"):
        self.exog = exog

    def fit(self, values, hours=None, y=None):
        self.model_ = fit_arima(values, self.exog, hours)
        return self

    def _require_fit(self) -> ArimaModel:
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit first")
        return self.model_

    def predict(self, history, future_hours=None, horizon: int = 12) -> np.ndarray:
        return forecast_arima(self._require_fit(), history, future_hours, horizon)

    def rolling(self, values, origins, horizon: int, hours=None) -> np.ndarray:
        return rolling_forecast_arima(self._require_fit(), values, origins, horizon, hours)
