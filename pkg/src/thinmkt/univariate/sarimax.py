"""Regression on the demand-supply gap with seasonal ARMA errors.

Orders are fixed at (1,0,1)x(1,0,0) with period 96. Price on day d is
paired with the driver row published on d-1 at the same block, which is
the exchange's gap for that previous day.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np
from scipy.optimize import least_squares

from ..core import BLOCKS_PER_DAY, DriverMatrix, ModelForecast, PriceSeries, day_end, day_start
from ..errors import DataError, FitError, WindowError
from . import arma
from ._optim import roots_outside_unit_circle

SEASON = BLOCKS_PER_DAY


def _polys(phi, theta, sphi):
    ar_lags = np.array([1, SEASON, SEASON + 1], dtype=np.int64)
    ar_coefs = np.array([phi, sphi, -phi * sphi])
    ma_lags = np.array([1], dtype=np.int64)
    ma_coefs = np.array([theta])
    return ar_lags, ar_coefs, ma_lags, ma_coefs


@dataclass(frozen=True)
class SarimaxModel:
    intercept: float
    beta_x: float
    phi: float
    theta: float
    seasonal_phi: float
    sigma2: float
    exog_dropped: bool = False


def _fit_errors(r):
    start = SEASON + 1

    def resid(x):
        phi, theta, sphi = x
        return arma.arma_residuals(r, *_polys(phi, theta, sphi), start)[start:]

    res = least_squares(resid, np.array([0.3, 0.0, 0.3]), method="lm", xtol=1e-10, ftol=1e-10)
    phi, theta, sphi = res.x
    ok = (abs(phi) < 1 and abs(sphi) < 1 and roots_outside_unit_circle([theta], 1.0))
    if not ok:
        # fall back to a bounded search inside the admissible box
        res = least_squares(resid, np.zeros(3), bounds=([-0.99] * 3, [0.99] * 3))
        phi, theta, sphi = res.x
    e = resid(res.x)
    return float(phi), float(theta), float(sphi), float(np.mean(e ** 2))


def fit_sarimax(prices: np.ndarray, exog: np.ndarray) -> SarimaxModel:
    """Fit on aligned arrays (``exog[t]`` is the regressor for ``prices[t]``)."""
    y = np.asarray(prices, dtype=float)
    x = np.asarray(exog, dtype=float)
    if y.shape != x.shape:
        raise DataError("exogenous regressor is misaligned with prices")
    if y.size < 3 * SEASON:
        raise FitError("SARIMAX needs at least three days of prices")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite exogenous value")
    dropped = float(np.std(x)) <= 1e-12 * max(1.0, float(np.abs(x).max()))
    if dropped:
        intercept, beta = float(y.mean()), 0.0
    else:
        X = np.column_stack([np.ones_like(x), x])
        coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        if rank < 2:
            raise FitError("singular regression on the exogenous column")
        intercept, beta = float(coef[0]), float(coef[1])
    r = y - intercept - beta * x
    phi, theta, sphi, s2 = _fit_errors(np.ascontiguousarray(r))
    return SarimaxModel(intercept, beta, phi, theta, sphi, s2, dropped)


def forecast_sarimax(model: SarimaxModel, prices: np.ndarray, exog: np.ndarray,
                     exog_future: np.ndarray) -> np.ndarray:
    y = np.asarray(prices, dtype=float)
    r = np.ascontiguousarray(y - model.intercept - model.beta_x * np.asarray(exog, dtype=float))
    polys = _polys(model.phi, model.theta, model.seasonal_phi)
    start = SEASON + 1
    e = arma.arma_residuals(r, *polys, start)
    r_future = arma.arma_extend(r, e, *polys, len(exog_future))
    return model.intercept + model.beta_x * np.asarray(exog_future, dtype=float) + r_future


def fit_forecast_sarimax(train: PriceSeries, exog: DriverMatrix, column: str = "ds_gap",
                         name: str = "SARIMAX") -> ModelForecast:
    """Fit on ``train`` and forecast the following day.

    ``train`` must cover whole days; ``exog`` must hold ``column`` for every
    training day's previous day through the last training day, whose rows
    serve as the forecast-day regressor.
    """
    if train.has_missing():
        raise FitError("training window contains missing prices")
    if train.start.block != 1 or train.end.block != BLOCKS_PER_DAY:
        raise DataError("SARIMAX training window must cover whole days")
    first_day, last_day = train.start.date, train.end.date
    try:
        rows = exog.slice(day_start(first_day - timedelta(days=1)), day_end(last_day))
    except WindowError as exc:
        raise DataError(f"exogenous column does not cover the training window and "
                        f"forecast day: {exc}") from None
    x_all = rows.column(column)
    x_train, x_future = x_all[:len(train)], x_all[len(train):]
    if x_future.size != BLOCKS_PER_DAY:
        raise DataError("exogenous column is missing forecast-day values")
    model = fit_sarimax(train.values, x_train)
    values = forecast_sarimax(model, train.values, x_train, x_future)
    target: date = last_day + timedelta(days=1)
    return ModelForecast(name, target, np.maximum(values, 0.0))
