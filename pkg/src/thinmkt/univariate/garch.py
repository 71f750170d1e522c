"""ARMA mean with GARCH(1,1) errors ("ag").

Estimation is two-step: the ARMA mean by CSS with orders picked by AICc,
then Gaussian quasi-maximum likelihood for the GARCH recursion on the ARMA
residuals, searched by Nelder-Mead with the stationarity bound enforced by
a penalty.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from ..core import BLOCKS_PER_DAY, ModelForecast, PriceSeries, days_for_years
from ..errors import FitError, WindowError
from . import arma
from ._optim import PENALTY, simplex_minimize
from ._profile import block_phase, block_profile

AG_DAYS = days_for_years(3.5)
PERSISTENCE_CAP = 0.999
# 95% point of chi-square(2): below this the ARCH terms are not identified
LR_CRITICAL = 5.991


@njit(cache=True)
def garch_variance(e, omega, alpha, beta, h0):
    n = e.size
    h = np.empty(n)
    prev_h = h0
    prev_e2 = h0
    for t in range(n):
        h[t] = omega + alpha * prev_e2 + beta * prev_h
        prev_h = h[t]
        prev_e2 = e[t] * e[t]
    return h


@njit(cache=True)
def _negloglik(e, omega, alpha, beta, h0):
    h = garch_variance(e, omega, alpha, beta, h0)
    s = 0.0
    for t in range(e.size):
        if h[t] <= 0.0:
            return np.inf
        s += np.log(h[t]) + e[t] * e[t] / h[t]
    return 0.5 * (s + e.size * np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GarchFit:
    omega: float
    alpha: float
    beta: float
    h: np.ndarray
    h0: float
    loglik: float

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta


def estimate_garch(e) -> GarchFit:
    """Gaussian QML for GARCH(1,1) on a zero-mean residual series.

    When a likelihood-ratio test cannot reject constant variance at 5% the
    homoskedastic member (alpha = beta = 0) is returned.
    """
    e = np.ascontiguousarray(e, dtype=float)
    var = float(e.var())
    if not np.isfinite(var) or var <= 1e-300:
        raise FitError("degenerate residual variance")
    # rescale so the optimizer works near unit variance
    z = e / np.sqrt(var)

    def objective(x):
        omega, alpha, beta = x
        if omega <= 0 or alpha < 0 or beta < 0:
            return PENALTY
        excess = alpha + beta - PERSISTENCE_CAP
        f = _negloglik(z, omega, alpha, beta, 1.0)
        if not np.isfinite(f):
            return PENALTY
        if excess > 0:
            f += 1e6 * (1.0 + excess)
        return f

    starts = [np.array([0.9, 0.05, 0.05]), np.array([0.1, 0.1, 0.8])]
    best = None
    for x0 in starts:
        x, f = simplex_minimize(objective, x0)
        if f < PENALTY and (best is None or f < best[1] - 1e-9):
            best = (x, f)
    if best is None:
        raise FitError("GARCH likelihood non-finite at every start")
    omega, alpha, beta = best[0]
    f_const = objective(np.array([1.0, 0.0, 0.0]))
    if 2.0 * (f_const - best[1]) < LR_CRITICAL:
        # no detectable conditional heteroskedasticity: beta is unidentified
        # along the alpha = 0 ridge, so report the constant-variance member
        omega, alpha, beta = 1.0, 0.0, 0.0
        best = (np.array([1.0, 0.0, 0.0]), f_const)
    if alpha + beta >= 1.0:
        raise FitError("GARCH fit is not covariance stationary")
    omega *= var
    h = garch_variance(e, omega, alpha, beta, var)
    if not np.all(h > 0):
        raise FitError("non-positive conditional variance")
    return GarchFit(float(omega), float(alpha), float(beta), h, var, -best[1])


@dataclass(frozen=True)
class AgModel:
    p: int
    q: int
    phi: np.ndarray
    theta: np.ndarray
    mu: float
    omega: float
    alpha: float
    beta: float
    h: np.ndarray = field(default_factory=lambda: np.ones(1), compare=False)
    profile: Optional[np.ndarray] = None
    name: str = "ag"

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float).reshape(-1))
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float).reshape(-1))
        if not self.omega > 0 or self.alpha < 0 or self.beta < 0:
            raise ValueError("GARCH parameters must satisfy omega>0, alpha>=0, beta>=0")
        if not self.alpha + self.beta < 1:
            raise ValueError("alpha + beta must be < 1")
        if not np.all(np.asarray(self.h) > 0):
            raise ValueError("conditional variances must be positive")

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)


def fit_arma_garch(train: PriceSeries, strict: bool = True, deseasonalize: bool = True,
                   max_order: int = 2, name: str = "ag") -> AgModel:
    """Fit the ``ag`` model (3.5-year window when ``strict``)."""
    if train.has_missing():
        raise FitError("training window contains missing prices")
    if strict and len(train) < AG_DAYS * BLOCKS_PER_DAY:
        raise WindowError(f"ag needs {AG_DAYS * BLOCKS_PER_DAY} blocks, window has {len(train)}")
    x = train.values.astype(float)
    profile = None
    if deseasonalize:
        profile = block_profile(x, train.start.block)
        x = x - profile[block_phase(train.start.block, x.size)]
    return _fit_arrays(x, profile, max_order, name)


def estimate_arma_garch(x, max_order: int = 2, name: str = "ag") -> AgModel:
    return _fit_arrays(np.asarray(x, dtype=float), None, max_order, name)


def _fit_arrays(x, profile, max_order, name):
    mu = float(x.mean())
    xc = x - mu
    if float(np.std(xc)) <= 1e-12 * max(1.0, abs(mu)):
        raise FitError("degenerate (constant) series")
    orders = [(p, q) for p in range(max_order + 1) for q in range(max_order + 1)]
    fits = [arma.fit_arma(xc, p, q) for p, q in orders]
    best = arma.best_by_aicc(fits)
    e = arma.residuals(xc, best.phi, best.theta)[best.p:]
    g = estimate_garch(e)
    return AgModel(best.p, best.q, best.phi, best.theta, mu, g.omega, g.alpha, g.beta,
                   g.h, profile, name)


def variance_forecast(model: AgModel, last_h: float, last_e: float, horizon: int) -> np.ndarray:
    """h_{T+1} from the last state, then h_{T+k} = omega + (alpha+beta) h_{T+k-1}."""
    out = np.empty(horizon)
    h = model.omega + model.alpha * last_e ** 2 + model.beta * last_h
    for k in range(horizon):
        out[k] = h
        h = model.omega + (model.alpha + model.beta) * h
    return out


def forecast_arma_garch(model: AgModel, history: PriceSeries,
                        horizon: int = BLOCKS_PER_DAY) -> ModelForecast:
    n = len(history)
    if n <= max(model.p, model.q):
        raise WindowError("insufficient history for the ARMA recursion")
    if history.has_missing():
        raise FitError("history contains missing prices")
    phase = block_phase(history.start.block, n + horizon)
    season = model.profile[phase] if model.profile is not None else np.zeros(n + horizon)
    xc = history.values - season[:n] - model.mu
    mean = arma.forecast_arma(xc, model.phi, model.theta, horizon)
    e = arma.residuals(xc, model.phi, model.theta)
    h_hist = garch_variance(e[model.p:], model.omega, model.alpha, model.beta,
                            model.unconditional_variance)
    var = variance_forecast(model, float(h_hist[-1]) if h_hist.size else
                            model.unconditional_variance, float(e[-1]), horizon)
    values = np.maximum(mean + model.mu + season[n:], 0.0)
    return ModelForecast(model.name, history.end.advance(1).date, values, variance=var)


def simulate_garch(n: int, omega: float, alpha: float, beta: float,
                   rng: np.random.Generator, burn: int = 1000) -> np.ndarray:
    z = rng.standard_normal(n + burn)
    e = np.empty(n + burn)
    h = omega / (1 - alpha - beta)
    prev = 0.0
    for t in range(n + burn):
        h = omega + alpha * prev ** 2 + beta * h
        e[t] = np.sqrt(h) * z[t]
        prev = e[t]
    return e[burn:]
