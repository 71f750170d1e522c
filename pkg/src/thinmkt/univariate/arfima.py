"""ARFIMA(p, d, q) estimated by conditional sum of squares over a d grid."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from ..core import BLOCKS_PER_DAY, ModelForecast, PriceSeries, days_for_years
from ..errors import FitError, WindowError
from . import arma
from ._optim import roots_outside_unit_circle
from ._profile import block_phase, block_profile

VARIANT_DAYS = {"ARFIMA1": days_for_years(3.5), "ARFIMA2": days_for_years(1.5)}
D_GRID = np.round(np.arange(-49, 50) * 0.01, 2)
ORDERS = [(p, q) for p in range(4) for q in range(4)]


def frac_weights(d: float, truncation: int) -> np.ndarray:
    """Coefficients of the (1 - B)^d expansion up to lag ``truncation``."""
    pi = np.empty(truncation + 1)
    pi[0] = 1.0
    for k in range(1, truncation + 1):
        pi[k] = pi[k - 1] * (k - 1 - d) / k
    return pi


def frac_diff(x, d: float, truncation: int) -> np.ndarray:
    """Apply the truncated fractional difference filter (1 - B)^d.

    ``y[t] = sum_{k=0}^{min(t, truncation)} pi[k] * x[t-k]``, so the start
    of the output uses only the history that exists.
    """
    x = np.asarray(x, dtype=float)
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    if not np.all(np.isfinite(x)):
        raise ValueError("frac_diff input must be finite")
    if x.size == 0:
        return x.copy()
    pi = frac_weights(d, min(truncation, x.size - 1))
    if x.size * pi.size <= 4_000_000:
        return np.convolve(x, pi)[:x.size]
    return fftconvolve(x, pi)[:x.size]


@dataclass(frozen=True)
class ArfimaModel:
    d: float
    p: int
    q: int
    phi: np.ndarray
    theta: np.ndarray
    mu: float
    sigma2: float
    truncation: int = 1000
    profile: Optional[np.ndarray] = None
    variant: str = ""
    css: float = field(default=np.nan, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float).reshape(-1))
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float).reshape(-1))
        if self.phi.size != self.p or self.theta.size != self.q:
            raise ValueError("coefficient vectors do not match (p, q)")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.truncation < 50:
            raise ValueError("truncation must be >= 50")
        if not roots_outside_unit_circle(self.phi, -1.0):
            raise ValueError("AR polynomial has a root on or inside the unit circle")
        if not roots_outside_unit_circle(self.theta, 1.0):
            raise ValueError("MA polynomial has a root on or inside the unit circle")


@dataclass(frozen=True)
class ArfimaEstimate:
    """Result of the grid search, kept for diagnostics."""

    model: ArfimaModel
    css_by_d: np.ndarray  # CSS over D_GRID for the selected (p, q)


def estimate_arfima(x, truncation: int = 1000, orders=ORDERS,
                    d_grid=D_GRID) -> ArfimaEstimate:
    """CSS estimate of a zero-mean-adjusted ARFIMA on a plain array."""
    x = np.asarray(x, dtype=float)
    if x.size < 30:
        raise FitError("series too short for ARFIMA")
    if not np.all(np.isfinite(x)):
        raise FitError("series contains non-finite values")
    mu = float(x.mean())
    xc = x - mu
    scale = float(np.std(xc))
    if scale == 0 or scale < 1e-12 * max(1.0, abs(mu)):
        raise FitError("zero-variance series; ARFIMA is undefined")
    trunc = max(50, int(truncation))

    table = {o: np.full(len(d_grid), np.inf) for o in orders}
    fits = {o: [None] * len(d_grid) for o in orders}
    warm = {}
    for i, d in enumerate(d_grid):
        w = frac_diff(xc, float(d), trunc)
        for o in orders:
            try:
                f = arma.fit_arma(w, *o, start=warm.get(o))
            except np.linalg.LinAlgError:
                continue
            table[o][i] = f.css
            fits[o][i] = f
            warm[o] = np.concatenate([f.phi, f.theta])

    best = []
    for o in orders:
        i = int(np.argmin(table[o]))
        if np.isfinite(table[o][i]):
            best.append((fits[o][i], i))
    if not best:
        raise FitError("no invertible ARMA fit at any d grid point")
    fit, i = min(best, key=lambda fi: (fi[0].aicc(extra_params=1), fi[0].p + fi[0].q, fi[0].p))
    model = ArfimaModel(d=float(d_grid[i]), p=fit.p, q=fit.q, phi=fit.phi, theta=fit.theta,
                        mu=mu, sigma2=max(fit.sigma2, np.finfo(float).tiny), truncation=trunc,
                        css=fit.css)
    return ArfimaEstimate(model, table[(fit.p, fit.q)])


def fit_arfima(train: PriceSeries, variant: str = "ARFIMA1", truncation: int = 1000,
               strict: bool = True, deseasonalize: bool = True,
               orders=ORDERS) -> ArfimaModel:
    """Fit a named ARFIMA variant on a price window.

    With ``strict`` the window must be at least the variant's training span
    (1278 days for ARFIMA1, 548 for ARFIMA2). The average intraday profile
    is removed first when ``deseasonalize`` is set and restored in forecasts.
    """
    if variant not in VARIANT_DAYS:
        raise ValueError(f"unknown ARFIMA variant {variant!r}")
    if train.has_missing():
        raise FitError("training window contains missing prices")
    need = VARIANT_DAYS[variant] * BLOCKS_PER_DAY
    if strict and len(train) < need:
        raise WindowError(f"{variant} needs {need} blocks, window has {len(train)}")
    x = train.values.astype(float)
    profile = None
    if deseasonalize:
        profile = block_profile(x, train.start.block)
        x = x - profile[block_phase(train.start.block, x.size)]
    est = estimate_arfima(x, truncation=truncation, orders=orders)
    m = est.model
    return ArfimaModel(m.d, m.p, m.q, m.phi, m.theta, m.mu, m.sigma2, m.truncation,
                       profile, variant, m.css)


def forecast_arfima(model: ArfimaModel, history: PriceSeries, horizon: int = BLOCKS_PER_DAY,
                    name: Optional[str] = None) -> ModelForecast:
    if len(history) < model.truncation:
        raise WindowError(f"history of {len(history)} blocks is shorter than the "
                          f"fractional filter ({model.truncation})")
    if history.has_missing():
        raise FitError("history contains missing prices")
    x = history.values.astype(float)
    n = x.size
    phase_all = block_phase(history.start.block, n + horizon)
    season = model.profile[phase_all] if model.profile is not None else np.zeros(n + horizon)
    xc = x - season[:n] - model.mu
    trunc = min(model.truncation, n)
    w = frac_diff(xc, model.d, trunc)
    w_future = arma.forecast_arma(w, model.phi, model.theta, horizon)

    pi = frac_weights(model.d, trunc)
    full = np.concatenate([xc, np.zeros(horizon)])
    for k in range(horizon):
        t = n + k
        lo = max(0, t - trunc)
        # x_t = w_t - sum_{j>=1} pi_j x_{t-j}
        past = full[lo:t][::-1]
        full[t] = w_future[k] - float(np.dot(pi[1:past.size + 1], past))
    values = np.maximum(full[n:] + model.mu + season[n:], 0.0)
    target = history.end.advance(1)
    return ModelForecast(name or model.variant or "ARFIMA", target.date, values)


def simulate_arfima(n: int, d: float, rng: np.random.Generator, phi=(), theta=(),
                    sigma: float = 1.0, burn: int = 2000) -> np.ndarray:
    """Draw an ARFIMA path by filtering ARMA noise through (1 - B)^-d."""
    e = rng.normal(0.0, sigma, n + burn)
    phi, theta = np.asarray(phi, float), np.asarray(theta, float)
    u = e.copy()
    for t in range(n + burn):
        acc = e[t]
        for j, th in enumerate(theta, start=1):
            if t - j >= 0:
                acc += th * e[t - j]
        for i, ph in enumerate(phi, start=1):
            if t - i >= 0:
                acc += ph * u[t - i]
        u[t] = acc
    x = frac_diff(u, -d, n + burn)
    return x[burn:]
