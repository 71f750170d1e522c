"""Additive Holt-Winters smoothing with intraday (and optional weekly) seasonality.

Seasonal states are renormalized after every update so that each cycle sums
to zero; the shift is absorbed into the level, which leaves one-step fitted
values unchanged. The renormalization is tracked with a running offset so it
costs O(1) per step.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit
from scipy.optimize import minimize

from ..core import BLOCKS_PER_DAY, BlockTimestamp, ModelForecast, PriceSeries
from ..errors import FitError, NotFittedError, WindowError

WEEK = 7 * BLOCKS_PER_DAY


@njit(cache=True)
def _filter(y, ph1, ph2, m1, m2, level0, trend0, s1_0, s2_0, alpha, beta, gamma, gamma2):
    """Run the recursions; returns (sse, level, trend, s1, s2, max |cycle sum|)."""
    s1 = s1_0.copy()
    s2 = s2_0.copy()
    c1 = 0.0
    c2 = 0.0
    level = level0
    trend = trend0
    sse = 0.0
    worst = 0.0
    raw1 = s1.sum()
    raw2 = s2.sum()
    for t in range(y.size):
        j1 = ph1[t]
        a1 = s1[j1] - c1
        a2 = 0.0
        j2 = 0
        if m2 > 0:
            j2 = ph2[t]
            a2 = s2[j2] - c2
        err = y[t] - (level + trend + a1 + a2)
        sse += err * err
        new_level = alpha * (y[t] - a1 - a2) + (1.0 - alpha) * (level + trend)
        trend = beta * (new_level - level) + (1.0 - beta) * trend
        level = new_level
        v1 = gamma * (y[t] - level - a2) + (1.0 - gamma) * a1
        v2 = 0.0
        if m2 > 0:
            v2 = gamma2 * (y[t] - level - a1) + (1.0 - gamma2) * a2
        delta = v1 - a1
        raw1 += delta
        s1[j1] = v1 + c1
        c1 += delta / m1
        level += delta / m1
        worst = max(worst, abs(raw1 - m1 * c1))
        if m2 > 0:
            delta2 = v2 - a2
            raw2 += delta2
            s2[j2] = v2 + c2
            c2 += delta2 / m2
            level += delta2 / m2
            worst = max(worst, abs(raw2 - m2 * c2))
    out1 = s1 - c1
    out2 = s2 - c2
    worst = max(worst, abs(out1.sum()))
    if m2 > 0:
        worst = max(worst, abs(out2.sum()))
    return sse, level, trend, out1, out2, worst


@dataclass(frozen=True)
class HwModel:
    """Fitted additive Holt-Winters state.

    ``seasonal`` is indexed by block-of-day (0 = block 1); ``seasonal2`` by
    ``weekday * 96 + block - 1`` when weekly seasonality is enabled.
    """

    level: float
    trend: float
    seasonal: np.ndarray
    alpha: float
    beta: float
    gamma: float
    end: Optional[BlockTimestamp] = None
    seasonal2: Optional[np.ndarray] = None
    gamma2: float = 0.0
    sse: float = np.nan
    max_cycle_sum: float = 0.0
    name: str = "HW_1"


def _phases(start: BlockTimestamp, n: int):
    ords = start.ordinal + np.arange(n)
    ph1 = (ords % BLOCKS_PER_DAY).astype(np.int64)
    # weekday of the calendar day, Monday = 0
    days = ords // BLOCKS_PER_DAY
    ph2 = (((days - 1) % 7) * BLOCKS_PER_DAY + ph1).astype(np.int64)
    return ph1, ph2


def _initial_states(y, ph1, ph2, m2):
    m = BLOCKS_PER_DAY
    c1, c2 = y[:m].mean(), y[m:2 * m].mean()
    trend = (c2 - c1) / m
    centre = (m - 1) / 2.0
    s = np.zeros(m)
    for cyc, mean in ((0, c1), (1, c2)):
        seg = y[cyc * m:(cyc + 1) * m]
        s[ph1[cyc * m:(cyc + 1) * m]] += (seg - (mean + (np.arange(m) - centre) * trend)) / 2
    s -= s.mean()
    level = c1 - (centre + 1) * trend
    s2 = np.zeros(WEEK)
    if m2:
        k = min(2 * WEEK, y.size) // WEEK * WEEK
        t = np.arange(k)
        resid = y[:k] - (c1 + (t - centre) * trend) - s[ph1[:k]]
        sums = np.bincount(ph2[:k], weights=resid, minlength=WEEK)
        counts = np.bincount(ph2[:k], minlength=WEEK)
        s2 = np.divide(sums, counts, out=np.zeros(WEEK), where=counts > 0)
        s2 -= s2.mean()
    return level, trend, s, s2


def fit_holt_winters(train: PriceSeries, weekly: bool = False, name: str = "HW_1") -> HwModel:
    """Fit HW_1 by minimizing the one-step-ahead SSE over the smoothing weights.

    A coarse grid picks the start for a bounded L-BFGS-B search on [0, 1].
    """
    if train.has_missing():
        raise FitError("training window contains missing prices")
    need = 2 * (WEEK if weekly else BLOCKS_PER_DAY)
    if len(train) < need:
        raise WindowError(f"Holt-Winters needs at least {need} blocks, got {len(train)}")
    y = np.ascontiguousarray(train.values, dtype=float)
    ph1, ph2 = _phases(train.start, y.size)
    m2 = WEEK if weekly else 0
    level0, trend0, s1, s2 = _initial_states(y, ph1, ph2, m2)

    def sse(x):
        a, b, g, g2 = np.clip(x, 0.0, 1.0) if x.size == 4 else (*np.clip(x, 0.0, 1.0), 0.0)
        return _filter(y, ph1, ph2, BLOCKS_PER_DAY, m2, level0, trend0, s1, s2,
                       a, b, g, g2)[0]

    grid = [(a, b, g) for a in (0.1, 0.3, 0.6, 0.9) for b in (0.0, 0.01, 0.1)
            for g in (0.05, 0.2, 0.5)]
    if weekly:
        grid = [(*p, 0.1) for p in grid]
    start = min(grid, key=lambda p: sse(np.array(p)))
    res = minimize(sse, np.array(start), method="L-BFGS-B", bounds=[(0.0, 1.0)] * len(start))
    x = np.clip(res.x, 0.0, 1.0)
    if sse(x) > sse(np.array(start)):
        x = np.array(start)
    a, b, g = x[:3]
    g2 = x[3] if weekly else 0.0
    total, level, trend, out1, out2, worst = _filter(
        y, ph1, ph2, BLOCKS_PER_DAY, m2, level0, trend0, s1, s2, a, b, g, g2)
    scale = max(1.0, float(np.abs(y).mean()))
    if worst >= 1e-6 * BLOCKS_PER_DAY * scale:
        raise FitError(f"seasonal renormalization drifted ({worst:.3g})")
    return HwModel(level=float(level), trend=float(trend), seasonal=out1, alpha=float(a),
                   beta=float(b), gamma=float(g), end=train.end,
                   seasonal2=out2 if weekly else None, gamma2=float(g2), sse=float(total),
                   max_cycle_sum=float(worst), name=name)


def forecast_hw(model: HwModel, horizon: int = BLOCKS_PER_DAY) -> ModelForecast:
    """``level + k*trend + seasonal[block of t+k]``, floored at zero."""
    if model is None or model.end is None or not np.isfinite(model.level):
        raise NotFittedError("Holt-Winters model is not fitted")
    first = model.end.advance(1)
    ph1, ph2 = _phases(first, horizon)
    k = np.arange(1, horizon + 1)
    values = model.level + k * model.trend + model.seasonal[ph1]
    if model.seasonal2 is not None:
        values = values + model.seasonal2[ph2]
    return ModelForecast(model.name, first.date, np.maximum(values, 0.0))
