"""Feature recipes for the machine-learning models.

Every sample is one (day, block) target. Lags are the prices at the same
block on the three previous days. Driver information for delivery day ``d``
is read from the rows published on ``d - 1``.

recipes
  nods  lagged prices only
  ds    lags + previous-day demand-supply gap + block effect (sin/cos pair)
  pca   lags + every column of the supplied factor matrix
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional, Sequence

import numpy as np

from ..core import BLOCKS_PER_DAY, DriverMatrix, PriceSeries, day_end, day_start
from ..errors import DataError, WindowError

RECIPES = ("nods", "ds", "pca")
_BLOCKS = np.arange(1, BLOCKS_PER_DAY + 1)


def block_effect(block) -> tuple:
    angle = 2 * np.pi * np.asarray(block, dtype=float) / BLOCKS_PER_DAY
    return np.sin(angle), np.cos(angle)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Standardized features and targets plus the statistics to reproduce them."""

    rows: np.ndarray
    targets: np.ndarray
    feature_names: tuple
    means: np.ndarray
    sds: np.ndarray
    target_mean: float = 0.0
    target_sd: float = 1.0
    dropped: tuple = ()
    days: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.rows.shape[0] != self.targets.shape[0]:
            raise DataError("rows and targets differ in length")
        if not np.all(np.isfinite(self.rows)):
            raise DataError("non-finite feature value")

    def __len__(self):
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    @property
    def scaled_targets(self) -> np.ndarray:
        return (self.targets - self.target_mean) / self.target_sd

    def transform(self, raw: np.ndarray, names: Sequence[str]) -> np.ndarray:
        """Standardize raw feature rows built by :func:`raw_features`."""
        idx = [list(names).index(n) for n in self.feature_names]
        return (np.asarray(raw, dtype=float)[:, idx] - self.means) / self.sds

    def unscale(self, y_scaled: np.ndarray) -> np.ndarray:
        return np.asarray(y_scaled) * self.target_sd + self.target_mean


def raw_features(series: PriceSeries, days: Sequence[date], recipe: str = "nods",
                 extras: Optional[DriverMatrix] = None, lags: int = 3,
                 block_effects: Optional[bool] = None, day_effect: bool = False,
                 holidays: frozenset = frozenset()):
    """Unstandardized features and targets for every block of ``days``.

    Targets are NaN where ``series`` has no price (e.g. the day being
    forecast). Returns ``(X, y, names)``.
    """
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; expected one of {RECIPES}")
    if block_effects is None:
        block_effects = recipe == "ds"
    names = [f"lag{k}" for k in range(1, lags + 1)]
    if recipe == "ds":
        names.append("ds_gap")
    if block_effects:
        names += ["block_sin", "block_cos"]
    if recipe == "pca":
        if extras is None:
            raise DataError("recipe 'pca' needs a factor matrix")
        names += list(extras.columns)
    if day_effect:
        names.append("weekday")
        if holidays:
            names.append("holiday")

    blocks = []
    targets = []
    for d in days:
        cols = []
        for k in range(1, lags + 1):
            try:
                lagged = series.day(d - timedelta(days=k))
            except WindowError:
                raise DataError(f"missing lag-{k} prices for {d}") from None
            if np.isnan(lagged).any():
                raise DataError(f"missing lag-{k} prices for {d}")
            cols.append(lagged)
        published = None
        if recipe != "nods":
            if extras is None:
                raise DataError(f"recipe {recipe!r} needs a driver matrix")
            prev = d - timedelta(days=1)
            try:
                published = extras.slice(day_start(prev), day_end(prev))
            except WindowError:
                raise DataError(f"no driver rows published on {prev}") from None
        if recipe == "ds":
            cols.append(published.column("ds_gap"))
        if block_effects:
            cols.extend(block_effect(_BLOCKS))
        if recipe == "pca":
            cols.extend(published.values.T)
        if day_effect:
            cols.append(np.full(BLOCKS_PER_DAY, float(d.weekday())))
            if holidays:
                cols.append(np.full(BLOCKS_PER_DAY, float(d in holidays)))
        blocks.append(np.column_stack(cols))
        try:
            targets.append(series.day(d))
        except WindowError:
            targets.append(np.full(BLOCKS_PER_DAY, np.nan))
    if not blocks:
        return np.zeros((0, len(names))), np.zeros(0), names
    return np.vstack(blocks), np.concatenate(targets), names


def training_days(series: PriceSeries, lags: int = 3) -> list:
    """Days of ``series`` that have ``lags`` complete previous days."""
    if series.start.block != 1 or series.end.block != BLOCKS_PER_DAY:
        raise DataError("feature building needs whole-day series")
    first = series.start.date + timedelta(days=lags)
    n = series.end.date.toordinal() - first.toordinal() + 1
    return [first + timedelta(days=i) for i in range(max(n, 0))]


def build_features(series: PriceSeries, recipe: str = "nods",
                   extras: Optional[DriverMatrix] = None, lags: int = 3,
                   block_effects: Optional[bool] = None, day_effect: bool = False,
                   holidays: frozenset = frozenset()) -> DesignMatrix:
    """Standardized training design for every usable day of ``series``.

    Zero-variance columns are dropped with a warning.
    """
    days = training_days(series, lags)
    if not days:
        raise DataError(f"series shorter than {lags + 1} days")
    X, y, names = raw_features(series, days, recipe, extras, lags, block_effects,
                               day_effect, holidays)
    if np.isnan(y).any():
        raise DataError("training targets contain missing prices")
    return standardize(X, y, names, days)


def standardize(X, y, names, days=()) -> DesignMatrix:
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    keep = sds > 1e-12 * np.maximum(1.0, np.abs(means))
    dropped = tuple(n for n, k in zip(names, keep) if not k)
    if dropped:
        warnings.warn(f"dropping zero-variance feature columns: {', '.join(dropped)}",
                      stacklevel=3)
    Z = (X[:, keep] - means[keep]) / sds[keep]
    t_mean = float(y.mean()) if y.size else 0.0
    t_sd = float(y.std()) if y.size else 1.0
    if not t_sd > 1e-12 * max(1.0, abs(t_mean)):
        t_sd = 1.0
    return DesignMatrix(Z, np.asarray(y, dtype=float), tuple(n for n, k in zip(names, keep) if k),
                        means[keep], sds[keep], t_mean, t_sd, dropped, tuple(days))
