"""Named model variants and the adapters that fit one and forecast one day.

Every adapter receives history that ends with the last block of the day
before the target, so nothing published on the target day can leak in.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np

from .core import BLOCKS_PER_DAY, DriverMatrix, PriceSeries, day_end, day_start, days_for_years
from .errors import DataError, WindowError
from .factors import pca_fit, pca_project, variance_screen
from .kernel_ml.ann import AnnConfig, fit_ann, predict_ann
from .kernel_ml.features import raw_features, standardize
from .kernel_ml.svr import SvrConfig, fit_svr, predict_svr
from .sim import IPP_PREFIX
from .trees import fit_gbm, predict_gbm
from .univariate.arfima import fit_arfima, forecast_arfima
from .univariate.garch import fit_arma_garch, forecast_arma_garch
from .univariate.holt_winters import fit_holt_winters, forecast_hw
from .univariate.sarimax import fit_forecast_sarimax

LAGS = 3
SCREEN_DAYS = 30
FAMILIES = ("arfima", "hw", "ag", "sarimax", "ann", "svr", "gbm")
MIN_DAYS = {"arfima": 11, "hw": 3, "ag": 7, "sarimax": 7, "ann": 5, "svr": 5, "gbm": 5}


@dataclass(frozen=True)
class ModelSpec:
    name: str
    family: str
    window_days: int
    recipe: str = "price"  # price | nods | ds | pca
    model_class: str = "univariate"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.window_days < 1:
            raise ValueError("training window must be positive")
        if self.model_class not in ("univariate", "multivariate"):
            raise ValueError("model class must be univariate or multivariate")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def __reduce__(self):
        # mappingproxy does not pickle; worker processes get a plain dict copy
        return (ModelSpec, (self.name, self.family, self.window_days, self.recipe,
                            self.model_class, dict(self.params)))

    def with_params(self, **kw) -> "ModelSpec":
        window = kw.pop("window_days", self.window_days)
        return replace(self, window_days=int(window), params={**self.params, **kw})

    @property
    def lead_days(self) -> int:
        """Days of price history needed before the first training target."""
        if self.family == "sarimax":
            return 1
        return LAGS if self.recipe in ("nods", "ds", "pca") else 0


def _ann(name, days, recipe):
    cls = "univariate" if recipe == "nods" else "multivariate"
    return ModelSpec(name, "ann", days, recipe, cls, {"hidden": 10, "epochs": 500,
                                                      "learning_rate": 0.01})


def _gbm(name, trees, depth, nu, min_leaf, ds=False, ipp=False):
    return ModelSpec(name, "gbm", 30, "pca", "multivariate",
                     {"M": trees, "max_depth": depth, "nu": nu, "min_leaf": min_leaf,
                      "ds_gap": ds, "ipp": ipp, "day_effect": True})


def _svm_pca(name, days, ipp=False):
    return ModelSpec(name, "svr", days, "pca", "multivariate", {"kernel": "linear", "ipp": ipp})


def default_registry() -> dict:
    specs = [
        ModelSpec("ARFIMA1", "arfima", days_for_years(3.5), params={"variant": "ARFIMA1"}),
        ModelSpec("ARFIMA2", "arfima", days_for_years(1.5), params={"variant": "ARFIMA2"}),
        ModelSpec("HW_1", "hw", days_for_years(1.0), params={"weekly": False}),
        ModelSpec("ag", "ag", days_for_years(3.5)),
        _ann("pred_ANN_nods", 45, "nods"),
        _ann("pred_ANN_nods_15", 15, "nods"),
        _ann("pred_ANN_nods_30", 30, "nods"),
        ModelSpec("pred_SVM_nods_15", "svr", 15, "nods", "univariate", {"kernel": "radial"}),
        ModelSpec("pred_SVMl_nods_15", "svr", 15, "nods", "univariate", {"kernel": "linear"}),
        _ann("pred_ANN_ds", 45, "ds"),
        _ann("pred_ANN_ds_15", 15, "ds"),
        _ann("pred_ANN_ds_30", 30, "ds"),
        ModelSpec("pred_SVM_ds_7", "svr", 7, "ds", "multivariate", {"kernel": "radial"}),
        ModelSpec("pred_SVM_ds_15", "svr", 15, "ds", "multivariate", {"kernel": "radial"}),
        ModelSpec("SARIMAX", "sarimax", 60, "price", "multivariate", {"column": "ds_gap"}),
        _gbm("Price Model", 5000, 3, 0.05, 10),
        _gbm("Specf1", 6000, 1, 0.1, 20),
        _gbm("Specf1d", 6000, 1, 0.1, 20, ds=True),
        _gbm("Price Model_ipp", 5000, 3, 0.05, 10, ipp=True),
        _gbm("Specf1_ipp", 6000, 1, 0.1, 20, ipp=True),
        _gbm("Specf1d_ipp", 6000, 1, 0.1, 20, ds=True, ipp=True),
        _svm_pca("svm_pca_15", 15),
        _svm_pca("svm_pca_30", 30),
        _svm_pca("svm_pca_15_ipp", 15, ipp=True),
        _svm_pca("svm_pca_30_ipp", 30, ipp=True),
    ]
    return {s.name: s for s in specs}


ALIASES = {"arfim1": "ARFIMA1", "arfim2": "ARFIMA2", "specf1_ipp": "Specf1_ipp",
           "specf1d_ipp": "Specf1d_ipp", "specf1": "Specf1", "specf1d": "Specf1d",
           "SVM_pca_15": "svm_pca_15", "SVM_pca_30": "svm_pca_30",
           "SVM_pca_15_ipp": "svm_pca_15_ipp", "SVM_pca_30_ipp": "svm_pca_30_ipp"}


def resolve(name: str, registry: Optional[Mapping] = None) -> ModelSpec:
    reg = default_registry() if registry is None else registry
    key = ALIASES.get(name, name)
    if key not in reg:
        raise KeyError(f"unknown model {name!r}")
    return reg[key]


def training_window(spec: ModelSpec, available_days: int, policy: str = "skip",
                    min_days: Optional[int] = None) -> int:
    """Training days to use given ``available_days`` of history, or WindowError.

    ``skip`` demands the full window; ``clip`` shortens it to what the history
    allows as long as at least ``min_days`` remain.
    """
    usable = available_days - spec.lead_days
    if usable >= spec.window_days:
        return spec.window_days
    floor = MIN_DAYS[spec.family] if min_days is None else max(min_days, MIN_DAYS[spec.family])
    if policy == "clip" and usable >= floor:
        return usable
    raise WindowError(f"{spec.name} needs {spec.window_days + spec.lead_days} days of "
                      f"history, only {available_days} available")


# ---- adapters -------------------------------------------------------------

def _days_slice(prices: PriceSeries, first: date, last: date) -> PriceSeries:
    return prices.slice(day_start(first), day_end(last))


def _factor_extras(spec: ModelSpec, drivers: DriverMatrix, first_row_day: date,
                   last_row_day: date) -> DriverMatrix:
    """Driver features for pca recipes: screened PCA factors plus optional raw columns."""
    rows = drivers.slice(day_start(first_row_day), day_end(last_row_day))
    ipp_cols = [c for c in drivers.columns if c.startswith(IPP_PREFIX)]
    pool = [c for c in drivers.columns if c != "ds_gap" and c not in ipp_cols]
    screen_days = min(SCREEN_DAYS, len(drivers) // BLOCKS_PER_DAY)
    screen_src = drivers.slice(drivers.start, day_end(last_row_day)).select(pool)
    screened, _ = variance_screen(screen_src, window_days=min(screen_days,
                                                               len(screen_src) // BLOCKS_PER_DAY))
    kept = list(screened.columns)
    block = rows.select(kept)
    if len(kept) >= 2:
        factors = pca_project(pca_fit(block), block)
    else:
        v = block.values
        sd = v.std(axis=0)
        sd[sd == 0] = 1.0
        factors = DriverMatrix(block.start, ("pc1",), (v - v.mean(axis=0)) / sd)
    cols = [factors.values]
    names = list(factors.columns)
    if spec.params.get("ds_gap"):
        cols.append(rows.column("ds_gap")[:, None])
        names.append("ds_gap_raw")
    if spec.params.get("ipp"):
        cols.append(rows.select(ipp_cols).values)
        names += ipp_cols
    return DriverMatrix(rows.start, tuple(names), np.hstack(cols))


def _ml_design(spec: ModelSpec, prices: PriceSeries, drivers: Optional[DriverMatrix],
               target: date, window: int, holidays=frozenset()):
    first_train = target - timedelta(days=window)
    hist = _days_slice(prices, first_train - timedelta(days=LAGS), target - timedelta(days=1))
    train_days = [first_train + timedelta(days=i) for i in range(window)]
    recipe = spec.recipe
    extras = None
    if recipe in ("ds", "pca"):
        if drivers is None:
            raise DataError(f"{spec.name} needs a driver matrix")
        if recipe == "pca":
            extras = _factor_extras(spec, drivers, first_train - timedelta(days=1),
                                    target - timedelta(days=1))
        else:
            extras = drivers
    day_effect = bool(spec.params.get("day_effect", False))
    X, y, names = raw_features(hist, train_days, recipe, extras, LAGS,
                               day_effect=day_effect, holidays=holidays)
    Xf, _, _ = raw_features(hist, [target], recipe, extras, LAGS,
                            day_effect=day_effect, holidays=holidays)
    if np.isnan(y).any():
        raise DataError("training targets contain missing prices")
    return X, y, Xf, names, train_days


def forecast_day(spec: ModelSpec, prices: PriceSeries, drivers: Optional[DriverMatrix],
                 target: date, window: int, seed: int = 0,
                 holidays=frozenset()) -> np.ndarray:
    """Fit ``spec`` on ``window`` days ending the day before ``target``; 96 values."""
    if prices.end > day_end(target - timedelta(days=1)):
        raise DataError("price history runs past the day before the target")
    if drivers is not None and drivers.end > day_end(target - timedelta(days=1)):
        raise DataError("driver history runs past the day before the target")
    last = target - timedelta(days=1)
    fam = spec.family
    p = spec.params
    if fam == "hw":
        train = _days_slice(prices, target - timedelta(days=window), last)
        weekly = bool(p.get("weekly", False)) and window >= 14
        return forecast_hw(fit_holt_winters(train, weekly=weekly, name=spec.name)).values
    if fam == "arfima":
        train = _days_slice(prices, target - timedelta(days=window), last)
        trunc = int(min(p.get("truncation", 1000), len(train)))
        model = fit_arfima(train, p.get("variant", "ARFIMA1"), truncation=trunc, strict=False)
        return forecast_arfima(model, train, name=spec.name).values
    if fam == "ag":
        train = _days_slice(prices, target - timedelta(days=window), last)
        return forecast_arma_garch(fit_arma_garch(train, strict=False, name=spec.name),
                                   train).values
    if fam == "sarimax":
        if drivers is None:
            raise DataError("SARIMAX needs a driver matrix")
        train = _days_slice(prices, target - timedelta(days=window), last)
        return fit_forecast_sarimax(train, drivers, p.get("column", "ds_gap"), spec.name).values
    X, y, Xf, names, days = _ml_design(spec, prices, drivers, target, window, holidays)
    if fam == "gbm":
        model = fit_gbm(X, y, M=int(p.get("M", 100)), nu=float(p.get("nu", 0.05)),
                        max_depth=int(p.get("max_depth", 3)), min_leaf=int(p.get("min_leaf", 10)))
        return predict_gbm(model, Xf)
    design = standardize(X, y, names, days)
    Z = design.transform(Xf, names)
    if fam == "ann":
        cfg = AnnConfig(hidden=int(p.get("hidden", 10)), epochs=int(p.get("epochs", 500)),
                        learning_rate=float(p.get("learning_rate", 0.01)), seed=int(seed))
        return predict_ann(fit_ann(design, cfg), Z)
    cfg = SvrConfig(kernel=p.get("kernel", "radial"), C=float(p.get("C", 1.0)),
                    epsilon=float(p.get("epsilon", 0.1)), gamma=p.get("gamma"))
    return predict_svr(fit_svr(design, cfg), Z)
