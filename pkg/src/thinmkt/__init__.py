"""Day-ahead price forecasting for thin electricity markets.

A zoo of univariate and driver-based models is backtested day by day; a
model confidence set picks the superior models per 15-minute block and
their forecasts are combined with inverse-loss weights.
"""
from .backtest import BacktestPlan, BacktestResult, McsConfig, load_plan, run_backtest
from .core import (BLOCKS_PER_DAY, BlockTimestamp, DriverMatrix, ModelForecast, PriceSeries,
                   lag_diff, parse_driver_csv, parse_price_csv, window)
from .errors import AllModelsFailed, DataError, FitError, NotFittedError, ThinMarketError, \
    WindowError
from .mcs import LossMatrix, SuperiorSet, combine, mcs_run
from .registry import ModelSpec, default_registry, forecast_day, resolve
from .sim import ShockEvent, SimConfig, inject_shock, simulate

__version__ = "0.1.0"
