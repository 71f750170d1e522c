"""Models fitted on price history alone (SARIMAX adds one exogenous column)."""
from .arfima import ArfimaModel, fit_arfima, forecast_arfima, frac_diff, simulate_arfima
from .garch import AgModel, fit_arma_garch, forecast_arma_garch, simulate_garch
from .holt_winters import HwModel, fit_holt_winters, forecast_hw
from .sarimax import SarimaxModel, fit_forecast_sarimax

__all__ = ["ArfimaModel", "fit_arfima", "forecast_arfima", "frac_diff", "simulate_arfima",
           "AgModel", "fit_arma_garch", "forecast_arma_garch", "simulate_garch",
           "HwModel", "fit_holt_winters", "forecast_hw", "SarimaxModel", "fit_forecast_sarimax"]
