from datetime import date, timedelta

import numpy as np
import pytest

from thinmkt.core import BLOCKS_PER_DAY, BlockTimestamp, DriverMatrix, PriceSeries
from thinmkt.errors import DataError, FitError, WindowError
from thinmkt.univariate.arfima import (ArfimaModel, estimate_arfima, fit_arfima,
                                       forecast_arfima, frac_diff, frac_weights)
from thinmkt.univariate.garch import (AgModel, estimate_arma_garch, estimate_garch,
                                      fit_arma_garch, forecast_arma_garch, simulate_garch,
                                      variance_forecast)
from thinmkt.univariate.holt_winters import HwModel, fit_holt_winters, forecast_hw
from thinmkt.univariate.sarimax import fit_forecast_sarimax, fit_sarimax

D0 = date(2016, 1, 1)


def ps(values, start=D0, block=1):
    return PriceSeries("E1", BlockTimestamp(start, block), np.asarray(values, dtype=float))


class TestFracDiff:
    def test_zero_order_is_identity(self):
        x = np.random.default_rng(0).normal(size=50)
        assert np.array_equal(frac_diff(x, 0.0, 100), x)

    def test_first_difference(self):
        assert frac_diff([1.0, 3.0, 6.0], 1.0, 10).tolist() == [1.0, 2.0, 3.0]

    def test_half_order_weights(self):
        # pi_k = pi_{k-1} (k - 1 - d) / k, by hand for d = 0.5
        assert frac_weights(0.5, 3) == pytest.approx([1.0, -0.5, -0.125, -0.0625])

    @pytest.mark.parametrize("d", [-0.45, -0.2, 0.1, 0.3, 0.45])
    def test_round_trip(self, d):
        x = np.random.default_rng(1).normal(size=500)
        back = frac_diff(frac_diff(x, d, 1000), -d, 1000)
        assert np.max(np.abs(back - x)) < 1e-6

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            frac_diff([1.0, np.nan], 0.3, 10)


class TestArfima:
    def test_white_noise_has_small_d(self):
        x = np.random.default_rng(2).normal(size=3000)
        est = estimate_arfima(x, orders=[(0, 0), (1, 0)])
        assert -0.1 <= est.model.d <= 0.1

    def test_grid_never_worse_than_no_differencing(self):
        x = np.random.default_rng(3).normal(size=800).cumsum() * 0.1
        est = estimate_arfima(x, orders=[(0, 0)])
        zero = int(np.argmin(np.abs(np.round(np.arange(-49, 50) * 0.01, 2))))
        assert est.model.css <= est.css_by_d[zero] + 1e-9

    def test_constant_series(self):
        with pytest.raises(FitError, match="zero-variance"):
            estimate_arfima(np.full(200, 3.0))

    def test_strict_window(self):
        with pytest.raises(WindowError):
            fit_arfima(ps(np.ones(960)), "ARFIMA2")

    def test_mean_model_forecast(self):
        m = ArfimaModel(d=0.0, p=0, q=0, phi=[], theta=[], mu=4.2, sigma2=1.0, truncation=50)
        f = forecast_arfima(m, ps(np.full(96, 4.0)))
        assert np.allclose(f.values, 4.2) and f.values.size == 96
        assert f.date == D0 + timedelta(days=1)

    def test_ar1_closed_form(self):
        m = ArfimaModel(d=0.0, p=1, q=0, phi=[0.9], theta=[], mu=0.0, sigma2=1.0, truncation=50)
        hist = np.zeros(96)
        hist[-1] = 10.0
        f = forecast_arfima(m, ps(hist))
        assert np.allclose(f.values, 10 * 0.9 ** np.arange(1, 97))

    def test_negative_forecast_clamped(self):
        m = ArfimaModel(d=0.0, p=0, q=0, phi=[], theta=[], mu=-5.0, sigma2=1.0, truncation=50)
        assert np.all(forecast_arfima(m, ps(np.zeros(96))).values == 0.0)

    def test_history_shorter_than_filter(self):
        m = ArfimaModel(d=0.2, p=0, q=0, phi=[], theta=[], mu=0.0, sigma2=1.0, truncation=200)
        with pytest.raises(WindowError):
            forecast_arfima(m, ps(np.ones(96)))

    def test_rejects_non_stationary_ar(self):
        with pytest.raises(ValueError):
            ArfimaModel(d=0.0, p=1, q=0, phi=[1.2], theta=[], mu=0, sigma2=1, truncation=50)

    def test_fit_and_forecast_are_finite(self):
        rng = np.random.default_rng(4)
        t = np.arange(20 * 96)
        x = 100 + 10 * np.sin(2 * np.pi * t / 96) + rng.normal(0, 1, t.size)
        m = fit_arfima(ps(x), "ARFIMA2", truncation=200, strict=False, orders=[(0, 0), (1, 0)])
        f = forecast_arfima(m, ps(x))
        assert np.all(np.isfinite(f.values)) and np.all(f.values >= 0)
        assert np.mean(np.abs(f.values - (100 + 10 * np.sin(2 * np.pi * (t[-1] + 1 + np.arange(96)) / 96)))) < 5


class TestHoltWinters:
    def test_constant_series(self):
        m = fit_holt_winters(ps(np.full(4 * 96, 7.0)))
        assert np.allclose(forecast_hw(m).values, 7.0, atol=1e-9)

    def test_sinusoid_mape_below_one_percent(self):
        t = np.arange(6 * 96)
        y = 100 + 20 * np.sin(2 * np.pi * t / 96)
        m = fit_holt_winters(ps(y[:5 * 96]))
        f = forecast_hw(m).values
        assert 100 * np.mean(np.abs(f - y[5 * 96:]) / y[5 * 96:]) < 1.0

    def test_linear_trend(self):
        y = 50 + 0.3 * np.arange(5 * 96)
        m = fit_holt_winters(ps(y))
        assert m.trend == pytest.approx(0.3, rel=0.05)

    def test_forecast_arithmetic(self):
        m = HwModel(level=5.0, trend=0.01, seasonal=np.zeros(96), alpha=0.5, beta=0.1, gamma=0.1,
                    end=BlockTimestamp(D0, 96))
        f = forecast_hw(m).values
        assert f[-1] == pytest.approx(5.96) and f[0] == pytest.approx(5.01)

    def test_flat_season_no_trend_gives_level(self):
        m = HwModel(level=3.0, trend=0.0, seasonal=np.zeros(96), alpha=0.5, beta=0.1, gamma=0.1,
                    end=BlockTimestamp(D0, 96))
        assert np.all(forecast_hw(m).values == 3.0)

    def test_repeats_seasonal_shape_without_trend(self):
        s = np.sin(np.arange(96))
        s -= s.mean()
        m = HwModel(level=10.0, trend=0.0, seasonal=s, alpha=0.5, beta=0.1, gamma=0.1,
                    end=BlockTimestamp(D0, 96))
        assert np.allclose(forecast_hw(m).values, 10 + s)

    def test_seasonal_sums_to_zero(self):
        rng = np.random.default_rng(5)
        y = 200 + 30 * np.sin(2 * np.pi * np.arange(8 * 96) / 96) + rng.normal(0, 5, 8 * 96)
        m = fit_holt_winters(ps(y))
        assert abs(m.seasonal.sum()) < 1e-6 * 96 * y.mean()
        assert m.max_cycle_sum < 1e-6 * 96 * y.mean()
        assert all(0 <= v <= 1 for v in (m.alpha, m.beta, m.gamma))

    def test_too_short(self):
        with pytest.raises(WindowError):
            fit_holt_winters(ps(np.ones(150)))

    def test_weekly_option(self):
        rng = np.random.default_rng(6)
        y = 200 + 30 * np.sin(2 * np.pi * np.arange(21 * 96) / 96) + rng.normal(0, 3, 21 * 96)
        m = fit_holt_winters(ps(y), weekly=True)
        assert m.seasonal2.shape == (7 * 96,)
        assert np.all(np.isfinite(forecast_hw(m).values))


class TestGarch:
    def test_iid_noise(self):
        e = np.random.default_rng(8).normal(size=4000)
        g = estimate_garch(e)
        assert g.alpha + g.beta < 0.3
        assert g.omega == pytest.approx(e.var() * (1 - g.alpha - g.beta), rel=0.1)

    def test_stationary_with_positive_variance(self):
        e = simulate_garch(3000, 0.1, 0.15, 0.7, np.random.default_rng(9))
        g = estimate_garch(e)
        assert g.alpha + g.beta < 1 and np.all(g.h > 0)

    def test_constant_series(self):
        with pytest.raises(FitError):
            estimate_arma_garch(np.full(500, 2.0))

    def test_mean_model_forecast(self):
        m = AgModel(p=0, q=0, phi=[], theta=[], mu=3.5, omega=1.0, alpha=0.1, beta=0.8)
        assert np.allclose(forecast_arma_garch(m, ps(np.ones(96))).values, 3.5)

    def test_ar1_second_block(self):
        m = AgModel(p=1, q=0, phi=[0.5], theta=[], mu=0.0, omega=1.0, alpha=0.1, beta=0.8)
        hist = np.zeros(96)
        hist[-1] = 8.0
        f = forecast_arma_garch(m, ps(hist)).values
        assert f[0] == pytest.approx(4.0) and f[1] == pytest.approx(2.0)

    @pytest.mark.parametrize("last_h", [0.1, 50.0])
    def test_variance_forecast_monotone_to_unconditional(self, last_h):
        m = AgModel(p=0, q=0, phi=[], theta=[], mu=0.0, omega=0.2, alpha=0.1, beta=0.8)
        v = variance_forecast(m, last_h, 0.0, 200)
        d = np.diff(v - m.unconditional_variance)
        gap = np.abs(v - m.unconditional_variance)
        assert np.all(np.diff(gap) <= 1e-12)
        assert gap[-1] < 1e-6 and np.all(np.sign(d) == np.sign(d[0]))

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            AgModel(p=0, q=0, phi=[], theta=[], mu=0.0, omega=1.0, alpha=0.5, beta=0.6)

    def test_strict_window(self):
        with pytest.raises(WindowError):
            fit_arma_garch(ps(np.ones(960)))

    def test_fit_on_prices(self):
        rng = np.random.default_rng(10)
        t = np.arange(30 * 96)
        y = 100 + 10 * np.sin(2 * np.pi * t / 96) + simulate_garch(t.size, 0.1, 0.1, 0.8, rng)
        m = fit_arma_garch(ps(y), strict=False)
        assert m.alpha + m.beta < 1 and np.all(m.h > 0)
        f = forecast_arma_garch(m, ps(y))
        assert f.values.size == 96 and np.all(np.isfinite(f.variance))


class TestSarimax:
    def _drivers(self, x, first_day):
        return DriverMatrix(BlockTimestamp(first_day, 1), ("ds_gap",), np.asarray(x)[:, None])

    def test_linear_relation(self):
        rng = np.random.default_rng(11)
        n = 20 * 96
        x = rng.uniform(100, 500, n)
        m = fit_sarimax(2.0 * x + rng.normal(0, 1, n), x)
        assert m.beta_x == pytest.approx(2.0, rel=0.01)

    def test_zero_regressor_reduces_to_seasonal_arma(self):
        rng = np.random.default_rng(12)
        y = 100 + 10 * np.sin(2 * np.pi * np.arange(10 * 96) / 96) + rng.normal(0, 1, 960)
        m = fit_sarimax(y, np.zeros(960))
        assert m.beta_x == 0.0 and m.exog_dropped

    def test_day_ahead_alignment(self):
        rng = np.random.default_rng(13)
        days = 12
        gap = rng.uniform(0, 300, (days + 1) * 96)
        # price of day d responds to the gap row of day d-1
        price = 1000 + 2.0 * gap[:-96] + rng.normal(0, 1, days * 96)
        train = ps(price[:-96], D0 + timedelta(days=1))
        f = fit_forecast_sarimax(train, self._drivers(gap[:-96], D0))
        assert np.mean(np.abs(f.values - price[-96:])) < 10

    def test_missing_forecast_day_rows(self):
        train = ps(np.ones(5 * 96) * 10, D0 + timedelta(days=1))
        with pytest.raises(DataError):
            fit_forecast_sarimax(train, self._drivers(np.ones(5 * 96), D0))
