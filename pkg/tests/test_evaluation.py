from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thinmkt.backtest import BacktestResult
from thinmkt.errors import DataError
from thinmkt.evaluation import (chart_day, lag_diff_report, mape, mape_detail, mape_report,
                                season_csv, season_of, season_report, write_reports)

D0 = date(2016, 10, 4)


def result(days=3, seed=0, top=None, classes=None, lag=None):
    """Hand-built result; ``top`` maps (day index, block) to the single survivor."""
    rng = np.random.default_rng(seed)
    dates = tuple(D0 + timedelta(days=i) for i in range(days))
    models = ("u1", "m1")
    classes = classes or {"u1": "univariate", "m1": "multivariate"}
    actual = rng.uniform(50, 150, (days, 96))
    F = actual[None] * rng.uniform(0.9, 1.1, (2, days, 96))
    lag_diff = rng.uniform(0, 100, (days, 96)) if lag is None else lag
    ssm, combined = [], np.empty((days, 96))
    for j, d in enumerate(dates):
        for b in range(1, 97):
            if top is None:
                w = {"u1": 0.6, "m1": 0.4} if b % 2 else {"u1": 0.3, "m1": 0.7}
            else:
                w = {top(j, b): 1.0}
            combined[j, b - 1] = sum(v * F[models.index(m), j, b - 1] for m, v in w.items())
            for m, v in w.items():
                ssm.append((d, b, m, 1.0, 1.0, v, ""))
    return BacktestResult("E1", dates, models, classes, actual, combined, F, lag_diff, ssm)


class TestMape:
    def test_two_points(self):
        assert mape([100, 200], [90, 220]) == pytest.approx(10.0)

    def test_identity(self):
        assert mape([3.0, 4.0], [3.0, 4.0]) == 0.0

    def test_exclusion(self):
        d = mape_detail([100.0, 0.005, 200.0], [90.0, 1.0, 220.0])
        assert d.value == pytest.approx(10.0) and d.included == 2 and d.excluded == 1

    def test_all_excluded(self):
        with pytest.raises(DataError):
            mape([0.0, 0.0], [1.0, 1.0])

    def test_bad_lengths(self):
        with pytest.raises(DataError):
            mape([1.0, 2.0], [1.0])
        with pytest.raises(DataError):
            mape([], [])

    @given(st.lists(st.floats(0.1, 1e4), min_size=1, max_size=30), st.floats(-0.5, 0.5))
    def test_non_negative(self, a, rel):
        a = np.array(a)
        assert mape(a, a * (1 + rel)) >= 0


class TestMapeReport:
    def test_perfect_day(self):
        r = result(days=1)
        r.combined[:] = r.actual
        rep = mape_report(r, "daily")
        assert rep.table[0, 0] == 0.0 and rep.variance[0] == 0.0

    def test_blockwise_rows(self):
        rep = mape_report(result(), "blockwise")
        assert rep.table.shape == (96, 3) and rep.keys == tuple(range(1, 97))
        lines = rep.to_csv().splitlines()
        assert lines[0] == "block,combined,u1,m1" and len(lines) == 99

    def test_daily_equals_block_mean(self):
        r = result()
        rep = mape_report(r, "daily")
        for j in range(3):
            manual = np.mean(100 * np.abs(r.actual[j] - r.combined[j]) / r.actual[j])
            assert rep.table[j, 0] == pytest.approx(manual, rel=1e-12)

    def test_bad_granularity(self):
        with pytest.raises(ValueError):
            mape_report(result(), "hourly")


class TestLagDiff:
    def test_all_univariate(self):
        rep = lag_diff_report(result(top=lambda j, b: "u1"))
        assert rep.univariate == (100.0,) * 4 and rep.multivariate == (0.0,) * 4

    def test_shares_sum_to_100(self):
        rep = lag_diff_report(result(seed=3))
        for u, m in zip(rep.univariate, rep.multivariate):
            assert abs(u + m - 100) < 0.1

    def test_attribution_uses_highest_weight(self):
        # odd blocks favour u1, even blocks m1
        rep = lag_diff_report(result(lag=np.full((3, 96), 10.0)))
        assert rep.counts == (288, 0, 0, 0)
        assert rep.multivariate[0] == 50.0 and rep.multivariate[1] is None

    def test_bucket_edges(self):
        lag = np.zeros((1, 96))
        lag[0, :4] = [19.99, 20.0, 59.99, 60.0]
        rep = lag_diff_report(result(days=1, lag=lag))
        assert rep.counts == (93, 1, 1, 1)

    def test_undefined_lag_diff_unscored(self):
        lag = np.full((1, 96), 30.0)
        lag[0, 5] = np.nan
        rep = lag_diff_report(result(days=1, lag=lag))
        assert rep.unscored == 1 and sum(rep.counts) == 95

    def test_csv_has_four_buckets(self):
        text = lag_diff_report(result()).to_csv()
        assert text.startswith("# ")
        header = text.splitlines()[1].split(",")
        assert header == ["class", "<20%", "20-40%", "40-60%", ">60%"]


class TestSeason:
    def test_months(self):
        assert season_of(date(2016, 10, 4)) == "Fall"
        assert season_of(date(2015, 6, 11)) == "Summer"
        assert season_of(date(2016, 1, 1)) == "Winter"

    def test_report(self):
        r = result(days=40)
        rows = season_report(r)
        assert [s.season for s in rows] == ["Fall"] and rows[0].days == 40
        assert rows[0].mape == pytest.approx(mape(r.actual, r.combined))
        assert season_csv(rows).splitlines()[0] == "season,period,region,mape,days"
        assert "2016-10-04 - 2016-11-12" in season_csv(rows)


def test_write_reports(tmp_path):
    paths = write_reports(result(), tmp_path)
    assert {p.name for p in paths} == {"mape_daily.csv", "mape_blockwise.csv", "lagdiff.csv",
                                       "season.csv"}


def test_chart_is_deterministic_svg(tmp_path):
    r = result(days=1)
    a = chart_day(r, D0, tmp_path / "a.svg").read_bytes()
    b = chart_day(r, D0, tmp_path / "b.svg").read_bytes()
    assert a.startswith(b"<?xml") and b"<svg" in a and a == b
