from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinmkt.core import (BLOCKS_PER_DAY, ZONES, BlockTimestamp, DriverMatrix, PriceSeries,
                          check_zone, days_for_years, lag_diff, lag_diff_bucket,
                          parse_driver_csv, parse_price_csv, window)
from thinmkt.errors import DataError, WindowError

D0 = date(2016, 10, 4)


def series(days=10, start=D0, zone="E1", seed=0):
    rng = np.random.default_rng(seed)
    return PriceSeries(zone, BlockTimestamp(start, 1), rng.uniform(1, 5, days * BLOCKS_PER_DAY))


class TestCalendar:
    def test_successor_wraps_to_next_day(self):
        assert BlockTimestamp(D0, 96).advance(1) == BlockTimestamp(date(2016, 10, 5), 1)

    def test_ordering_is_chronological(self):
        a = BlockTimestamp(D0, 96)
        b = BlockTimestamp(date(2016, 10, 5), 1)
        assert a < b and b - a == 1

    @pytest.mark.parametrize("block", [0, 97, -1])
    def test_block_bounds(self, block):
        with pytest.raises(DataError):
            BlockTimestamp(D0, block)

    @given(st.integers(0, 10000), st.integers(1, 96),
           st.dates(min_value=date(2000, 1, 1), max_value=date(2030, 1, 1)))
    def test_advance_round_trip(self, k, block, d):
        ts = BlockTimestamp(d, block)
        assert ts.advance(k).advance(-k) == ts

    def test_twelve_zones(self):
        assert len(ZONES) == 12 and len(set(ZONES)) == 12
        assert check_zone("N3") == "N3"
        with pytest.raises(DataError):
            check_zone("X9")

    def test_years_to_days(self):
        assert days_for_years(3.5) == 1278
        assert days_for_years(1.5) == 548
        assert days_for_years(1) == 365


class TestPriceCsv:
    def test_two_rows(self):
        s = parse_price_csv(b"date,block,zone,price\n2016-10-04,1,E1,2.41\n2016-10-04,2,E1,2.43\n")
        assert len(s) == 2 and not s.has_missing()
        assert s.values.tolist() == [2.41, 2.43]

    def test_gap_is_masked(self):
        s = parse_price_csv(b"date,block,zone,price\n2016-10-04,1,E1,2.41\n2016-10-04,3,E1,2.5\n")
        assert len(s) == 3
        assert s.missing.tolist() == [False, True, False]
        assert np.isnan(s.values[1])

    def test_block_97_names_line(self):
        with pytest.raises(DataError) as err:
            parse_price_csv(b"date,block,zone,price\n2016-10-04,1,E1,2.41\n2016-10-04,97,E1,2\n")
        assert err.value.line == 3
        assert "line 3" in str(err.value)

    def test_rows_sorted_internally(self):
        s = parse_price_csv(b"date,block,zone,price\n2016-10-05,1,E1,3\n2016-10-04,96,E1,2\n")
        assert s.start == BlockTimestamp(D0, 96) and s.values.tolist() == [2.0, 3.0]

    def test_conflicting_duplicate(self):
        with pytest.raises(DataError, match="conflicting"):
            parse_price_csv(b"date,block,zone,price\n2016-10-04,1,E1,2\n2016-10-04,1,E1,3\n")

    def test_identical_duplicate_is_accepted(self):
        s = parse_price_csv(b"date,block,zone,price\n2016-10-04,1,E1,2\n2016-10-04,1,E1,2\n")
        assert len(s) == 1

    def test_mixed_zones(self):
        with pytest.raises(DataError, match="mixed zones"):
            parse_price_csv(b"date,block,zone,price\n2016-10-04,1,E1,2\n2016-10-04,2,N3,2\n")

    @pytest.mark.parametrize("row", ["2016-10-04,1,E1,abc", "2016-13-04,1,E1,2",
                                     "2016-10-04,x,E1,2", "2016-10-04,1,E1,-1"])
    def test_malformed(self, row):
        with pytest.raises(DataError) as err:
            parse_price_csv(("date,block,zone,price\n" + row + "\n").encode())
        assert err.value.line == 2

    def test_round_trip_bit_exact(self):
        s = series(days=2)
        back = parse_price_csv(s.to_csv().encode())
        assert back.start == s.start
        assert np.array_equal(back.values, s.values)


class TestDriverCsv:
    def _text(self, rows):
        return ("date,block,a,b\n" + "\n".join(rows) + "\n").encode()

    def test_shape(self):
        rows = [f"2016-10-04,{b},{b},{2 * b}" for b in range(1, 97)]
        m = parse_driver_csv(self._text(rows))
        assert m.values.shape == (96, 2)

    def test_blank_cell_forward_filled(self):
        rows = [f"2016-10-04,{b},{b},{2 * b}" for b in range(1, 97)]
        rows[10] = "2016-10-04,11,,22"
        m = parse_driver_csv(self._text(rows))
        assert m.values[10, 0] == 10.0 and m.values[10, 1] == 22.0

    def test_blank_first_block_is_error(self):
        rows = [f"2016-10-04,{b},{b},{2 * b}" for b in range(1, 97)]
        rows[0] = "2016-10-04,1,,2"
        with pytest.raises(DataError, match="no earlier block"):
            parse_driver_csv(self._text(rows))

    def test_missing_whole_day(self):
        rows = ["2016-10-04,1,1,1", "2016-10-06,1,1,1"]
        with pytest.raises(DataError, match="2016-10-05"):
            parse_driver_csv(self._text(rows))

    def test_non_numeric(self):
        with pytest.raises(DataError, match="non-numeric"):
            parse_driver_csv(self._text(["2016-10-04,1,1,zz"]))

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        m = DriverMatrix(BlockTimestamp(D0, 1), ("x", "y"), rng.normal(size=(192, 2)))
        back = parse_driver_csv(m.to_csv().encode())
        assert back.columns == m.columns and np.array_equal(back.values, m.values)


class TestWindow:
    def test_full_series(self):
        s = series(10)
        w = window(s, s.end, 10)
        assert np.array_equal(w.values, s.values)

    def test_one_day(self):
        s = series(10)
        assert np.array_equal(window(s, s.end, 1).values, s.values[-96:])

    def test_too_long(self):
        s = series(10)
        with pytest.raises(WindowError):
            window(s, s.end, 11)

    @given(st.integers(1, 5), st.integers(1, 5))
    @settings(max_examples=30)
    def test_consecutive_windows_tile(self, n1, n2):
        s = series(10)
        w2 = window(s, s.end, n2)
        w1 = window(s, w2.start.advance(-1), n1)
        joined = np.concatenate([w1.values, w2.values])
        assert np.array_equal(joined, s.values[-(n1 + n2) * 96:])


class TestLagDiff:
    def _pair(self, prev, now):
        v = np.ones(192)
        v[5], v[101] = prev, now
        return PriceSeries("E1", BlockTimestamp(D0, 1), v)

    def test_arithmetic(self):
        s = self._pair(4.0, 5.0)
        assert lag_diff(s, BlockTimestamp(date(2016, 10, 5), 6)) == pytest.approx(25.0)

    def test_identity(self):
        s = self._pair(4.0, 4.0)
        assert lag_diff(s, BlockTimestamp(date(2016, 10, 5), 6)) == 0.0

    def test_zero_previous(self):
        s = self._pair(0.0, 4.0)
        with pytest.raises(DataError, match="zero"):
            lag_diff(s, BlockTimestamp(date(2016, 10, 5), 6))

    def test_missing_previous(self):
        with pytest.raises(WindowError):
            lag_diff(series(1), BlockTimestamp(D0, 6))

    @pytest.mark.parametrize("v,bucket", [(0, "<20%"), (19.99, "<20%"), (20, "20-40%"),
                                          (40, "40-60%"), (60, ">60%"), (500, ">60%")])
    def test_buckets(self, v, bucket):
        assert lag_diff_bucket(v) == bucket


def test_price_series_rejects_negative():
    with pytest.raises(DataError):
        PriceSeries("E1", BlockTimestamp(D0, 1), [1.0, -0.5])


def test_series_is_immutable():
    s = series(1)
    with pytest.raises(ValueError):
        s.values[0] = 1.0
