"""MAPE tables, Lag_Diff bucket shares and seasonal summaries of a backtest."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .backtest import MAPE_FLOOR, BacktestResult, ape
from .core import BLOCKS_PER_DAY, LAG_DIFF_BUCKETS
from .errors import DataError

ATTRIBUTION_NOTE = ("each record is attributed to the class of its highest-weight "
                    "superior model")
# month -> season
SEASONS = {12: "Winter", 1: "Winter", 2: "Winter", 3: "Spring", 4: "Spring",
           5: "Summer", 6: "Summer", 7: "Monsoon", 8: "Monsoon", 9: "Monsoon",
           10: "Fall", 11: "Fall"}
SEASON_ORDER = ("Winter", "Spring", "Summer", "Monsoon", "Fall")


@dataclass(frozen=True)
class MapeDetail:
    value: float
    included: int
    excluded: int


def mape_detail(actuals, forecasts, floor: float = MAPE_FLOOR) -> MapeDetail:
    a = np.asarray(actuals, dtype=float).ravel()
    f = np.asarray(forecasts, dtype=float).ravel()
    if a.size == 0 or a.shape != f.shape:
        raise DataError("mape needs equal-length, non-empty inputs")
    e = ape(a, f, floor)
    ok = np.isfinite(e)
    if not ok.any():
        raise DataError(f"every actual is at or below the {floor} floor")
    return MapeDetail(float(e[ok].mean()), int(ok.sum()), int((~ok).sum()))


def mape(actuals, forecasts, floor: float = MAPE_FLOOR) -> float:
    """Mean absolute percentage error in percent, skipping actuals at or below ``floor``."""
    return mape_detail(actuals, forecasts, floor).value


@dataclass(frozen=True, eq=False)
class MapeReport:
    granularity: str
    keys: tuple  # dates or block numbers
    series: tuple  # "combined" then the models
    table: np.ndarray  # keys x series (NaN where nothing was scored)
    excluded: int

    @property
    def mean(self) -> np.ndarray:
        return np.nanmean(self.table, axis=0)

    @property
    def variance(self) -> np.ndarray:
        return np.nanvar(self.table, axis=0)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([self.granularity == "daily" and "date" or "block", *self.series])
        for k, row in zip(self.keys, self.table):
            w.writerow([str(k), *(_cell(v) for v in row)])
        w.writerow(["mean", *(_cell(v) for v in self.mean)])
        w.writerow(["variance", *(_cell(v) for v in self.variance)])
        return out.getvalue()


def _cell(v) -> str:
    return "" if v is None or not np.isfinite(v) else f"{v:.6f}"


def _series(r: BacktestResult):
    return ("combined", *r.models), np.concatenate([r.combined[None], r.forecasts])


def mape_report(r: BacktestResult, granularity: str = "daily") -> MapeReport:
    if granularity not in ("daily", "blockwise"):
        raise ValueError("granularity must be 'daily' or 'blockwise'")
    if len(r.dates) == 0:
        raise DataError("empty backtest result")
    names, F = _series(r)
    E = ape(r.actual[None], F)  # series x days x blocks
    axis = 2 if granularity == "daily" else 1
    with np.errstate(invalid="ignore"):
        counts = np.isfinite(E).sum(axis=axis)
        sums = np.nansum(E, axis=axis)
        table = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan).T
    keys = tuple(r.dates) if granularity == "daily" else tuple(range(1, BLOCKS_PER_DAY + 1))
    excluded = int(np.sum(~(r.actual > MAPE_FLOOR)))
    return MapeReport(granularity, keys, names, table, excluded)


@dataclass(frozen=True)
class LagDiffReport:
    buckets: tuple
    counts: tuple
    univariate: tuple  # percent per bucket, None when the bucket is empty
    multivariate: tuple
    unscored: int  # records without a defined Lag_Diff

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# {ATTRIBUTION_NOTE}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["class", *self.buckets])
        for label, vals in (("univariate", self.univariate), ("multivariate", self.multivariate)):
            w.writerow([label, *("" if v is None else f"{v:.1f}" for v in vals)])
        w.writerow(["records", *self.counts])
        return out.getvalue()


def lag_diff_report(r: BacktestResult) -> LagDiffReport:
    top = r.top_models()
    tallies = {b: [0, 0] for b in LAG_DIFF_BUCKETS}
    unscored = 0
    edges = (20.0, 40.0, 60.0)
    for j, d in enumerate(r.dates):
        for b in range(BLOCKS_PER_DAY):
            v = r.lag_diff[j, b]
            m = top.get((d, b + 1))
            if not np.isfinite(v) or m is None:
                unscored += 1
                continue
            bucket = LAG_DIFF_BUCKETS[int(np.searchsorted(edges, v, side="right"))]
            tallies[bucket][r.classes[m] == "multivariate"] += 1
    uni, multi, counts = [], [], []
    for b in LAG_DIFF_BUCKETS:
        u, mv = tallies[b]
        n = u + mv
        counts.append(n)
        uni.append(100.0 * u / n if n else None)
        multi.append(100.0 * mv / n if n else None)
    return LagDiffReport(LAG_DIFF_BUCKETS, tuple(counts), tuple(uni), tuple(multi), unscored)


@dataclass(frozen=True)
class SeasonRow:
    season: str
    first: date
    last: date
    region: str
    mape: float
    days: int


def season_of(d: date) -> str:
    return SEASONS[d.month]


def season_report(r: BacktestResult) -> list:
    groups: dict = {}
    for j, d in enumerate(r.dates):
        groups.setdefault(season_of(d), []).append(j)
    rows = []
    for s in SEASON_ORDER:
        idx = groups.get(s)
        if not idx:
            continue
        a, f = r.actual[idx], r.combined[idx]
        ok = np.isfinite(a) & np.isfinite(f)
        if not ok.any():
            continue
        rows.append(SeasonRow(s, r.dates[idx[0]], r.dates[idx[-1]], r.zone,
                              mape(a[ok], f[ok]), len(idx)))
    return rows


def season_csv(rows: Sequence[SeasonRow]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["season", "period", "region", "mape", "days"])
    for s in rows:
        w.writerow([s.season, f"{s.first.isoformat()} - {s.last.isoformat()}", s.region,
                    f"{s.mape:.4f}", s.days])
    return out.getvalue()


def write_reports(r: BacktestResult, out_dir, kinds=("mape", "lagdiff", "season")) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "mape" in kinds:
        for g in ("daily", "blockwise"):
            p = out / f"mape_{g}.csv"
            p.write_text(mape_report(r, g).to_csv())
            written.append(p)
    if "lagdiff" in kinds:
        p = out / "lagdiff.csv"
        p.write_text(lag_diff_report(r).to_csv())
        written.append(p)
    if "season" in kinds:
        p = out / "season.csv"
        p.write_text(season_csv(season_report(r)))
        written.append(p)
    if "charts" in kinds:
        written += write_charts(r, out / "charts")
    return written


def chart_day(r: BacktestResult, day: date, path, models: Optional[Sequence[str]] = None):
    """Static SVG of actual, combined and selected model forecasts for one day."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    j = r.dates.index(day)
    blocks = np.arange(1, BLOCKS_PER_DAY + 1)
    chosen = list(models) if models is not None else list(r.models)
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(blocks, r.actual[j], color="black", lw=2, label="actual")
    ax.plot(blocks, r.combined[j], color="tab:red", lw=1.8, label="combined")
    for m in chosen:
        v = r.model_forecast(m)[j]
        if np.isfinite(v).any():
            ax.plot(blocks, v, lw=0.9, alpha=0.8, label=m)
    ax.set_xlabel("block")
    ax.set_ylabel("price")
    ax.set_title(f"{r.zone} {day.isoformat()}")
    ax.set_xlim(1, BLOCKS_PER_DAY)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "thinmkt"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def write_charts(r: BacktestResult, out_dir, models=None) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [chart_day(r, d, out / f"day_{d.isoformat()}.svg", models) for d in r.dates]
