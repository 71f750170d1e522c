"""Rolling day-ahead backtest: daily refits, per-block MCS and combination.

Forecasts never depend on earlier combinations, so all (day, model) fits
are computed first (optionally in worker processes) and the MCS pass then
walks the days in order.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .core import (BLOCKS_PER_DAY, DriverMatrix, PriceSeries, day_end, day_start,
                   parse_driver_csv, parse_price_csv)
from .errors import AllModelsFailed, DataError, ThinMarketError, WindowError
from .mcs import (LossMatrix, SuperiorSet, group_of, inverse_loss_weights, mcs_run,
                  pooled_losses, ssm_csv)
from .registry import default_registry, forecast_day, resolve, training_window

log = logging.getLogger(__name__)

MAPE_FLOOR = 0.01
SEED_ENV = "THINMKT_SEED"


@dataclass(frozen=True)
class McsConfig:
    alpha: float = 0.10
    B: int = 1000
    block_len: int = 2
    window: int = 10
    pooled: bool = False  # share one MCS across each block range

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("mcs alpha must lie in (0, 1)")
        if self.B < 100:
            raise ValueError("mcs B must be at least 100")
        if self.window < 2 or self.block_len < 1:
            raise ValueError("mcs window must be >= 2 and block_len >= 1")


@dataclass(frozen=True)
class BacktestPlan:
    eval_start: date
    eval_end: date
    prices: Optional[str] = None
    drivers: Optional[str] = None
    models: tuple = ()
    overrides: Mapping = field(default_factory=dict)
    mcs: McsConfig = McsConfig()
    window_policy: str = "skip"
    min_train_days: int = 7
    seed: int = 0
    jobs: int = 1
    holidays: tuple = ()
    output: Optional[str] = None

    def __post_init__(self):
        if self.eval_end < self.eval_start:
            raise ValueError("evaluation range is empty")
        if self.window_policy not in ("skip", "clip"):
            raise ValueError("window_policy must be 'skip' or 'clip'")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")

    @property
    def eval_days(self) -> list:
        n = self.eval_end.toordinal() - self.eval_start.toordinal() + 1
        return [self.eval_start + timedelta(days=i) for i in range(n)]

    def specs(self) -> list:
        reg = default_registry()
        names = list(self.models) or list(reg)
        out = []
        for n in names:
            spec = resolve(n, reg)
            if n in self.overrides or spec.name in self.overrides:
                spec = spec.with_params(**dict(self.overrides.get(n, self.overrides.get(spec.name))))
            out.append(spec)
        if len({s.name for s in out}) != len(out):
            raise ValueError("model subset names a model twice")
        return out

    @classmethod
    def from_dict(cls, raw: Mapping, base_dir: Optional[Path] = None) -> "BacktestPlan":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown plan keys: {', '.join(sorted(unknown))}")
        kw = dict(raw)
        for key in ("eval_start", "eval_end"):
            if key not in kw:
                raise ValueError(f"plan lacks {key!r}")
            kw[key] = date.fromisoformat(str(kw[key]))
        if "mcs" in kw:
            kw["mcs"] = McsConfig(**kw["mcs"])
        kw["models"] = tuple(kw.get("models", ()))
        kw["holidays"] = tuple(date.fromisoformat(str(h)) for h in kw.get("holidays", ()))
        for key in ("prices", "drivers", "output"):
            if kw.get(key) is not None and base_dir is not None:
                kw[key] = str((base_dir / kw[key]).resolve()) if not os.path.isabs(kw[key]) \
                    else kw[key]
        return cls(**kw)


def load_plan(path) -> BacktestPlan:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"plan file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"plan file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ValueError(f"plan file {path} must hold a JSON object")
    return BacktestPlan.from_dict(raw, path.parent)


def env_seed(default: int) -> int:
    """``THINMKT_SEED`` when set, else ``default``."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


@dataclass(eq=False)
class BacktestResult:
    zone: str
    dates: tuple  # evaluation days
    models: tuple
    classes: dict  # model -> univariate | multivariate
    actual: np.ndarray  # days x 96 (NaN when unknown)
    combined: np.ndarray  # days x 96
    forecasts: np.ndarray  # models x days x 96 (NaN when unavailable)
    lag_diff: np.ndarray  # days x 96 percent (NaN when undefined)
    ssm: list  # rows (date, block, model, pvalue, mean_loss, weight, eliminated_at)
    failures: list = field(default_factory=list)  # (date, model, reason)
    skipped: list = field(default_factory=list)  # (model, reason)

    def weights_at(self, day: date, block: int) -> dict:
        return {r[2]: r[5] for r in self.ssm if r[0] == day and r[1] == block and r[5] > 0}

    def top_models(self) -> dict:
        """Highest-weight superior model per (date, block); ties go to the first name."""
        best: dict = {}
        for d, b, m, _, _, w, step in self.ssm:
            if step != "" or w <= 0:
                continue
            cur = best.get((d, b))
            if cur is None or w > cur[1] or (w == cur[1] and m < cur[0]):
                best[(d, b)] = (m, w)
        return {k: v[0] for k, v in best.items()}

    def model_forecast(self, name: str) -> np.ndarray:
        return self.forecasts[self.models.index(name)]


# ---- data loading ---------------------------------------------------------

def _whole_days(prices: PriceSeries) -> PriceSeries:
    first = prices.start if prices.start.block == 1 else day_start(prices.start.date + timedelta(1))
    last = prices.end if prices.end.block == BLOCKS_PER_DAY else day_end(prices.end.date - timedelta(1))
    return prices.slice(first, last)


def load_data(plan: BacktestPlan):
    if plan.prices is None:
        raise ValueError("plan names no price file")
    for key in ("prices", "drivers"):
        p = getattr(plan, key)
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"{key} file not found: {p}")
    prices = parse_price_csv(Path(plan.prices))
    drivers = parse_driver_csv(Path(plan.drivers)) if plan.drivers else None
    return prices, drivers


# ---- forecasting pass -----------------------------------------------------

def _history(prices: PriceSeries, drivers: Optional[DriverMatrix], target: date):
    last = day_end(target - timedelta(days=1))
    if prices.end < last or prices.start > last:
        raise WindowError(f"no price history through {target - timedelta(days=1)}")
    p = prices.slice(prices.start, last)
    d = None
    if drivers is not None and drivers.start <= last:
        d = drivers.slice(drivers.start, min(last, drivers.end))
    return p, d


def _one_forecast(task):
    spec, prices, drivers, target, window, seed, holidays = task
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            values = forecast_day(spec, prices, drivers, target, window, seed, holidays)
        except (ThinMarketError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
            return None, f"{type(exc).__name__}: {exc}", [str(w.message) for w in caught]
    if values.shape != (BLOCKS_PER_DAY,) or not np.all(np.isfinite(values)):
        return None, "forecast is not 96 finite values", [str(w.message) for w in caught]
    return values, None, [str(w.message) for w in caught]


def _forecast_pass(specs, prices, drivers, days, plan, seed, progress):
    """Forecast matrix (models x days x 96), failures and skip notes."""
    F = np.full((len(specs), len(days), BLOCKS_PER_DAY), np.nan)
    failures, skipped = [], []
    tasks, where = [], []
    skip_seen = set()
    first_day = prices.start.date
    holidays = frozenset(plan.holidays)
    for j, d in enumerate(days):
        available = d.toordinal() - first_day.toordinal()
        for i, spec in enumerate(specs):
            try:
                window = training_window(spec, available, plan.window_policy, plan.min_train_days)
                hist_p, hist_d = _history(prices, drivers, d)
            except WindowError as exc:
                if spec.name not in skip_seen:
                    skipped.append((spec.name, str(exc)))
                    skip_seen.add(spec.name)
                failures.append((d, spec.name, f"skipped: {exc}"))
                continue
            tasks.append((spec, hist_p, hist_d, d, window, seed, holidays))
            where.append((i, j))
    if plan.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            results = list(pool.map(_one_forecast, tasks, chunksize=4))
    else:
        results = []
        for k, t in enumerate(tasks):
            results.append(_one_forecast(t))
            if progress and (k + 1) % max(1, len(specs)) == 0:
                progress(f"forecast {t[3]} ({k + 1}/{len(tasks)} fits)")
    for (i, j), (values, err, warns) in zip(where, results):
        for w in warns:
            log.info("%s %s: %s", days[j], specs[i].name, w)
        if err is None:
            F[i, j] = values
        else:
            failures.append((days[j], specs[i].name, err))
    return F, failures, skipped


# ---- MCS pass -------------------------------------------------------------

def ape(actual: np.ndarray, forecast: np.ndarray, floor: float = MAPE_FLOOR) -> np.ndarray:
    """Absolute percentage errors; NaN where the actual is at or below ``floor``."""
    a, f = np.broadcast_arrays(np.asarray(actual, dtype=float), np.asarray(forecast, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 100.0 * np.abs(a - f) / a
    out[~(a > floor)] = np.nan
    return out


def _run_seed(seed: int, day: date, block: int) -> int:
    return int(np.random.SeedSequence([seed, day.toordinal(), block]).generate_state(1)[0])


def _select(names, losses, cfg: McsConfig, seed: int):
    """MCS over the candidate rows of ``losses`` (models x observations)."""
    lm = LossMatrix(tuple(names), tuple(range(losses.shape[1])), losses)
    return mcs_run(lm, cfg.alpha, cfg.B, seed, cfg.block_len)


def _equal_set(names, means=None) -> SuperiorSet:
    w = 1.0 / len(names)
    return SuperiorSet(tuple(names), {n: 1.0 for n in names}, (), 0.0,
                       {n: w for n in names},
                       {n: float("nan") for n in names} if means is None else means)


def _mcs_for_day(j, names, F, losses, cfg: McsConfig, seed, day):
    """Per-block superior sets for forecast day index ``j``."""
    lo = max(0, j - cfg.window)
    have = [i for i in range(len(names)) if np.all(np.isfinite(F[i, j]))]
    sets = [None] * BLOCKS_PER_DAY
    cache = {}
    for b in range(1, BLOCKS_PER_DAY + 1):
        key = group_of(b) if cfg.pooled else (b, b)
        if key in cache:
            sets[b - 1] = cache[key]
            continue
        if not have:
            raise AllModelsFailed(f"every model failed on {day}")
        window = losses[have, lo:j, key[0] - 1:key[1]]  # models x days x width
        L = pooled_losses(window, (1, key[1] - key[0] + 1))
        obs_ok = np.all(np.isfinite(L), axis=0) | np.all(~np.isfinite(L), axis=0)
        L = L[:, obs_ok]
        full = [k for k in range(len(have)) if L.shape[1] and np.all(np.isfinite(L[k]))]
        cand = [names[have[k]] for k in full]
        if len(cand) >= 1 and L.shape[1] >= 2:
            ss = _select(cand, L[full], cfg, _run_seed(seed, day, b))
        elif cand:
            means = L[full].mean(axis=1) if L.shape[1] else np.zeros(len(cand))
            w = inverse_loss_weights(means) if L.shape[1] else np.full(len(cand), 1 / len(cand))
            ss = SuperiorSet(tuple(cand), {n: 1.0 for n in cand}, (), cfg.alpha,
                             dict(zip(cand, w.tolist())), dict(zip(cand, means.tolist())))
        else:
            ss = _equal_set([names[i] for i in have])
        cache[key] = ss
        sets[b - 1] = ss
    return sets


def run_backtest(plan: BacktestPlan, prices: Optional[PriceSeries] = None,
                 drivers: Optional[DriverMatrix] = None, progress=None,
                 allow_missing_actuals: bool = False) -> BacktestResult:
    """Forecast, select and combine for every evaluation day of ``plan``.

    Forecasting starts ``mcs.window`` days before the evaluation range so
    that the first evaluation day already has a full loss window.
    """
    if prices is None:
        prices, drivers = load_data(plan)
    prices = _whole_days(prices)
    seed = env_seed(plan.seed)
    specs = plan.specs()
    names = [s.name for s in specs]
    cfg = plan.mcs
    eval_days = plan.eval_days
    if eval_days[0] <= prices.start.date:
        raise DataError("evaluation range starts before any price history")
    warm = [eval_days[0] - timedelta(days=k) for k in range(cfg.window, 0, -1)]
    warm = [d for d in warm if d > prices.start.date]
    days = warm + eval_days
    last_needed = day_end(eval_days[-1] - timedelta(days=1))
    if prices.end < last_needed:
        raise DataError(f"prices end at {prices.end}, evaluation needs history to {last_needed}")

    F, failures, skipped = _forecast_pass(specs, prices, drivers, days, plan, seed, progress)
    actual = np.full((len(days), BLOCKS_PER_DAY), np.nan)
    lagd = np.full((len(days), BLOCKS_PER_DAY), np.nan)
    for j, d in enumerate(days):
        if day_end(d) <= prices.end:
            actual[j] = prices.day(d)
            prev = d - timedelta(days=1)
            if prices.start <= day_start(prev):
                p0 = prices.day(prev)
                with np.errstate(invalid="ignore", divide="ignore"):
                    ld = 100.0 * np.abs(actual[j] - p0) / p0
                ld[~(p0 > 0)] = np.nan
                lagd[j] = ld
    if not allow_missing_actuals and np.isnan(actual[len(warm):]).all(axis=1).any():
        raise DataError("evaluation range extends past the last price")
    losses = ape(actual[None, :, :], F)

    k0 = len(warm)
    combined = np.full((len(eval_days), BLOCKS_PER_DAY), np.nan)
    ssm_rows = []
    for j in range(k0, len(days)):
        d = days[j]
        sets = _mcs_for_day(j, names, F, losses, cfg, seed, d)
        for b, ss in enumerate(sets, start=1):
            idx = [names.index(m) for m in ss.survivors]
            w = np.array([ss.weights[m] for m in ss.survivors])
            combined[j - k0, b - 1] = max(0.0, float(w @ F[idx, j, b - 1]))
            for m in list(ss.survivors) + list(ss.eliminated):
                step = ss.eliminated_at(m)
                ssm_rows.append((d, b, m, float(ss.pvalues[m]), float(ss.mean_loss.get(m, np.nan)),
                                 float(ss.weights.get(m, 0.0)), "" if step is None else step))
        if progress:
            progress(f"combined {d}")
    eval_failures = [f for f in failures if f[0] >= eval_days[0]]
    return BacktestResult(prices.zone, tuple(eval_days), tuple(names),
                          {s.name: s.model_class for s in specs}, actual[k0:], combined,
                          F[:, k0:], lagd[k0:], ssm_rows, eval_failures, skipped)


# ---- persistence ----------------------------------------------------------

def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else repr(float(v))


def forecasts_csv(r: BacktestResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["date", "block", "actual", "combined", "lag_diff", *r.models])
    for j, d in enumerate(r.dates):
        for b in range(BLOCKS_PER_DAY):
            w.writerow([d.isoformat(), b + 1, _fmt(r.actual[j, b]), _fmt(r.combined[j, b]),
                        _fmt(r.lag_diff[j, b]), *(_fmt(r.forecasts[i, j, b])
                                                  for i in range(len(r.models)))])
    return out.getvalue()


def save_result(r: BacktestResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "forecasts.csv").write_text(forecasts_csv(r))
    (out / "ssm.csv").write_text(ssm_csv(r.ssm))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "class"])
    for m in r.models:
        w.writerow([m, r.classes[m]])
    (out / "models.csv").write_text(buf.getvalue())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "model", "reason"])
    for d, m, why in r.failures:
        w.writerow([d.isoformat(), m, why])
    (out / "failures.csv").write_text(buf.getvalue())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "reason"])
    w.writerows(r.skipped)
    (out / "skipped.csv").write_text(buf.getvalue())
    (out / "meta.json").write_text(json.dumps({"zone": r.zone}, indent=2) + "\n")
    return out


def _num(s: str) -> float:
    return float(s) if s != "" else math.nan


def load_result(in_dir) -> BacktestResult:
    src = Path(in_dir)
    if not (src / "forecasts.csv").is_file():
        raise FileNotFoundError(f"no stored backtest result in {src}")
    meta = json.loads((src / "meta.json").read_text())
    with open(src / "models.csv", newline="") as fh:
        classes = {row["model"]: row["class"] for row in csv.DictReader(fh)}
    with open(src / "forecasts.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        models = tuple(header[5:])
        rows = list(reader)
    dates = sorted({date.fromisoformat(r[0]) for r in rows})
    pos = {d: i for i, d in enumerate(dates)}
    n = len(dates)
    actual = np.full((n, BLOCKS_PER_DAY), np.nan)
    combined = actual.copy()
    lagd = actual.copy()
    F = np.full((len(models), n, BLOCKS_PER_DAY), np.nan)
    for r in rows:
        j, b = pos[date.fromisoformat(r[0])], int(r[1]) - 1
        actual[j, b], combined[j, b], lagd[j, b] = _num(r[2]), _num(r[3]), _num(r[4])
        F[:, j, b] = [_num(v) for v in r[5:]]
    ssm = []
    with open(src / "ssm.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            step = row["eliminated_at"]
            ssm.append((date.fromisoformat(row["date"]), int(row["block"]), row["model"],
                        float(row["mcs_pvalue"]), float(row["mean_loss"]), float(row["weight"]),
                        "" if step == "" else int(step)))
    failures = []
    with open(src / "failures.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            failures.append((date.fromisoformat(row["date"]), row["model"], row["reason"]))
    skipped = []
    if (src / "skipped.csv").is_file():
        with open(src / "skipped.csv", newline="") as fh:
            skipped = [(row["model"], row["reason"]) for row in csv.DictReader(fh)]
    return BacktestResult(meta["zone"], tuple(dates), models, classes, actual, combined, F,
                          lagd, ssm, failures, skipped)
