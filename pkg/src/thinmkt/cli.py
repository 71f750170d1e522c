"""Command-line entry point: ``thinmkt simulate|backtest|forecast|report``.

Exit codes: 0 success, 2 configuration / plan / missing-file error,
3 when no model could forecast a needed day. Progress goes to stdout;
everything machine-readable is written to files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

from .backtest import env_seed, load_plan, load_result, run_backtest, save_result
from .core import BLOCKS_PER_DAY
from .errors import AllModelsFailed, ThinMarketError
from .evaluation import write_reports
from .sim import SimConfig, simulate, write_dataset

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED = 0, 2, 3
REPORT_KINDS = ("mape", "lagdiff", "season", "charts")


class ConfigError(Exception):
    pass


def _say(msg: str) -> None:
    print(msg, flush=True)


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{p} must hold a JSON object")
    return raw


def _plan(path: str, jobs):
    try:
        plan = load_plan(path)
    except (FileNotFoundError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if jobs is not None:
        plan = replace(plan, jobs=jobs)
    return plan


def cmd_simulate(args) -> int:
    raw = _read_json(args.config)
    try:
        cfg = SimConfig.from_dict(raw)
        cfg = replace(cfg, seed=env_seed(cfg.seed))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{args.config}: {exc}") from None
    ds = simulate(cfg)
    paths = write_dataset(ds, args.out)
    (Path(args.out) / "config.json").write_text(cfg.to_json() + "\n")
    _say(f"simulated {cfg.days} days for {cfg.zone} with {len(ds.shocks)} shocks -> "
         f"{paths['prices'].parent}")
    return EXIT_OK


def cmd_backtest(args) -> int:
    plan = _plan(args.plan, args.jobs)
    out = args.out or plan.output
    if out is None:
        raise ConfigError("no output directory: pass --out or set 'output' in the plan")
    try:
        r = run_backtest(plan, progress=_say if args.verbose else None)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    save_result(r, out)
    written = write_reports(r, out)
    _say(f"backtest {r.dates[0]}..{r.dates[-1]}: {len(r.models)} models, "
         f"{len(r.failures)} failed forecasts; {len(written) + 6} files in {out}")
    return EXIT_OK


def forecast_csv(r, day: date) -> str:
    j = r.dates.index(day)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "price", "weighting_detail"])
    for b in range(1, BLOCKS_PER_DAY + 1):
        detail = ";".join(f"{m}:{wt:.6f}" for m, wt in sorted(r.weights_at(day, b).items()))
        w.writerow([b, repr(float(r.combined[j, b - 1])), detail])
    return buf.getvalue()


def cmd_forecast(args) -> int:
    plan = _plan(args.plan, args.jobs)
    try:
        day = date.fromisoformat(args.date)
    except ValueError:
        raise ConfigError(f"bad --date {args.date!r}; expected YYYY-MM-DD") from None
    plan = replace(plan, eval_start=day, eval_end=day)
    try:
        r = run_backtest(plan, progress=_say if args.verbose else None,
                         allow_missing_actuals=True)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"forecast_{day.isoformat()}.csv"
    path.write_text(forecast_csv(r, day))
    _say(f"combined forecast for {day} -> {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        r = load_result(args.result)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    out = args.out or args.result
    written = write_reports(r, out, kinds=(args.kind,))
    _say(f"{args.kind}: {len(written)} file(s) in {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinmkt",
                                description="Thin-market day-ahead price forecasting.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic market")
    s.add_argument("--config", required=True, help="JSON simulation config")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    for name, func, help_ in (("backtest", cmd_backtest, "rolling backtest with MCS combination"),
                              ("forecast", cmd_forecast, "one-day combined forecast")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--plan", required=True, help="JSON backtest plan")
        s.add_argument("--out", required=name == "forecast", help="output directory")
        s.add_argument("--jobs", type=int, default=None, help="worker processes")
        s.add_argument("-v", "--verbose", action="store_true", help="per-day progress")
        if name == "forecast":
            s.add_argument("--date", required=True, help="target day YYYY-MM-DD")
        s.set_defaults(func=func)

    s = sub.add_parser("report", help="rebuild reports from a stored result")
    s.add_argument("--result", required=True, help="directory written by backtest")
    s.add_argument("--kind", required=True, choices=REPORT_KINDS)
    s.add_argument("--out", default=None, help="output directory (default: the result)")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AllModelsFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    except (ThinMarketError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
