"""A short rolling backtest and the Lag_Diff bucket table.

Run with ``python3 demos/03_backtest_lag_diff.py [out_dir]``; takes under half a
minute on one core. Reports and SVG charts land in ``out_dir`` when given.
"""
import sys
from datetime import timedelta

from thinmkt.backtest import BacktestPlan, run_backtest, save_result
from thinmkt.evaluation import lag_diff_report, mape_report, write_reports
from thinmkt.sim import SimConfig, simulate

ds = simulate(SimConfig(days=50, seed=0))
start = ds.config.start

# Every model is refit each day on data up to the previous midnight. The
# first ten forecast days only fill the loss window, then the MCS runs per
# block. Window "clip" lets the one-year Holt-Winters run on 30-odd days.
plan = BacktestPlan(start + timedelta(days=35), start + timedelta(days=49),
                    models=("HW_1", "pred_SVM_nods_15", "Specf1", "svm_pca_15"),
                    overrides={"Specf1": {"M": 1000}}, window_policy="clip")
r = run_backtest(plan, ds.prices, ds.drivers, progress=print)

daily = mape_report(r, "daily")
print("\nmean daily MAPE:")
for name, v in zip(daily.series, daily.mean):
    print(f"  {name:<18} {v:5.2f}%")

# Which class carried the most weight, split by how far the price moved
# against the same block yesterday.
print()
print(lag_diff_report(r).to_csv())

if len(sys.argv) > 1:
    save_result(r, sys.argv[1])
    for p in write_reports(r, sys.argv[1], kinds=("mape", "lagdiff", "season", "charts")):
        print("wrote", p)
