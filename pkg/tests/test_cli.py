import json
import subprocess
import sys

import pytest

from thinmkt.cli import EXIT_ALL_FAILED, EXIT_CONFIG, EXIT_OK, main

SIM = {"days": 30, "seed": 5, "start": "2016-01-01"}


def plan(tmp_path, data, **kw):
    raw = {"eval_start": "2016-01-24", "eval_end": "2016-01-26",
           "prices": str(data / "prices.csv"), "drivers": str(data / "drivers.csv"),
           "models": ["HW_1", "pred_SVM_nods_15"], "window_policy": "clip",
           "mcs": {"B": 200}, **kw}
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(raw))
    return p


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    (root / "sim.json").write_text(json.dumps(SIM))
    assert main(["simulate", "--config", str(root / "sim.json"), "--out", str(root / "data")]) == 0
    return root / "data"


def test_simulate_writes_files(data):
    for name in ("prices.csv", "drivers.csv", "shocks.csv", "config.json"):
        assert (data / name).is_file()
    assert (data / "shocks.csv").read_text().startswith("kind,start_date,start_block,duration,magnitude")


def test_simulate_then_backtest(tmp_path, data, capsys):
    out = tmp_path / "bt"
    assert main(["backtest", "--plan", str(plan(tmp_path, data)), "--out", str(out)]) == EXIT_OK
    for name in ("forecasts.csv", "ssm.csv", "mape_daily.csv", "mape_blockwise.csv",
                 "lagdiff.csv", "season.csv"):
        assert (out / name).is_file()
    assert "backtest" in capsys.readouterr().out


def test_backtest_is_idempotent(tmp_path, data):
    p = plan(tmp_path, data)
    main(["backtest", "--plan", str(p), "--out", str(tmp_path / "a")])
    main(["backtest", "--plan", str(p), "--out", str(tmp_path / "b")])
    for name in ("forecasts.csv", "ssm.csv", "lagdiff.csv", "mape_daily.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_plan(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    assert main(["backtest", "--plan", str(missing), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert str(missing) in capsys.readouterr().err


def test_bad_plan_key(tmp_path, data, capsys):
    assert main(["backtest", "--plan", str(plan(tmp_path, data, colour="red")),
                 "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "colour" in capsys.readouterr().err


def test_bad_sim_config(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"days": 0}))
    assert main(["simulate", "--config", str(tmp_path / "bad.json"),
                 "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_all_models_fail(tmp_path, data):
    p = plan(tmp_path, data, models=["ARFIMA1"], window_policy="skip")
    assert main(["backtest", "--plan", str(p), "--out", str(tmp_path / "o")]) == EXIT_ALL_FAILED


def test_report_lagdiff_columns(tmp_path, data):
    out = tmp_path / "bt"
    main(["backtest", "--plan", str(plan(tmp_path, data)), "--out", str(out)])
    (out / "lagdiff.csv").unlink()
    assert main(["report", "--result", str(out), "--kind", "lagdiff"]) == EXIT_OK
    header = (out / "lagdiff.csv").read_text().splitlines()[1].split(",")
    assert len(header[1:]) == 4


def test_report_charts(tmp_path, data):
    out = tmp_path / "bt"
    main(["backtest", "--plan", str(plan(tmp_path, data)), "--out", str(out)])
    assert main(["report", "--result", str(out), "--kind", "charts", "--out",
                 str(tmp_path / "r")]) == EXIT_OK
    assert len(list((tmp_path / "r" / "charts").glob("*.svg"))) == 3


def test_report_missing_result(tmp_path):
    assert main(["report", "--result", str(tmp_path), "--kind", "mape"]) == EXIT_CONFIG


def test_forecast_day_after_data(tmp_path, data):
    out = tmp_path / "fc"
    assert main(["forecast", "--plan", str(plan(tmp_path, data)), "--date", "2016-01-31",
                 "--out", str(out)]) == EXIT_OK
    lines = (out / "forecast_2016-01-31.csv").read_text().splitlines()
    assert lines[0] == "block,price,weighting_detail" and len(lines) == 97
    block, price, detail = lines[1].split(",")
    assert block == "1" and float(price) > 0
    assert abs(sum(float(x.split(":")[1]) for x in detail.split(";")) - 1) < 1e-5


def test_forecast_bad_date(tmp_path, data):
    assert main(["forecast", "--plan", str(plan(tmp_path, data)), "--date", "31/01/2016",
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_seed_environment_override(tmp_path, monkeypatch):
    (tmp_path / "sim.json").write_text(json.dumps({"days": 2, "seed": 1}))
    outs = []
    for seed in ("7", "7", "8"):
        monkeypatch.setenv("THINMKT_SEED", seed)
        d = tmp_path / f"s{len(outs)}"
        main(["simulate", "--config", str(tmp_path / "sim.json"), "--out", str(d)])
        outs.append((d / "prices.csv").read_bytes())
        assert json.loads((d / "config.json").read_text())["seed"] == int(seed)
    assert outs[0] == outs[1] != outs[2]


def test_invalid_jobs(tmp_path, data):
    assert main(["backtest", "--plan", str(plan(tmp_path, data)), "--jobs", "0"]) == EXIT_CONFIG


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--config", "x", "--out", "y", "--colour", "red"])
    assert exc.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "thinmkt.cli", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
