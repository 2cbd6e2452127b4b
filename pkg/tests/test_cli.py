import csv
import json
import os

import numpy as np
import pytest

from quantvol.cli import DATA_DIR_ENV, main
from quantvol.quantilogram import CrossQuantilogramResult


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert main(["simulate", "--kind", "qa", "--T", "600", "--seed", "3", "--out", str(d / "y.csv")]) == 0
    return d


def run(*args):
    return main([str(a) for a in args])


def test_simulate_writes_standard_schema(data):
    with open(data / "y.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["date", "ret", "rk"]
    assert len(rows) == 601
    assert (data / "y_driver.csv").exists()


def test_simulate_params_and_kind(tmp_path):
    assert run("simulate", "--kind", "ar1", "--T", 50, "--params", '{"phi": 0.2}', "--out-dir", tmp_path) == 0
    assert (tmp_path / "sim_ar1.csv").exists()
    assert run("simulate", "--kind", "gjr", "--T", 50, "--params", '{"beta": 2}', "--out-dir", tmp_path) == 1


def test_ingest(data, tmp_path, capsys):
    assert run("ingest", data / "y.csv", "--demean", "--out-dir", tmp_path) == 0
    stored = json.loads((tmp_path / "y.json").read_text())
    assert stored["demeaned"] is True and abs(np.mean(stored["ret"])) < 1e-12
    assert "600 rows" in capsys.readouterr().out


def test_xquant_deterministic_and_stars(data, tmp_path):
    args = ["--boot-reps", 60, "xquant", data / "y.csv", data / "y_driver.csv", "--max-lag", 3,
            "--ranges", "0,0.05;0.4,0.6", "--format", "svg-bars"]
    assert run(*args, "--out-dir", tmp_path / "a") == 0
    assert run(*args, "--out-dir", tmp_path / "b") == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "xquant_y_y_driver_0-0.05_0-0.05.svg" in files
    assert "xquant_y_y_driver_summary.json" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert not any(n.endswith(".tmp") for n in files)

    summary = tmp_path / "a" / "xquant_y_y_driver_summary.json"
    assert run("report", "--xquant", summary, "--out-dir", tmp_path / "r") == 0
    with open(tmp_path / "r" / "table_lag1.csv") as fh:
        table = list(csv.reader(fh))
    cells = json.loads(summary.read_text())["cells"]
    assert table[0] == ["range", "y_driver->y"]
    for row, cell in zip(table[1:], cells):
        res = CrossQuantilogramResult.from_dict(cell)
        assert row[1].endswith("*") == bool(res.significant[0])
        assert float(row[1].rstrip("*")) == pytest.approx(res.rho[0], abs=5e-4)


def test_xquant_cross_mode_and_residualize(data, tmp_path):
    assert run("xquant", data / "y.csv", data / "y_driver.csv", "--mode", "cross", "--residualize", "both",
               "--ranges", "0.4,0.6", "--boot-reps", 20, "--max-lag", 2, "--out-dir", tmp_path, "--format", "json") == 0
    summary = json.loads((tmp_path / "xquant_y_resid_y_driver_resid_summary.json").read_text())
    assert [c["tau2"] for c in summary["cells"]] == [[0.0, 0.05], [0.95, 1.0]]
    assert summary["residualize"] == "both"


def test_auto(data, tmp_path):
    assert run("auto", data / "y.csv", "--boot-reps", 20, "--max-lag", 2, "--ranges", "0,0.1", "--out-dir", tmp_path) == 0
    assert (tmp_path / "auto_y_0-0.1.csv").exists()


def test_fits_evaluate_and_report(data, tmp_path):
    out = tmp_path
    assert run("fit-garch", data / "y.csv", "--out-dir", out) == 0
    assert run("fit-garch", data / "y.csv", "--model", "gjr-t", "--out-dir", out) == 0
    assert run("fit-garch", data / "y.csv", "--model", "heavy", "--out-dir", out) == 0
    assert run("fit-qa", data / "y.csv", "--driver", data / "y_driver.csv", "--tails", "0.05,0.95", "--out-dir", out) == 0
    assert run("fit-qa", data / "y.csv", "--driver", data / "y_driver.csv", "--base", "heavy",
               "--driver-source", "residuals", "--out-dir", out) == 0
    assert run("fit-garchx", data / "y.csv", "--driver", data / "y_driver.csv", "--out-dir", out) == 0

    qa = json.loads((out / "fit_qa_gjr_returns_y_y_driver.json").read_text())
    assert {"q_lo", "q_hi", "delta", "sigma2", "base"} <= set(qa)
    gjr = json.loads((out / "fit_gjr_y.json").read_text())
    assert gjr["converged"] and len(gjr["sigma2"]) == 600 and "ljung_box" in gjr

    assert run("evaluate", "--base", out / "fit_gjr_y.json", "--alt", out / "fit_qa_gjr_returns_y_y_driver.json",
               "--series", data / "y.csv", "--proxy", "rk", "--out-dir", out) == 0
    rec = json.loads((out / "dmw_qa_gjr_vs_gjr_y.json").read_text())[0]
    assert rec["setting"] == "in-sample" and rec["T"] == 600

    assert run("report", "--dmw", out / "dmw_qa_gjr_vs_gjr_y.json", "--out-dir", out, "--format", "json") == 0
    table = json.loads((out / "table_dmw.json").read_text())
    assert table["columns"] == ["y in-sample"]
    assert list(table["rows"]) == ["qa-gjr vs gjr"]


def test_oos(data, tmp_path):
    assert run("oos", data / "y.csv", "--driver", data / "y_driver.csv", "--window", 570,
               "--models", "gjr,qa-gjr,garchx", "--out-dir", tmp_path) == 0
    with open(tmp_path / "oos_losses_y.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["date", "fit_through", "gjr", "qa-gjr", "garchx"]
    assert len(rows) == 31
    assert all(r[1] < r[0] for r in rows[1:])
    dmw = json.loads((tmp_path / "oos_dmw_y.json").read_text())
    assert [(r["alt"], r["base"]) for r in dmw] == [("qa-gjr", "gjr"), ("garchx", "gjr")]


def test_errors_give_nonzero_exit(tmp_path, capsys):
    assert run("fit-garch", tmp_path / "missing.csv") == 1
    assert "error" in capsys.readouterr().err
    assert run("report", "--out-dir", tmp_path) == 1
    assert "--xquant" in capsys.readouterr().err
    assert run("evaluate", "--out-dir", tmp_path) == 1
    with pytest.raises(SystemExit) as exc:
        run("fit-garch", "x.csv", "--model", "egarch")
    assert exc.value.code == 2


def test_config_file_and_flag_precedence(data, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[quantvol]\nboot_reps = 7\nformat = json\n\n[xquant]\nmax_lag = 2\n")
    assert run("xquant", data / "y.csv", data / "y_driver.csv", "--ranges", "0,0.1", "--config", cfg,
               "--max-lag", 3, "--out-dir", tmp_path) == 0
    cell = json.loads((tmp_path / "xquant_y_y_driver_0-0.1_0-0.1.json").read_text())
    assert cell["B"] == 7
    assert len(cell["rows"]) == 3


def test_data_dir_environment(data, tmp_path, monkeypatch):
    monkeypatch.setenv(DATA_DIR_ENV, str(data))
    monkeypatch.chdir(tmp_path)
    assert run("ingest", "y.csv", "--out-dir", tmp_path) == 0
    assert (tmp_path / "y.json").exists()
