import csv
import os

import pytest
from hypothesis import given, strategies as st

from staleids import cli
from staleids.cli import (RUN_COLUMNS, SUMMARY_COLUMNS, emit_summary, fmt, main, read_csv,
                          run_experiment, run_row)
from staleids.config import parse_config
from staleids.ids import load_model
from staleids.metrics import UNDETECTED, RunMetrics
from staleids.scenario import InvariantViolation, derive_seed, run_once

SMALL = "scenario = syn\npolling = 2, 4\nruns = 2\ntraining_duration = 120\n"


def test_small_sweep_writes_csvs(tmp_path):
    cfg = parse_config(SMALL, {"output.out_dir": str(tmp_path)})
    metrics, rows, text = run_experiment(cfg, dump_models=True)
    runs = read_csv(tmp_path / "runs.csv")
    assert len(runs) == 4 and list(runs[0]) == RUN_COLUMNS
    summary = read_csv(tmp_path / "summary.csv")
    assert [r["polling_period"] for r in summary] == ["2.000000", "4.000000"]
    assert list(summary[0]) == SUMMARY_COLUMNS
    assert "T_delta" in text and "polling period" in text
    models = sorted(os.listdir(tmp_path / "models"))
    assert len(models) == 4
    assert load_model(tmp_path / "models" / models[0]).total > 0


def test_csv_round_trip(tmp_path):
    cfg = parse_config(SMALL, {"output.out_dir": str(tmp_path)})
    metrics, rows, _ = run_experiment(cfg)
    for m, r in zip(metrics, read_csv(tmp_path / "runs.csv")):
        assert int(r["tp"]) == m.tp and int(r["fn"]) == m.fn and int(r["tn"]) == m.tn
        assert int(r["seed"]) == m.seed
        back = [float(x) for x in r["t_deltas"].split(";")]
        assert back == pytest.approx(m.t_delta, abs=5e-7)
    for row, r in zip(rows, read_csv(tmp_path / "summary.csv")):
        assert float(r["tp_mean"]) == pytest.approx(row.tp_mean, abs=5e-7)
        assert int(r["t_delta_excluded"]) == row.excluded


@given(st.lists(st.one_of(st.floats(0, 1e4), st.just(UNDETECTED)), min_size=1, max_size=6),
       st.integers(0, 50), st.integers(0, 10**6))
def test_run_row_round_trip(tds, fp, tn):
    tp = sum(1 for t in tds if t != UNDETECTED)
    m = RunMetrics(tp, fp, len(tds) - tp, tn, tds, run_id=3, seed=99, tau_p=2.0, tau_s=None)
    row = dict(zip(RUN_COLUMNS, next(csv.reader([",".join(run_row("syn", m))]))))
    assert row["sync_period"] == "none"
    assert (int(row["tp"]), int(row["fp"]), int(row["tn"])) == (tp, fp, tn)
    back = [float(x) for x in row["t_deltas"].split(";")]
    assert back == pytest.approx(tds, abs=5e-7)


def test_fmt():
    assert fmt(1.5) == "1.500000"
    assert fmt(UNDETECTED) == "inf"
    assert fmt(None) == "n/a"
    assert fmt(3) == "3"


def test_emit_summary_single_run_has_zero_se():
    cfg = parse_config("scenario = ddos")
    rows, text = emit_summary(cfg, [RunMetrics(2, 0, 3, 10, [1.0, 2.0] + [UNDETECTED] * 3,
                                               tau_p=2.0, tau_s=4.0)])
    assert rows[0].tp_se == 0.0 and "(3/5 excl.)" in text and "remote view" in text


def test_seed_depends_on_run_index_only():
    cfg = parse_config("scenario = ddos\ntraining_duration = 60\nattacks_per_run = 1")
    digests = {run_once(cfg, 2.0, ts, 1).traffic_digest for ts in (2.0, 16.0)}
    assert len(digests) == 1
    assert run_once(cfg, 2.0, 2.0, 2).traffic_digest not in digests
    assert derive_seed(1, 0) != derive_seed(1, 1) != derive_seed(2, 1)


def test_workers_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(parse_config(SMALL, {"output.out_dir": str(a)}), workers=1)
    run_experiment(parse_config(SMALL, {"output.out_dir": str(b)}), workers=2)
    for name in ("runs.csv", "summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_main_success(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL)
    code = main([str(cfg), "--polling", "2", "--runs", "1", "--out", str(tmp_path / "o"),
                 "--emit-staleness"])
    assert code == 0
    assert "syn scenario" in capsys.readouterr().out
    assert len(read_csv(tmp_path / "o" / "runs.csv")) == 1
    rows = read_csv(tmp_path / "o" / "staleness.csv")
    assert rows and all(float(r["age"]) <= 2.0 for r in rows if r["age"] != "n/a")


def test_main_config_error_exit_1(tmp_path, capsys):
    assert main(["--scenario", "ddos", "--polling", "-1", "--out", str(tmp_path)]) == 1
    assert "polling" in capsys.readouterr().err
    assert main([str(tmp_path / "missing.ini")]) == 1
    assert main([]) == 1


def test_main_unwritable_output_exit_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--scenario", "syn", "--polling", "2", "--runs", "1",
                 "--out", str(blocker / "sub")]) == 1


def test_main_invariant_violation_exit_2(tmp_path, monkeypatch):
    def broken(*a, **k):
        raise InvariantViolation("boom")
    monkeypatch.setattr(cli, "run_once", broken)
    assert main(["--scenario", "syn", "--runs", "1", "--out", str(tmp_path)]) == 2


def test_ddos_defaults_give_forty_rows(ddos_default):
    runs = read_csv(os.path.join(ddos_default["out"], "runs.csv"))
    assert len(runs) == 40
    summary = read_csv(os.path.join(ddos_default["out"], "summary.csv"))
    assert [r["sync_period"] for r in summary] == ["2.000000", "4.000000", "8.000000", "16.000000"]
    assert {r["view"] for r in summary} == {"remote"}
    assert all(int(r["attacks"]) == 5 for r in runs)


def test_syn_defaults_give_fifty_rows(syn_default):
    runs = read_csv(os.path.join(syn_default["out"], "runs.csv"))
    assert len(runs) == 50
    assert len(read_csv(os.path.join(syn_default["out"], "summary.csv"))) == 5
