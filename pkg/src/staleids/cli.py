"""Experiment driver: seeded sweeps over polling/sync periods, CSV + text output.

Exit codes: 0 success, 1 configuration or output-path error, 2 invariant
violation inside a run.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import ConfigError, ScenarioConfig, parse_config
from .ids import ClusterModel, dump_model
from .metrics import RunMetrics, SummaryRow, accuracy, precision, recall, summarize
from .scenario import InvariantViolation, run_once

log = logging.getLogger("staleids")

RUN_COLUMNS = [
    "scenario", "polling_period", "sync_period", "run", "seed", "attacks",
    "tp", "fp", "fn", "tn", "detected", "excluded", "t_delta_mean", "t_deltas",
    "precision", "recall", "accuracy",
]
SUMMARY_COLUMNS = [
    "scenario", "view", "polling_period", "sync_period", "runs", "attacks",
    "tp_mean", "tp_se", "fp_mean", "fp_se", "fn_mean", "fn_se",
    "t_delta_mean", "t_delta_se", "t_delta_detected", "t_delta_excluded",
    "precision_mean", "recall_mean", "accuracy_mean",
    "precision_pooled", "recall_pooled", "accuracy_pooled",
]
STALENESS_COLUMNS = ["polling_period", "sync_period", "run", "at", "controller",
                     "switch", "source", "age"]


def fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return f"{x:.6f}"
    return str(x)


def fmt_period(x) -> str:
    return "none" if x is None else fmt(float(x))


@dataclass
class RunRecord:
    metrics: RunMetrics
    staleness: list
    models: dict


def _job(args) -> RunRecord:
    cfg, tau_p, tau_s, k, want_models = args
    res = run_once(cfg, tau_p, tau_s, k)
    return RunRecord(res.metrics, res.staleness_rows,
                     {c: m.state() for c, m in res.models.items()} if want_models else {})


def run_row(scenario: str, m: RunMetrics) -> list[str]:
    detected = m.detected_times
    return [
        scenario, fmt_period(m.tau_p), fmt_period(m.tau_s), str(m.run_id), str(m.seed),
        str(m.attacks), str(m.tp), str(m.fp), str(m.fn), str(m.tn), str(len(detected)),
        str(m.attacks - len(detected)),
        fmt(sum(detected) / len(detected) if detected else None),
        ";".join(fmt(float(t)) for t in m.t_delta),
        fmt(precision(m.tp, m.fp)), fmt(recall(m.tp, m.fn)),
        fmt(accuracy(m.tp, m.tn, m.fp, m.fn)),
    ]


def summary_row(cfg: ScenarioConfig, r: SummaryRow) -> list[str]:
    return [
        cfg.scenario, cfg.report, fmt_period(r.tau_p), fmt_period(r.tau_s), str(r.runs),
        str(r.attacks), fmt(r.tp_mean), fmt(r.tp_se), fmt(r.fp_mean), fmt(r.fp_se),
        fmt(r.fn_mean), fmt(r.fn_se), fmt(r.t_delta_mean), fmt(r.t_delta_se),
        str(r.detected), str(r.excluded), fmt(r.precision_mean), fmt(r.recall_mean),
        fmt(r.accuracy_mean), fmt(r.precision_pooled), fmt(r.recall_pooled),
        fmt(r.accuracy_pooled),
    ]


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_summary(cfg: ScenarioConfig, runs: list[RunMetrics], path: str | None = None):
    """Summary rows as a text table; also written as CSV when ``path`` is given."""
    rows = summarize(runs)
    if path is not None:
        _write_csv(path, SUMMARY_COLUMNS, [summary_row(cfg, r) for r in rows])
    out = io.StringIO()
    sweep = "sync" if cfg.scenario == "ddos" else "polling"
    out.write(f"{cfg.scenario} scenario, {cfg.report} view, {cfg.runs} runs per point\n")
    out.write(f"{'tau_p':>6} {'tau_s':>6} {'TP':>11} {'FP':>11} {'FN':>11} "
              f"{'T_delta (s)':>28} {'P':>6} {'R':>6} {'A':>6}\n")
    for r in rows:
        td = r.t_delta_text()
        if r.t_delta_mean is not None:
            td = f"{r.t_delta_mean:.2f}±{r.t_delta_se:.2f} ({r.excluded}/{r.attacks} excl.)"

        def pm(m, se):
            return f"{m:.2f}±{se:.2f}"

        def opt(x):
            return "n/a" if x is None else f"{x:.3f}"

        out.write(f"{fmt_period(r.tau_p)[:6]:>6} {fmt_period(r.tau_s)[:6]:>6} "
                  f"{pm(r.tp_mean, r.tp_se):>11} {pm(r.fp_mean, r.fp_se):>11} "
                  f"{pm(r.fn_mean, r.fn_se):>11} {td:>28} {opt(r.precision_mean):>6} "
                  f"{opt(r.recall_mean):>6} {opt(r.accuracy_mean):>6}\n")
    out.write(f"(swept variable: {sweep} period; T_delta averages detected attacks only)\n")
    return rows, out.getvalue()


def run_experiment(cfg: ScenarioConfig, workers: int = 1, dump_models: bool = False):
    """Run every sweep point x run, write runs.csv / summary.csv, return metrics."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    jobs = [(cfg, tp, ts, k, dump_models) for tp, ts in cfg.sweep for k in range(cfg.runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_job, jobs))
    else:
        records = [_job(j) for j in jobs]

    metrics = [r.metrics for r in records]
    _write_csv(os.path.join(cfg.out_dir, "runs.csv"), RUN_COLUMNS,
               [run_row(cfg.scenario, m) for m in metrics])
    rows, text = emit_summary(cfg, metrics, os.path.join(cfg.out_dir, "summary.csv"))
    if cfg.emit_staleness:
        _write_csv(os.path.join(cfg.out_dir, "staleness.csv"), STALENESS_COLUMNS,
                   ([fmt_period(r.metrics.tau_p), fmt_period(r.metrics.tau_s),
                     str(r.metrics.run_id), fmt(at), c, sw, src, fmt(age)]
                    for r in records for at, c, sw, src, age in r.staleness))
    if dump_models:
        mdir = os.path.join(cfg.out_dir, "models")
        os.makedirs(mdir, exist_ok=True)
        for r in records:
            m = r.metrics
            for c, state in r.models.items():
                name = f"tp{fmt_period(m.tau_p)}_ts{fmt_period(m.tau_s)}_run{m.run_id}_{c}.json"
                dump_model(ClusterModel.from_state(state), os.path.join(mdir, name))
    return metrics, rows, text


def read_csv(path: str) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="staleids",
        description="Simulate how stale controller views degrade a K-means anomaly IDS.")
    p.add_argument("config", nargs="?", help="scenario config file (INI-style)")
    p.add_argument("--scenario", choices=["ddos", "syn"])
    p.add_argument("--polling", help="comma-separated polling periods (s)")
    p.add_argument("--sync", help="comma-separated sync periods (s), 'none' disables")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--emit-staleness", action="store_true",
                   help="also write per-tick view ages to staleness.csv")
    p.add_argument("--dump-models", action="store_true",
                   help="write trained centroids/radii as JSON under <out>/models")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    for key, val in [("scenario", args.scenario), ("polling", args.polling),
                     ("sync", args.sync), ("runs", args.runs), ("base_seed", args.seed),
                     ("output.out_dir", args.out)]:
        if val is not None:
            overrides[key] = str(val)
    if args.emit_staleness:
        overrides["output.emit_staleness"] = "true"
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        cfg = parse_config(text, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        _, _, table = run_experiment(cfg, workers=args.workers, dump_models=args.dump_models)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(table)
    return 0


if __name__ == "__main__":
    sys.exit(main())
