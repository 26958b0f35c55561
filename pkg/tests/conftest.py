import os
import time

import pytest
from hypothesis import settings

from staleids.cli import run_experiment
from staleids.config import parse_config

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

# criterion number -> (passed, one-line description)
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, text: str) -> None:
    ACCEPTANCE[n] = (bool(ok), text)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}")


def _sweep(scenario: str, out: str, extra: str = ""):
    cfg = parse_config(f"scenario = {scenario}\n{extra}", {"output.out_dir": out})
    t0 = time.perf_counter()
    metrics, rows, text = run_experiment(cfg)
    return {"cfg": cfg, "metrics": metrics, "rows": rows, "text": text,
            "seconds": time.perf_counter() - t0, "out": out}


@pytest.fixture(scope="session")
def ddos_default(tmp_path_factory):
    """Full default ddos sweep (4 sync periods x 10 runs)."""
    return _sweep("ddos", str(tmp_path_factory.mktemp("ddos_a")))


@pytest.fixture(scope="session")
def ddos_default_again(tmp_path_factory):
    return _sweep("ddos", str(tmp_path_factory.mktemp("ddos_b")))


@pytest.fixture(scope="session")
def syn_default(tmp_path_factory):
    """Full default syn sweep (5 polling periods x 10 runs)."""
    return _sweep("syn", str(tmp_path_factory.mktemp("syn")))


def read_bytes(out: str, name: str) -> bytes:
    with open(os.path.join(out, name), "rb") as fh:
        return fh.read()
