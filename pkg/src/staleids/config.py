"""Scenario configuration: INI-style text with sections, validated into dataclasses.

Keys before the first section header belong to ``[run]``.  Example::

    scenario = ddos
    runs = 10

    [ids]
    theta = 1.5
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

from .ids import DDOS_WEIGHTS, SYN_WEIGHTS, Weights
from .traffic import DdosParams, LegitTrafficParams, SynFloodParams


class ConfigError(ValueError):
    pass


@dataclass
class IdsParams:
    clusters: int = 4
    theta: float = 1.5
    eps_r: float = 0.1
    weights: Weights = DDOS_WEIGHTS
    continuous: bool = False


@dataclass
class ScenarioConfig:
    scenario: str
    controllers: int
    polling: list[float]
    sync: list[float | None]
    runs: int = 10
    base_seed: int = 1
    attacks_per_run: int = 5
    attack_length: float = 30.0
    attack_gap_min: float = 60.0
    attack_gap_max: float = 120.0
    cooldown: float = 60.0
    training_duration: float = 600.0
    fresh_training: bool = True
    poll_phase: float = 0.0
    sync_phase: float = 0.0
    report: str = "remote"
    episode_bridge: int = 1
    traffic: LegitTrafficParams = field(default_factory=LegitTrafficParams)
    ddos: DdosParams = field(default_factory=DdosParams)
    syn: SynFloodParams = field(default_factory=SynFloodParams)
    ids: IdsParams = field(default_factory=IdsParams)
    out_dir: str = "results"
    emit_staleness: bool = False

    @property
    def sweep(self) -> list[tuple[float, float | None]]:
        return [(tp, ts) for tp in self.polling for ts in self.sync]

    @property
    def horizon_hint(self) -> float:
        return (self.training_duration + self.attacks_per_run
                * (self.attack_length + self.attack_gap_max) + self.cooldown)


SCENARIO_DEFAULTS = {
    "ddos": dict(controllers=2, polling=[2.0], sync=[2.0, 4.0, 8.0, 16.0],
                 attacks_per_run=5, report="remote", weights=DDOS_WEIGHTS),
    "syn": dict(controllers=1, polling=[2.0, 4.0, 8.0, 16.0, 32.0], sync=[None],
                attacks_per_run=1, report="all", weights=SYN_WEIGHTS),
}

# section -> key -> (target, kind)
_SCHEMA = {
    "run": {
        "scenario": ("scenario", "str"),
        "controllers": ("controllers", "int"),
        "polling": ("polling", "periods"),
        "sync": ("sync", "sync_periods"),
        "runs": ("runs", "int"),
        "base_seed": ("base_seed", "int"),
        "attacks_per_run": ("attacks_per_run", "int"),
        "attack_length": ("attack_length", "float"),
        "attack_gap_min": ("attack_gap_min", "float"),
        "attack_gap_max": ("attack_gap_max", "float"),
        "cooldown": ("cooldown", "float"),
        "training_duration": ("training_duration", "float"),
        "fresh_training": ("fresh_training", "bool"),
        "poll_phase": ("poll_phase", "float"),
        "sync_phase": ("sync_phase", "float"),
        "report": ("report", "str"),
        "episode_bridge": ("episode_bridge", "int"),
    },
    "traffic": {k: ("traffic." + k, t) for k, t in [
        ("flow_rate_sw1", "float"), ("flow_rate_sw2", "float"), ("flow_ttl", "float"),
        ("msg_rate_sw1", "float"), ("msg_rate_sw2", "float"), ("payload", "int"),
        ("active_client_fraction", "float")]},
    "ddos": {k: ("ddos." + k, t) for k, t in [
        ("cbr_msg_rate", "float"), ("cbr_payload", "int"), ("attackers_per_attack", "int")]},
    "syn": {k: ("syn." + k, t) for k, t in [
        ("syn_rate", "float"), ("syn_payload", "int"), ("syn_flow_ttl", "float")]},
    "ids": {
        "clusters": ("ids.clusters", "int"),
        "theta": ("ids.theta", "float"),
        "eps_r": ("ids.eps_r", "float"),
        "w_p": ("ids.w_p", "float"),
        "w_b": ("ids.w_b", "float"),
        "w_f": ("ids.w_f", "float"),
        "continuous": ("ids.continuous", "bool"),
    },
    "output": {
        "out_dir": ("out_dir", "str"),
        "emit_staleness": ("emit_staleness", "bool"),
    },
}


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> 1-based line number in the original text."""
    index = {}
    section = "run"
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"^([A-Za-z0-9_.-]+)\s*[=:]", s)
        if m:
            index.setdefault((section, m.group(1).lower()), n)
    return index


def _starts_with_section(text: str) -> bool:
    for line in text.splitlines():
        s = line.strip()
        if s and not s.startswith(("#", ";")):
            return s.startswith("[")
    return False


def _convert(kind: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind == "periods":
            return [float(x) for x in re.split(r"[,\s]+", raw) if x]
        if kind == "sync_periods":
            out = []
            for x in re.split(r"[,\s]+", raw):
                if not x:
                    continue
                out.append(None if x.lower() in ("none", "inf", "off") else float(x))
            return out
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from None
    raise AssertionError(kind)


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ScenarioConfig:
    """Parse and validate; ``overrides`` map ``section.key`` (or ``key`` for
    ``[run]``) to raw string values and win over the text."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    shift = 0 if _starts_with_section(text) else 1
    try:
        parser.read_string("[run]\n" * shift + text)
    except configparser.Error as exc:
        msg = re.sub(r"line (\d+)", lambda m: f"line {int(m.group(1)) - shift}", str(exc))
        raise ConfigError(f"malformed config: {msg}") from None
    lines = _line_index(text)

    values: dict[str, tuple[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            where = f"line {lines.get((section, key), '?')}: {section}.{key}"
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{where}: unknown key")
            values[f"{section}.{key}"] = (raw, where)
    for key, raw in (overrides or {}).items():
        full = key if "." in key else f"run.{key}"
        section, name = full.split(".", 1)
        if section not in _SCHEMA or name not in _SCHEMA[section]:
            raise ConfigError(f"override {key}: unknown key")
        values[full] = (str(raw), f"override {full}")

    parsed = {}
    for full, (raw, where) in values.items():
        section, name = full.split(".", 1)
        target, kind = _SCHEMA[section][name]
        parsed[target] = (_convert(kind, raw, where), where)

    if "scenario" not in parsed or not parsed["scenario"][0]:
        raise ConfigError("run.scenario: missing (expected 'ddos' or 'syn')")
    scenario, where = parsed.pop("scenario")
    scenario = scenario.lower()
    if scenario not in SCENARIO_DEFAULTS:
        raise ConfigError(f"{where}: unknown scenario {scenario!r} (expected 'ddos' or 'syn')")

    d = SCENARIO_DEFAULTS[scenario]
    cfg = ScenarioConfig(scenario, d["controllers"], list(d["polling"]), list(d["sync"]),
                         attacks_per_run=d["attacks_per_run"], report=d["report"])
    cfg.ids.weights = d["weights"]
    w = {"p": cfg.ids.weights.p, "b": cfg.ids.weights.b, "f": cfg.ids.weights.f}
    for target, (value, where) in parsed.items():
        if target.startswith("ids.w_"):
            w[target[-1]] = value
            continue
        obj = cfg
        *path, attr = target.split(".")
        for part in path:
            obj = getattr(obj, part)
        setattr(obj, attr, value)
    try:
        cfg.ids.weights = Weights(**w)
    except ValueError:
        raise ConfigError(f"ids.w_p/w_b/w_f: weights must be positive, got {w}") from None
    _validate(cfg, {t: wh for t, (_, wh) in parsed.items()})
    return cfg


def _validate(cfg: ScenarioConfig, where: dict[str, str]) -> None:
    def fail(target, msg):
        raise ConfigError(f"{where.get(target, target)}: {msg}")

    if not cfg.polling:
        fail("polling", "needs at least one polling period")
    for v in cfg.polling:
        if v <= 0:
            fail("polling", f"polling period must be positive, got {v}")
    if not cfg.sync:
        fail("sync", "needs at least one synchronization period (or 'none')")
    for v in cfg.sync:
        if v is not None and v <= 0:
            fail("sync", f"synchronization period must be positive, got {v}")
    if cfg.runs < 1:
        fail("runs", f"runs must be at least 1, got {cfg.runs}")
    if not 0 <= cfg.base_seed < 2**64:
        fail("base_seed", "seed must fit in 64 unsigned bits")
    if cfg.controllers not in (1, 2):
        fail("controllers", "must be 1 or 2")
    if cfg.attacks_per_run < 0:
        fail("attacks_per_run", "must be non-negative")
    if cfg.attack_length < 0:
        fail("attack_length", "must be non-negative")
    if not 0 <= cfg.attack_gap_min <= cfg.attack_gap_max:
        fail("attack_gap_min", "need 0 <= attack_gap_min <= attack_gap_max")
    if cfg.training_duration <= 0:
        fail("training_duration", "must be positive")
    if cfg.cooldown < 0:
        fail("cooldown", "must be non-negative")
    if cfg.report not in ("remote", "local", "all"):
        fail("report", "must be one of remote, local, all")
    if cfg.episode_bridge < 0:
        fail("episode_bridge", "must be non-negative")
    t = cfg.traffic
    for name in ("flow_rate_sw1", "flow_rate_sw2", "flow_ttl", "msg_rate_sw1", "msg_rate_sw2"):
        if getattr(t, name) <= 0:
            fail(f"traffic.{name}", "must be positive")
    if t.payload < 0:
        fail("traffic.payload", "must be non-negative")
    if not 0 <= t.active_client_fraction <= 1:
        fail("traffic.active_client_fraction", "must lie in [0, 1]")
    if cfg.ddos.cbr_msg_rate <= 0:
        fail("ddos.cbr_msg_rate", "must be positive")
    if cfg.ddos.attackers_per_attack < 1:
        fail("ddos.attackers_per_attack", "must be at least 1")
    if cfg.syn.syn_rate <= 0 or cfg.syn.syn_flow_ttl <= 0:
        fail("syn.syn_rate", "rate and flow ttl must be positive")
    if cfg.ids.clusters < 1:
        fail("ids.clusters", "must be at least 1")
    if cfg.ids.theta <= 0 or cfg.ids.eps_r < 0:
        fail("ids.theta", "theta must be positive and eps_r non-negative")
