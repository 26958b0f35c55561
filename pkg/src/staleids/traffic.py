"""Legitimate Poisson workload plus the DDoS (CBR) and SYN-flood attack workloads."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import EventKind, Kernel, RandomSource
from .net import Flow, Network, Origin, Topology


@dataclass
class LegitTrafficParams:
    flow_rate_sw1: float = 3.0
    flow_rate_sw2: float = 4.0
    flow_ttl: float = 2.0
    msg_rate_sw1: float = 34.0
    msg_rate_sw2: float = 30.0
    payload: int = 512
    active_client_fraction: float = 0.5

    def flow_rate(self, switch: str) -> float:
        return self.flow_rate_sw1 if switch == "sw1" else self.flow_rate_sw2

    def msg_rate(self, switch: str) -> float:
        return self.msg_rate_sw1 if switch == "sw1" else self.msg_rate_sw2


@dataclass
class DdosParams:
    cbr_msg_rate: float = 50.0
    cbr_payload: int = 512
    attackers_per_attack: int = 4


@dataclass
class SynFloodParams:
    syn_rate: float = 100.0
    syn_payload: int = 64
    syn_flow_ttl: float = 1.0


class AttackKind(enum.Enum):
    DDOS = "ddos"
    SYN_FLOOD = "syn_flood"


@dataclass(frozen=True)
class AttackWindow:
    attack_id: int
    start: float
    end: float
    kind: AttackKind
    attackers: tuple[str, ...]
    targets: tuple[str, ...]

    @property
    def subjects(self) -> tuple[str, ...]:
        """Hosts whose verdicts can legitimately detect this attack."""
        return self.targets if self.kind is AttackKind.DDOS else self.attackers


@dataclass
class PlannedFlow:
    flow: Flow
    times: list[float] = field(default_factory=list)


class FlowIds:
    def __init__(self, start: int = 1):
        self._it = itertools.count(start)

    def __call__(self) -> int:
        return next(self._it)


def split_clients(topo: Topology, active_fraction: float, rng: RandomSource):
    """Bernoulli active/dormant split of every client, in topology order."""
    clients = topo.clients()
    mask = rng.bernoulli(active_fraction, len(clients))
    active = [c for c, m in zip(clients, mask) if m]
    dormant = [c for c, m in zip(clients, mask) if not m]
    return active, dormant


def _poisson_times(rng: RandomSource, rate: float, t0: float, t1: float) -> np.ndarray:
    """Arrival instants of a rate-``rate`` Poisson process on (t0, t1]."""
    span = t1 - t0
    if span <= 0:
        return np.empty(0)
    out = []
    t = t0
    chunk = int(rate * span + 6 * math.sqrt(rate * span) + 16)
    while True:
        arr = t + np.cumsum(rng.exponentials(rate, chunk))
        if arr[-1] > t1:
            out.append(arr[arr <= t1])
            break
        out.append(arr)
        t = arr[-1]
    return np.concatenate(out)


def flow_start_times(params: LegitTrafficParams, switch: str, horizon: float,
                     stream: RandomSource) -> np.ndarray:
    """Flow arrivals of one domain; ``gen_legit`` draws these first from the
    domain's stream, so a dry run on the same stream sees the same starts."""
    return _poisson_times(stream, params.flow_rate(switch), 0.0, horizon)


def gen_legit(params: LegitTrafficParams, topo: Topology, horizon: float,
              rng: RandomSource, active: list[str], ids: FlowIds) -> list[PlannedFlow]:
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    servers = topo.servers()
    planned = []
    active_set = set(active)
    for sw in topo.switches:
        sources = [c for c in topo.clients(sw) if c in active_set]
        if not sources:
            continue
        stream = rng.stream(f"legit:{sw}")
        starts = flow_start_times(params, sw, horizon, stream)
        src_idx = stream.integers(0, len(sources), size=len(starts))
        dst_idx = stream.integers(0, len(servers), size=len(starts))
        p = params.msg_rate(sw)
        for start, si, di in zip(starts.tolist(), src_idx.tolist(), dst_idx.tolist()):
            flow = Flow(ids(), sources[si], servers[di], start, params.flow_ttl, p,
                        params.payload, Origin.LEGIT)
            msgs = _poisson_times(stream, p, start, start + params.flow_ttl)
            planned.append(PlannedFlow(flow, msgs.tolist()))
    planned.sort(key=lambda pf: (pf.flow.start, pf.flow.flow_id))
    return planned


def select_ddos_attackers(topo: Topology, dormant: list[str], count: int,
                          rng: RandomSource) -> tuple[str, ...]:
    """Sample ``count`` dormant clients, split as evenly as possible across domains."""
    dormant_set = set(dormant)
    pools = [[c for c in topo.clients(sw) if c in dormant_set] for sw in topo.switches]
    if not any(pools):
        raise ValueError("no dormant clients available as DDoS attackers")
    chosen = []
    want = [count // len(pools) + (1 if i < count % len(pools) else 0)
            for i in range(len(pools))]
    for pool, k in zip(pools, want):
        k = min(k, len(pool))
        if k:
            chosen.extend(rng.choice(pool, size=k, replace=False))
    return tuple(chosen)


def gen_ddos(params: DdosParams, window: AttackWindow, topo: Topology,
             ids: FlowIds) -> list[PlannedFlow]:
    """One constant-bit-rate flow per (attacker, server), spanning the window."""
    if not window.attackers:
        raise ValueError(f"attack {window.attack_id}: empty attacker set")
    length = window.end - window.start
    n = int(math.floor(length * params.cbr_msg_rate + 1e-9))
    times = [window.start + k / params.cbr_msg_rate for k in range(1, n + 1)]
    times = [t for t in times if t <= window.end]
    planned = []
    for attacker in window.attackers:
        for server in window.targets:
            flow = Flow(ids(), attacker, server, window.start, length,
                        params.cbr_msg_rate, params.cbr_payload, Origin.DDOS)
            planned.append(PlannedFlow(flow, list(times)))
    return planned


def gen_syn_flood(params: SynFloodParams, window: AttackWindow, attacker: str,
                  topo: Topology, rng: RandomSource, ids: FlowIds) -> list[PlannedFlow]:
    """Half-open connections: single-message flows at Poisson instants."""
    servers = topo.servers()
    t0 = max(window.start, 0.0)
    starts = _poisson_times(rng, params.syn_rate, t0, window.end)
    dst_idx = rng.integers(0, len(servers), size=len(starts))
    planned = []
    for start, di in zip(starts.tolist(), dst_idx.tolist()):
        flow = Flow(ids(), attacker, servers[di], start, params.syn_flow_ttl,
                    params.syn_rate, params.syn_payload, Origin.SYN)
        planned.append(PlannedFlow(flow, [start]))
    return planned


def plan_attack_windows(count: int, length: float, not_before: float,
                        gap_min: float, gap_max: float, rng: RandomSource):
    """Non-overlapping (start, end) pairs, each preceded by a uniform gap."""
    windows = []
    t = not_before
    for _ in range(count):
        start = t + gap_min + (gap_max - gap_min) * float(rng.random())
        windows.append((start, start + length))
        t = start + length
    return windows


def schedule_flows(kernel: Kernel, net: Network, planned: list[PlannedFlow]) -> None:
    """Install each flow at its start instant and lay out its deliveries."""
    def start(ev):
        pf = ev.payload
        net.install_flow(pf.flow)
        net.schedule_deliveries(pf.flow.flow_id, pf.times)

    for pf in planned:
        kernel.schedule(pf.flow.start, EventKind.FLOW_START, start, payload=pf)


def schedule_attack_markers(kernel: Kernel, windows: list[AttackWindow], log=None) -> None:
    def mark(ev):
        if log is not None:
            log.append((ev.kind.value, ev.payload.attack_id, ev.fire_at))

    for w in windows:
        kernel.schedule(w.start, EventKind.ATTACK_START, mark, payload=w)
        kernel.schedule(w.end, EventKind.ATTACK_END, mark, payload=w)
