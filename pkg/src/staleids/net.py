"""Data plane: hosts, switches, links and per-flow counters.

Deliveries are recorded as per-flow timestamp logs.  A counter's value at time
``t`` is the number of logged deliveries with timestamp ``<= t``, so a poll
sees exactly what had arrived by its instant regardless of whether deliveries
were pushed one by one or laid out in advance by a traffic generator.
"""

from __future__ import annotations

import enum
from bisect import bisect_right
from dataclasses import dataclass, field

from .kernel import EventKind, Kernel

MBPS = 1_000_000


class Role(enum.Enum):
    CLIENT = "client"
    SERVER = "server"


class Origin(enum.Enum):
    LEGIT = "legit"
    DDOS = "ddos"
    SYN = "syn"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Host:
    id: str
    role: Role
    switch: str


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    capacity: float  # bits per second


@dataclass
class Topology:
    switches: list[str]
    hosts: dict[str, Host]
    links: list[Link]
    controller_assignment: dict[str, str]

    def __post_init__(self):
        for h in self.hosts.values():
            if h.switch not in self.switches:
                raise TopologyError(f"host {h.id} attaches to unknown switch {h.switch}")
        missing = [s for s in self.switches if s not in self.controller_assignment]
        if missing:
            raise TopologyError(f"switches without a controller: {missing}")

    @property
    def controllers(self) -> list[str]:
        return sorted(set(self.controller_assignment.values()))

    def owned_by(self, controller: str) -> list[str]:
        return [s for s in self.switches if self.controller_assignment[s] == controller]

    def clients(self, switch: str | None = None) -> list[str]:
        return [h.id for h in self.hosts.values()
                if h.role is Role.CLIENT and (switch is None or h.switch == switch)]

    def servers(self) -> list[str]:
        return [h.id for h in self.hosts.values() if h.role is Role.SERVER]

    def switch_of(self, host: str) -> str:
        try:
            return self.hosts[host].switch
        except KeyError:
            raise TopologyError(f"unknown host {host!r}") from None

    def path(self, src: str, dst: str) -> list[str]:
        a, b = self.switch_of(src), self.switch_of(dst)
        return [a] if a == b else [a, b]


def two_domain_topology(controllers: int = 2, clients_per_switch: int = 32,
                        edge_mbps: float = 100, core_mbps: float = 1000) -> Topology:
    """Two switches joined by a core link, each with its clients and one server.

    ``controllers=2`` gives one controller per switch; ``controllers=1`` puts
    both switches under a single controller.
    """
    if controllers not in (1, 2):
        raise TopologyError("the two-switch topology supports 1 or 2 controllers")
    switches = ["sw1", "sw2"]
    hosts: dict[str, Host] = {}
    links = [Link("sw1", "sw2", core_mbps * MBPS)]
    for k, sw in enumerate(switches):
        for j in range(clients_per_switch):
            cid = f"c{k * clients_per_switch + j + 1}"
            hosts[cid] = Host(cid, Role.CLIENT, sw)
            links.append(Link(cid, sw, edge_mbps * MBPS))
        sid = f"s{k + 1}"
        hosts[sid] = Host(sid, Role.SERVER, sw)
        links.append(Link(sid, sw, edge_mbps * MBPS))
    if controllers == 2:
        assignment = {"sw1": "ctl1", "sw2": "ctl2"}
    else:
        assignment = {"sw1": "ctl1", "sw2": "ctl1"}
    for sw, ctl in assignment.items():
        links.append(Link(ctl, sw, edge_mbps * MBPS))
    return Topology(switches, hosts, links, assignment)


@dataclass(frozen=True)
class Flow:
    flow_id: int
    src: str
    dst: str
    start: float
    ttl: float
    msg_rate: float
    payload: int
    origin: Origin = Origin.LEGIT

    def __post_init__(self):
        if self.ttl < 0 or self.payload < 0:
            raise ValueError(f"flow {self.flow_id}: ttl and payload must be non-negative")

    @property
    def end(self) -> float:
        return self.start + self.ttl


@dataclass(frozen=True)
class FlowCounter:
    flow_id: int
    src: str
    dst: str
    packets: int
    bytes: int
    first_seen: float
    last_update: float
    expired_at: float | None = None


@dataclass(frozen=True)
class StatsSnapshot:
    switch_id: str
    captured_at: float
    counters: tuple[FlowCounter, ...]


@dataclass
class _FlowState:
    flow: Flow
    times: list[float] = field(default_factory=list)
    expired_at: float | None = None

    def counter(self, at: float) -> FlowCounter:
        n = bisect_right(self.times, at)
        f = self.flow
        expired = self.expired_at if self.expired_at is not None and self.expired_at <= at else None
        return FlowCounter(f.flow_id, f.src, f.dst, n, n * f.payload, f.start,
                           self.times[n - 1] if n else f.start, expired)


class Network:
    """Live data-plane state for one simulation run."""

    def __init__(self, topo: Topology, kernel: Kernel | None = None):
        self.topo = topo
        self.kernel = kernel
        self.flows: dict[int, _FlowState] = {}
        self.tables: dict[str, dict[int, _FlowState]] = {s: {} for s in topo.switches}
        self.dropped = 0
        self.dropped_bytes = 0

    def install_flow(self, flow: Flow):
        """Create zeroed counters on every switch along the flow's path.

        Returns the FlowExpire handle when a kernel is attached.
        """
        for host in (flow.src, flow.dst):
            if host not in self.topo.hosts:
                raise TopologyError(f"flow {flow.flow_id}: unknown host {host!r}")
        if flow.flow_id in self.flows:
            raise ValueError(f"flow {flow.flow_id} already installed")
        state = _FlowState(flow)
        self.flows[flow.flow_id] = state
        for sw in self.topo.path(flow.src, flow.dst):
            self.tables[sw][flow.flow_id] = state
        if self.kernel is not None:
            return self.kernel.schedule(flow.end, EventKind.FLOW_EXPIRE,
                                        lambda ev: self.expire(ev.payload),
                                        payload=flow.flow_id)
        return None

    def expire(self, flow_id: int, at: float | None = None) -> None:
        state = self.flows[flow_id]
        if state.expired_at is None:
            state.expired_at = self.kernel.now() if at is None else at

    def _accepts(self, state: _FlowState, at: float) -> bool:
        if at > state.flow.end:
            return False
        return state.expired_at is None or at <= state.expired_at

    def deliver_message(self, flow_id: int, at: float) -> bool:
        """Record one message; returns False (and counts a drop) past expiry."""
        state = self.flows[flow_id]
        if not self._accepts(state, at):
            self.dropped += 1
            self.dropped_bytes += state.flow.payload
            return False
        if state.times and at < state.times[-1]:
            raise ValueError(f"flow {flow_id}: delivery at {at} precedes logged deliveries")
        state.times.append(at)
        return True

    def schedule_deliveries(self, flow_id: int, times) -> int:
        """Lay out future deliveries in one go (sorted times); returns kept count."""
        state = self.flows[flow_id]
        kept = [t for t in times if self._accepts(state, t)]
        dropped = len(times) - len(kept)
        self.dropped += dropped
        self.dropped_bytes += dropped * state.flow.payload
        if state.times and kept and kept[0] < state.times[-1]:
            raise ValueError(f"flow {flow_id}: deliveries out of order")
        state.times.extend(kept)
        return len(kept)

    def query_stats(self, switch_id: str, at: float) -> StatsSnapshot:
        """Simulated STATS_REQUEST.

        Flows that expired since this switch's previous poll are reported one
        last time (flagged with their expiry instant) and then evicted.
        """
        try:
            table = self.tables[switch_id]
        except KeyError:
            raise TopologyError(f"unknown switch {switch_id!r}") from None
        counters = []
        evict = []
        for fid, state in table.items():
            if state.flow.start > at:
                continue
            c = state.counter(at)
            counters.append(c)
            if c.expired_at is not None:
                evict.append(fid)
        for fid in evict:
            del table[fid]
        return StatsSnapshot(switch_id, at, tuple(counters))
