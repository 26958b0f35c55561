"""Network state collection (polling) and controllers' state distribution (sync).

Each controller keeps, per switch it has data for, a ``SwitchLedger``: an
append-only history of counter changes derived from successive poll replies.
A ledger read through an ``as_of`` bound is an immutable cumulative view, so a
sync can hand the peer a (ledger, as_of) pair instead of deep-copying it.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .kernel import EventKind, Kernel
from .net import Network, StatsSnapshot, Topology

NEVER_SYNCED = math.inf

PRIO_POLL, PRIO_SYNC, PRIO_EVAL = 0, 1, 2


class SubjectLog:
    """Per-host change records (one per flow per poll in which it changed)."""

    __slots__ = ("times", "flow_ids", "cum_p", "cum_b", "flow_p", "flow_b",
                 "first_seen", "last_update")

    def __init__(self):
        self.times: list[float] = []
        self.flow_ids: list[int] = []
        self.cum_p = [0]
        self.cum_b = [0]
        self.flow_p: list[int] = []
        self.flow_b: list[int] = []
        self.first_seen: list[float] = []
        self.last_update: list[float] = []

    def append(self, t, fid, dp, db, c):
        self.times.append(t)
        self.flow_ids.append(fid)
        self.cum_p.append(self.cum_p[-1] + dp)
        self.cum_b.append(self.cum_b[-1] + db)
        self.flow_p.append(c.packets)
        self.flow_b.append(c.bytes)
        self.first_seen.append(c.first_seen)
        self.last_update.append(c.last_update)

    def span(self, t0: float, t1: float) -> tuple[int, int]:
        """Record index range for polls in (t0, t1]."""
        return bisect_right(self.times, t0), bisect_right(self.times, t1)


class SwitchLedger:
    def __init__(self, switch_id: str):
        self.switch_id = switch_id
        self.poll_times: list[float] = []
        self.by_dst: dict[str, SubjectLog] = {}
        self.by_src: dict[str, SubjectLog] = {}
        self._known: dict[int, tuple[int, int]] = {}

    def ingest(self, snap: StatsSnapshot) -> None:
        t = snap.captured_at
        if self.poll_times and t <= self.poll_times[-1]:
            raise ValueError(f"{self.switch_id}: poll at {t} is not after {self.poll_times[-1]}")
        self.poll_times.append(t)
        known = self._known
        for c in snap.counters:
            prev = known.get(c.flow_id)
            if prev is None:
                dp, db = c.packets, c.bytes
            else:
                dp, db = c.packets - prev[0], c.bytes - prev[1]
            if prev is None or dp > 0:
                log = self.by_dst.get(c.dst)
                if log is None:
                    log = self.by_dst[c.dst] = SubjectLog()
                log.append(t, c.flow_id, dp, db, c)
                log = self.by_src.get(c.src)
                if log is None:
                    log = self.by_src[c.src] = SubjectLog()
                log.append(t, c.flow_id, dp, db, c)
            if c.expired_at is None:
                known[c.flow_id] = (c.packets, c.bytes)
            else:
                known.pop(c.flow_id, None)

    def previous_poll(self, as_of: float) -> float | None:
        """Poll instant immediately preceding ``as_of`` (None for the first poll)."""
        i = bisect_right(self.poll_times, as_of) - 1
        return self.poll_times[i - 1] if i >= 1 else None


@dataclass(frozen=True)
class SwitchView:
    switch_id: str
    snapshot: StatsSnapshot | None
    ledger: SwitchLedger | None
    as_of: float | None
    remote: bool

    @property
    def never_synced(self) -> bool:
        return self.ledger is None


@dataclass(frozen=True)
class MergedView:
    as_of: float
    per_switch: dict[str, SwitchView]


@dataclass
class ControllerView:
    controller_id: str
    owned: list[str]
    polling_period: float
    sync_period: float | None
    local: dict[str, StatsSnapshot] = field(default_factory=dict)
    ledgers: dict[str, SwitchLedger] = field(default_factory=dict)
    remote: dict[str, SwitchView] = field(default_factory=dict)
    last_sync_at: float | None = None

    def __post_init__(self):
        for sw in self.owned:
            self.ledgers.setdefault(sw, SwitchLedger(sw))


def poll(view: ControllerView, net: Network, at: float) -> ControllerView:
    for sw in view.owned:
        snap = net.query_stats(sw, at)
        view.ledgers[sw].ingest(snap)
        view.local[sw] = snap
    return view


def _export(view: ControllerView) -> dict[str, SwitchView]:
    return {sw: SwitchView(sw, snap, view.ledgers[sw], snap.captured_at, True)
            for sw, snap in view.local.items()}


def sync(view_a: ControllerView, view_b: ControllerView, at: float):
    """Full-state exchange: each side's remote map becomes the peer's local map."""
    from_a, from_b = _export(view_a), _export(view_b)
    view_a.remote = from_b
    view_b.remote = from_a
    view_a.last_sync_at = view_b.last_sync_at = at
    return view_a, view_b


def merged_view(view: ControllerView, at: float, topo: Topology) -> MergedView:
    per_switch = {}
    for sw in topo.switches:
        if sw in view.owned:
            snap = view.local.get(sw)
            per_switch[sw] = SwitchView(sw, snap, view.ledgers[sw] if snap else None,
                                        snap.captured_at if snap else None, False)
        elif sw in view.remote:
            per_switch[sw] = view.remote[sw]
        else:
            per_switch[sw] = SwitchView(sw, StatsSnapshot(sw, at, ()), None, None, True)
    return MergedView(at, per_switch)


def staleness(view: ControllerView, switch_id: str, at: float, topo: Topology) -> float:
    if switch_id not in topo.switches:
        raise KeyError(switch_id)
    sv = merged_view(view, at, topo).per_switch[switch_id]
    return NEVER_SYNCED if sv.as_of is None else at - sv.as_of


def next_on_grid(after: float, period: float, phase: float = 0.0) -> float:
    """Smallest ``phase + k*period`` strictly greater than ``after``."""
    k = math.floor((after - phase) / period) + 1
    t = phase + k * period
    while t <= after:
        k += 1
        t = phase + k * period
    return t


class ControlPlane:
    """Drives polling, syncing and evaluation ticks on the kernel.

    During the training phase (before ``training_end``) controllers sync on
    every poll when ``fresh_training`` is set, so the model never learns from a
    stale view; afterwards syncs follow ``sync_period``.
    """

    def __init__(self, kernel: Kernel, net: Network, polling_period: float,
                 sync_period: float | None, *, training_end: float = 0.0,
                 fresh_training: bool = True, poll_phase: float = 0.0,
                 sync_phase: float = 0.0, on_eval=None):
        if polling_period <= 0:
            raise ValueError("polling period must be positive")
        if sync_period is not None and sync_period <= 0:
            raise ValueError("sync period must be positive")
        self.kernel = kernel
        self.net = net
        self.topo = net.topo
        self.tp = polling_period
        self.ts = sync_period
        self.training_end = training_end
        self.fresh_training = fresh_training
        self.poll_phase = poll_phase
        self.sync_phase = sync_phase
        self.on_eval = on_eval
        self.views = {c: ControllerView(c, self.topo.owned_by(c), polling_period, sync_period)
                      for c in self.topo.controllers}
        self.poll_log: list[tuple[str, float]] = []
        self.sync_log: list[float] = []

    @property
    def distributed(self) -> bool:
        return len(self.views) > 1

    def start(self) -> None:
        now = self.kernel.now()
        first_poll = next_on_grid(now, self.tp, self.poll_phase)
        for cid in self.views:
            self.kernel.schedule(first_poll, EventKind.POLL_TICK, self._on_poll,
                                 payload=cid, priority=PRIO_POLL)
        if self.distributed:
            t = self._next_sync(now)
            if t is not None:
                self.kernel.schedule(t, EventKind.SYNC_TICK, self._on_sync,
                                     priority=PRIO_SYNC)
        self.kernel.schedule(first_poll, EventKind.EVAL_TICK, self._on_eval,
                             priority=PRIO_EVAL)

    def _next_sync(self, after: float) -> float | None:
        if self.fresh_training and after < self.training_end:
            t = next_on_grid(after, self.tp, self.poll_phase)
            if t <= self.training_end:
                return t
        if self.ts is None:
            return None
        return next_on_grid(max(after, self.training_end), self.ts, self.sync_phase)

    def _on_poll(self, ev) -> None:
        at = ev.fire_at
        poll(self.views[ev.payload], self.net, at)
        self.poll_log.append((ev.payload, at))
        self.kernel.schedule(next_on_grid(at, self.tp, self.poll_phase),
                             EventKind.POLL_TICK, self._on_poll,
                             payload=ev.payload, priority=PRIO_POLL)

    def _on_sync(self, ev) -> None:
        at = ev.fire_at
        a, b = list(self.views.values())
        sync(a, b, at)
        self.sync_log.append(at)
        t = self._next_sync(at)
        if t is not None:
            self.kernel.schedule(t, EventKind.SYNC_TICK, self._on_sync, priority=PRIO_SYNC)

    def _on_eval(self, ev) -> None:
        at = ev.fire_at
        if self.on_eval is not None:
            self.on_eval(at)
        self.kernel.schedule(next_on_grid(at, self.tp, self.poll_phase),
                             EventKind.EVAL_TICK, self._on_eval,
                             priority=PRIO_EVAL)

    def merged(self, controller: str, at: float) -> MergedView:
        return merged_view(self.views[controller], at, self.topo)

    def staleness_bound(self, at: float) -> float:
        """Upper bound on remote-data age currently in force."""
        if self.fresh_training and at <= self.training_end:
            return 2 * self.tp
        return (self.ts if self.ts is not None else math.inf) + self.tp
