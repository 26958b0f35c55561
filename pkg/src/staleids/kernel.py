"""Discrete-event kernel: virtual clock, ordered event queue, seeded streams."""

from __future__ import annotations

import enum
import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class EventKind(enum.Enum):
    FLOW_START = "FlowStart"
    MESSAGE_DELIVER = "MessageDeliver"
    FLOW_EXPIRE = "FlowExpire"
    POLL_TICK = "PollTick"
    SYNC_TICK = "SyncTick"
    ATTACK_START = "AttackStart"
    ATTACK_END = "AttackEnd"
    EVAL_TICK = "EvalTick"


class SchedulingError(RuntimeError):
    """Raised when an event would fire in the past or at a non-finite time."""


@dataclass(eq=False)
class Event:
    fire_at: float
    seq: int
    kind: EventKind
    action: Callable[["Event"], Any] | None = None
    payload: Any = None
    priority: int = 0
    cancelled: bool = field(default=False, repr=False)

    def cancel(self) -> None:
        self.cancelled = True


class Kernel:
    """Single-threaded event loop.

    Events are ordered by ``(fire_at, priority, seq)``.  ``priority`` defaults
    to 0 for every event, so ties at equal times fall back to insertion order;
    the control plane uses it only to pin poll < sync < evaluation at
    coincident ticks.
    """

    def __init__(self, trace: bool = False):
        self._now = 0.0
        self._queue: list[tuple[float, int, int, Event]] = []
        self._seq = 0
        self.scheduled = 0
        self.processed = 0
        self.cancelled = 0
        self.trace: list[tuple[float, int, str]] | None = [] if trace else None

    def now(self) -> float:
        return self._now

    @property
    def pending(self) -> int:
        return len(self._queue)

    def schedule(self, fire_at: float, kind: EventKind, action=None, payload=None,
                 priority: int = 0) -> Event:
        fire_at = float(fire_at)
        if not math.isfinite(fire_at) or fire_at < 0:
            raise SchedulingError(f"invalid event time {fire_at!r}")
        if fire_at < self._now:
            raise SchedulingError(
                f"{kind.value} at t={fire_at} is before now={self._now}")
        ev = Event(fire_at, self._seq, kind, action, payload, priority)
        self._seq += 1
        self.scheduled += 1
        heapq.heappush(self._queue, (fire_at, priority, ev.seq, ev))
        return ev

    def run_until(self, t_end: float) -> int:
        if t_end < self._now:
            raise SchedulingError(f"run_until({t_end}) is before now={self._now}")
        count = 0
        queue = self._queue
        while queue and queue[0][0] <= t_end:
            fire_at, _, _, ev = heapq.heappop(queue)
            if ev.cancelled:
                self.cancelled += 1
                continue
            self._now = fire_at
            if self.trace is not None:
                self.trace.append((fire_at, ev.seq, ev.kind.value))
            # counted before dispatch so accounting holds inside handlers too
            self.processed += 1
            count += 1
            if ev.action is not None:
                ev.action(ev)
        self._now = float(t_end)
        return count

    def accounted(self) -> bool:
        """No-event-loss check: scheduled == processed + cancelled + pending."""
        return self.scheduled == self.processed + self.cancelled + len(self._queue)


_U_MAX = math.nextafter(1.0, 0.0)


class RandomSource:
    """PCG64 stream with named, order-independent child streams."""

    def __init__(self, seed: int, *, _spawn_key: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self._key = _spawn_key
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=_spawn_key)))

    def stream(self, name: str) -> "RandomSource":
        # str.__hash__ is salted per process; use a digest instead.
        digest = hashlib.sha256(name.encode()).digest()
        tag = int.from_bytes(digest[:4], "little")
        return RandomSource(self.seed, _spawn_key=self._key + (tag,))

    def uniform_open(self, size=None):
        """Draws in (0, 1): 1 - U[0,1) lands in (0,1], then 1 is pulled inward."""
        u = 1.0 - self._gen.random(size)
        return np.minimum(u, _U_MAX) if size is not None else min(u, _U_MAX)

    def random(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def choice(self, seq, size=None, replace=True):
        idx = self._gen.choice(len(seq), size=size, replace=replace)
        if size is None:
            return seq[int(idx)]
        return [seq[int(i)] for i in idx]

    def bernoulli(self, p: float, size: int):
        return self._gen.random(size) < p

    def exponentials(self, rate: float, size: int) -> np.ndarray:
        if rate <= 0:
            raise ValueError("rate must be positive")
        return -np.log(self.uniform_open(size)) / rate


def next_exponential(rate: float, rng: RandomSource) -> float:
    """Exponential inter-arrival time, strictly positive."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return -math.log(rng.uniform_open()) / rate
