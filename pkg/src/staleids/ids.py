"""Anomaly IDS: feature extraction, sequential K-means, threshold classification."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

from .control import MergedView
from .net import Topology


@dataclass(frozen=True)
class FeaturePoint:
    """Coordinates are always in (p, b, f) order."""

    p: float
    b: float
    f: float
    subject: str = ""
    at: float = 0.0
    warmup: bool = False

    def __post_init__(self):
        if self.p < 0 or self.b < 0 or self.f < 0:
            raise ValueError(f"negative feature component in {self}")

    @property
    def coords(self) -> tuple[float, float, float]:
        return (self.p, self.b, self.f)


@dataclass(frozen=True)
class Weights:
    p: float
    b: float
    f: float

    def __post_init__(self):
        if not (self.p > 0 and self.b > 0 and self.f > 0):
            raise ValueError(f"weights must be strictly positive: {self}")


DDOS_WEIGHTS = Weights(p=64, b=4096, f=1)
SYN_WEIGHTS = Weights(p=16, b=2046, f=0.25)


class Phase(enum.Enum):
    TRAINING = "training"
    DETECTION = "detection"


class Label(enum.Enum):
    NORMAL = "normal"
    ANOMALOUS = "anomalous"


class ModelStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class Verdict:
    subject: str
    at: float
    label: Label
    distance: float
    cluster: int
    controller: str = ""
    stale: bool = False

    @property
    def anomalous(self) -> bool:
        return self.label is Label.ANOMALOUS


def _coords(point):
    if isinstance(point, FeaturePoint):
        return point.coords
    p, b, f = point
    return (float(p), float(b), float(f))


@dataclass
class ClusterModel:
    """Sequential K-means state.

    ``radii[i]`` tracks, online, the largest distance at which a training point
    was assigned to cluster ``i`` (measured to the centroid before the update).
    """

    m: int
    weights: Weights
    theta: float = 1.5
    eps_r: float = 0.1
    centroids: list[list[float]] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    radii: list[float] = field(default_factory=list)
    total: int = 0
    phase: Phase = Phase.TRAINING

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("cluster count must be at least 1")

    def nearest(self, point) -> tuple[int, float]:
        if not self.centroids:
            raise ModelStateError("nearest() on a model with no seeded clusters")
        pp, pb, pf = _coords(point)
        wp, wb, wf = self.weights.p, self.weights.b, self.weights.f
        idx, best = -1, math.inf
        for i, (cp, cb, cf) in enumerate(self.centroids):
            d = math.sqrt(((pp - cp) / wp) ** 2 + ((pb - cb) / wb) ** 2
                          + ((pf - cf) / wf) ** 2)
            if d < best:
                idx, best = i, d
        return idx, best

    def insert(self, point, *, allow_detection: bool = False) -> int:
        if self.phase is Phase.DETECTION and not allow_detection:
            raise ModelStateError("insert() during detection phase")
        x = _coords(point)
        if self.total < self.m:
            i = self.total
            self.centroids.append(list(x))
            self.counts.append(1)
            self.radii.append(0.0)
        else:
            i, d = self.nearest(x)
            n = self.counts[i]
            c = [ci * n + xi for ci, xi in zip(self.centroids[i], x)]
            n += 1
            self.centroids[i] = [ci / n for ci in c]
            self.counts[i] = n
            if not allow_detection and d > self.radii[i]:
                self.radii[i] = d
        self.total += 1
        return i

    def freeze(self) -> "ClusterModel":
        if self.total < self.m:
            raise ModelStateError(
                f"freeze() after {self.total} points; need at least {self.m} seeds")
        self.phase = Phase.DETECTION
        return self

    def threshold(self, i: int) -> float:
        return self.theta * max(self.radii[i], self.eps_r)

    def classify(self, point, *, subject: str = "", at: float = 0.0) -> Verdict:
        if self.phase is not Phase.DETECTION:
            raise ModelStateError("classify() during training phase")
        i, d = self.nearest(point)
        label = Label.ANOMALOUS if d > self.threshold(i) else Label.NORMAL
        if isinstance(point, FeaturePoint):
            subject = subject or point.subject
        return Verdict(subject, at, label, d, i)

    def state(self) -> dict:
        return {
            "m": self.m,
            "weights": [self.weights.p, self.weights.b, self.weights.f],
            "theta": self.theta,
            "eps_r": self.eps_r,
            "centroids": self.centroids,
            "counts": self.counts,
            "radii": self.radii,
            "total": self.total,
            "phase": self.phase.value,
        }

    @classmethod
    def from_state(cls, d: dict) -> "ClusterModel":
        return cls(d["m"], Weights(*d["weights"]), d["theta"], d["eps_r"],
                   [list(c) for c in d["centroids"]], list(d["counts"]),
                   list(d["radii"]), d["total"], Phase(d["phase"]))


def dump_model(model: ClusterModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.state(), fh, indent=2, sort_keys=True)


def load_model(path) -> ClusterModel:
    with open(path) as fh:
        return ClusterModel.from_state(json.load(fh))


def _window(view: MergedView, topo: Topology, host: str):
    sv = view.per_switch[topo.switch_of(host)]
    if sv.never_synced:
        return None
    t1 = sv.as_of
    return sv, sv.ledger.previous_poll(t1), t1


def extract_server_features(view: MergedView, topo: Topology, server: str) -> FeaturePoint | None:
    """Traffic received by ``server`` over the latest polling window in the view.

    Counters come from the server's own switch, so a controller sees its
    remote server only through synced state.  Returns None when that switch
    has never been synced; the first window of a ledger is flagged warm-up.
    """
    win = _window(view, topo, server)
    if win is None:
        return None
    sv, t0, t1 = win
    if t0 is None:
        return FeaturePoint(0, 0, 0, server, t1, warmup=True)
    log = sv.ledger.by_dst.get(server)
    if log is None:
        return FeaturePoint(0, 0, 0, server, t1)
    lo, hi = log.span(t0, t1)
    p = log.cum_p[hi] - log.cum_p[lo]
    b = log.cum_b[hi] - log.cum_b[lo]
    f = len(set(log.flow_ids[lo:hi]))
    return FeaturePoint(p, b, f, server, t1)


def extract_source_features(view: MergedView, topo: Topology, source: str,
                            polling_period: float) -> FeaturePoint | None:
    """Per-flow byte and packet rates of ``source``, averaged, plus its flow count.

    Flow duration is floored at one polling period.
    """
    win = _window(view, topo, source)
    if win is None:
        return None
    sv, t0, t1 = win
    log = sv.ledger.by_src.get(source)
    if log is None:
        return None
    lo, hi = log.span(-math.inf if t0 is None else t0, t1)
    if hi == lo:
        return None
    latest = {}
    for k in range(lo, hi):
        latest[log.flow_ids[k]] = k
    sp = sb = 0.0
    for k in latest.values():
        dur = max(log.last_update[k] - log.first_seen[k], polling_period)
        sp += log.flow_p[k] / dur
        sb += log.flow_b[k] / dur
    n = len(latest)
    return FeaturePoint(sp / n, sb / n, n, source, t1, warmup=t0 is None)


@dataclass
class _SubjectState:
    as_of: float | None = None
    verdict: Verdict | None = None


class Detector:
    """One IDS instance bound to a controller's merged view.

    Each evaluation tick turns fresh data into a point (trained on, or
    classified).  When a subject's data has not advanced since the last tick
    the previous verdict is re-issued, flagged stale.
    """

    def __init__(self, controller: str, model: ClusterModel, topo: Topology,
                 subjects: list[str], mode: str, polling_period: float,
                 continuous: bool = False):
        if mode not in ("server", "source"):
            raise ValueError(f"unknown feature mode {mode!r}")
        self.controller = controller
        self.model = model
        self.topo = topo
        self.subjects = list(subjects)
        self.mode = mode
        self.polling_period = polling_period
        self.continuous = continuous
        self.trained_points = 0
        self._state = {s: _SubjectState() for s in self.subjects}

    def features(self, view: MergedView, subject: str) -> FeaturePoint | None:
        if self.mode == "server":
            return extract_server_features(view, self.topo, subject)
        return extract_source_features(view, self.topo, subject, self.polling_period)

    def step(self, view: MergedView, at: float, training: bool) -> list[Verdict]:
        out = []
        for subject in self.subjects:
            st = self._state[subject]
            sv = view.per_switch[self.topo.switch_of(subject)]
            if sv.never_synced:
                continue
            if sv.as_of == st.as_of:
                if not training and st.verdict is not None:
                    out.append(replace(st.verdict, at=at, stale=True))
                continue
            st.as_of = sv.as_of
            st.verdict = None
            point = self.features(view, subject)
            if point is None or point.warmup:
                continue
            if training:
                self.model.insert(point)
                self.trained_points += 1
                continue
            v = self.model.classify(point, at=at)
            v = replace(v, controller=self.controller)
            if self.continuous:
                self.model.insert(point, allow_detection=True)
            st.verdict = v
            out.append(v)
        return out
