"""Attack/detection matching, precision-recall-accuracy, and sweep summaries."""

from __future__ import annotations

import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field

from .traffic import AttackWindow

UNDETECTED = math.inf


@dataclass(frozen=True)
class DetectionEpisode:
    subject: str
    start: float
    end: float
    stream: tuple = ()

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("episode start after end")


@dataclass
class RunMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    t_delta: list[float]
    run_id: int = 0
    seed: int = 0
    tau_p: float = 0.0
    tau_s: float | None = None

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("negative confusion count")
        if self.tp + self.fn != len(self.t_delta):
            raise ValueError("tp + fn must equal the number of attacks")

    @property
    def attacks(self) -> int:
        return len(self.t_delta)

    @property
    def detected_times(self) -> list[float]:
        return [t for t in self.t_delta if t != UNDETECTED]


def precision(tp: float, fp: float) -> float | None:
    d = tp + fp
    return tp / d if d > 0 else None


def recall(tp: float, fn: float) -> float | None:
    d = tp + fn
    return tp / d if d > 0 else None


def accuracy(tp: float, tn: float, fp: float, fn: float) -> float | None:
    d = tp + tn + fp + fn
    return (tp + tn) / d if d > 0 else None


def episodes_from_verdicts(verdicts, window: float, bridge: int = 1) -> list[DetectionEpisode]:
    """Group anomalous verdicts per (controller, subject) stream into episodes.

    Up to ``bridge`` consecutive normal evaluation windows between two
    anomalous verdicts are closed over.
    """
    by_stream = defaultdict(list)
    for v in verdicts:
        if v.anomalous:
            by_stream[(v.controller, v.subject)].append(v.at)
    limit = (bridge + 1) * window * (1 + 1e-9)
    episodes = []
    for key in sorted(by_stream):
        times = sorted(by_stream[key])
        start = prev = times[0]
        for t in times[1:]:
            if t - prev > limit:
                episodes.append(DetectionEpisode(key[1], start, prev, key))
                start = t
            prev = t
        episodes.append(DetectionEpisode(key[1], start, prev, key))
    return episodes


def match(attacks: list[AttackWindow], episodes: list[DetectionEpisode],
          eval_points, grace: float, **ident) -> RunMetrics:
    """Confusion counts and per-attack detection times.

    ``eval_points`` are ``(stream, time)`` pairs, one per issued verdict.
    An episode detects an attack when its subject is one of the attack's
    subjects and it starts inside ``[start, end + grace]``.
    """
    ordered = sorted(attacks, key=lambda a: a.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise ValueError(f"attacks {a.attack_id} and {b.attack_id} overlap")
    matched = set()
    t_delta = []
    for a in attacks:
        hits = [ep for ep in episodes
                if ep.subject in a.subjects and a.start <= ep.start <= a.end + grace]
        matched.update(id(ep) for ep in hits)
        t_delta.append(min(ep.start for ep in hits) - a.start if hits else UNDETECTED)
    tp = sum(1 for t in t_delta if t != UNDETECTED)
    fp = sum(1 for ep in episodes if id(ep) not in matched)

    spans = [(a.start, a.end + grace) for a in attacks]
    ep_by_stream = defaultdict(list)
    for ep in episodes:
        ep_by_stream[ep.stream].append((ep.start, ep.end))
    tn = 0
    for stream, t in eval_points:
        if any(s <= t <= e for s, e in spans):
            continue
        if any(s <= t <= e for s, e in ep_by_stream.get(stream, ())):
            continue
        tn += 1
    return RunMetrics(tp, fp, len(attacks) - tp, tn, t_delta, **ident)


def _mean_se(values):
    if not values:
        return None, None
    mean = statistics.fmean(values)
    se = statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
    return mean, se


def _mean_defined(values):
    defined = [v for v in values if v is not None]
    return statistics.fmean(defined) if defined else None


@dataclass
class SummaryRow:
    tau_p: float
    tau_s: float | None
    runs: int
    attacks: int
    tp_mean: float
    tp_se: float
    fp_mean: float
    fp_se: float
    fn_mean: float
    fn_se: float
    t_delta_mean: float | None
    t_delta_se: float | None
    detected: int
    excluded: int
    precision_mean: float | None
    recall_mean: float | None
    accuracy_mean: float | None
    precision_pooled: float | None
    recall_pooled: float | None
    accuracy_pooled: float | None
    run_ids: list = field(default_factory=list, repr=False)

    def t_delta_text(self) -> str:
        if self.t_delta_mean is None:
            return f"n/a ({self.excluded}/{self.attacks} excluded)"
        return f"{self.t_delta_mean:.3f} ({self.excluded} excluded)"


def summarize(runs: list[RunMetrics]) -> list[SummaryRow]:
    """One row per (tau_p, tau_s) sweep point, in first-seen order.

    Detection time is averaged over detected attacks only; undetected attacks
    are reported as excluded (they are already counted in FN).
    """
    if not runs:
        raise ValueError("summarize() needs at least one run")
    groups: dict[tuple, list[RunMetrics]] = {}
    for r in runs:
        groups.setdefault((r.tau_p, r.tau_s), []).append(r)
    rows = []
    for (tau_p, tau_s), rs in groups.items():
        tp_m, tp_se = _mean_se([r.tp for r in rs])
        fp_m, fp_se = _mean_se([r.fp for r in rs])
        fn_m, fn_se = _mean_se([r.fn for r in rs])
        times = [t for r in rs for t in r.detected_times]
        td_m, td_se = _mean_se(times)
        attacks = sum(r.attacks for r in rs)
        TP, FP, FN, TN = (sum(getattr(r, k) for r in rs) for k in ("tp", "fp", "fn", "tn"))
        rows.append(SummaryRow(
            tau_p, tau_s, len(rs), attacks, tp_m, tp_se, fp_m, fp_se, fn_m, fn_se,
            td_m, td_se, len(times), attacks - len(times),
            _mean_defined([precision(r.tp, r.fp) for r in rs]),
            _mean_defined([recall(r.tp, r.fn) for r in rs]),
            _mean_defined([accuracy(r.tp, r.tn, r.fp, r.fn) for r in rs]),
            precision(TP, FP), recall(TP, FN), accuracy(TP, TN, FP, FN),
            [r.run_id for r in rs]))
    return rows
