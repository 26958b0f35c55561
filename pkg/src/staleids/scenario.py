"""One simulation run: build topology and workload, train, detect, score."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

from .config import ScenarioConfig
from .control import ControlPlane
from .ids import ClusterModel, Detector, Phase, Verdict
from .kernel import Kernel, RandomSource
from .metrics import RunMetrics, episodes_from_verdicts, match
from .net import Network, two_domain_topology
from .traffic import (AttackKind, AttackWindow, FlowIds, gen_ddos, gen_legit,
                      gen_syn_flood, plan_attack_windows, schedule_attack_markers,
                      schedule_flows, select_ddos_attackers, split_clients)

log = logging.getLogger(__name__)


class InvariantViolation(RuntimeError):
    pass


def derive_seed(base_seed: int, run_index: int) -> int:
    """Per-run seed.  Independent of the sweep point, so every period setting
    sees the same traffic for a given run index."""
    h = hashlib.sha256(f"run:{run_index}".encode()).digest()
    return base_seed ^ int.from_bytes(h[:8], "little")


@dataclass
class RunResult:
    metrics: RunMetrics
    attacks: list[AttackWindow]
    verdicts: list[Verdict]
    traffic_digest: str
    staleness_rows: list[tuple] = field(default_factory=list)
    staleness_violations: int = 0
    trained_points: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    events: int = 0
    trace_digest: str = ""


def _digest_flows(planned) -> str:
    h = hashlib.sha256()
    for pf in planned:
        f = pf.flow
        h.update(f"{f.flow_id},{f.src},{f.dst},{f.start!r},{len(pf.times)};".encode())
    return h.hexdigest()


def plan_attacks(cfg: ScenarioConfig, topo, dormant, rng: RandomSource) -> list[AttackWindow]:
    spans = plan_attack_windows(cfg.attacks_per_run, cfg.attack_length,
                                cfg.training_duration, cfg.attack_gap_min,
                                cfg.attack_gap_max, rng.stream("attack-times"))
    pick = rng.stream("attackers")
    windows = []
    for i, (start, end) in enumerate(spans):
        if cfg.scenario == "ddos":
            attackers = select_ddos_attackers(topo, dormant, cfg.ddos.attackers_per_attack, pick)
            windows.append(AttackWindow(i, start, end, AttackKind.DDOS, attackers,
                                        tuple(topo.servers())))
        else:
            attacker = pick.choice(topo.clients())
            windows.append(AttackWindow(i, start, end, AttackKind.SYN_FLOOD, (attacker,),
                                        tuple(topo.servers())))
    return windows


def _reported(cfg: ScenarioConfig, topo, controller: str, subject: str) -> bool:
    if cfg.report == "all":
        return True
    local = topo.controller_assignment[topo.switch_of(subject)] == controller
    return local if cfg.report == "local" else not local


def run_once(cfg: ScenarioConfig, tau_p: float, tau_s: float | None, run_index: int,
             *, trace: bool = False, extra_attacks=None) -> RunResult:
    """Execute one seeded run at one sweep point.

    ``extra_attacks`` (a list of AttackWindow plus planned flows) replaces the
    configured attack plan; tests use it to place synthetic attacks.
    """
    seed = derive_seed(cfg.base_seed, run_index)
    rng = RandomSource(seed)
    topo = two_domain_topology(cfg.controllers)
    kernel = Kernel(trace=trace)
    net = Network(topo, kernel)
    ids = FlowIds()

    active, dormant = split_clients(topo, cfg.traffic.active_client_fraction,
                                    rng.stream("clients"))
    if extra_attacks is None:
        attacks = plan_attacks(cfg, topo, dormant, rng)
    else:
        attacks = [w for w, _ in extra_attacks]
    last = max([w.end for w in attacks], default=cfg.training_duration)
    horizon = max(last, cfg.training_duration) + cfg.cooldown

    legit = gen_legit(cfg.traffic, topo, horizon, rng.stream("traffic"), active, ids)
    attack_flows = []
    syn_rng = rng.stream("syn-flood")
    for w in attacks:
        if extra_attacks is not None:
            continue
        if w.kind is AttackKind.DDOS:
            attack_flows += gen_ddos(cfg.ddos, w, topo, ids)
        else:
            attack_flows += gen_syn_flood(cfg.syn, w, w.attackers[0], topo, syn_rng, ids)
    if extra_attacks is not None:
        for _, planned in extra_attacks:
            attack_flows += planned
    schedule_flows(kernel, net, legit)
    schedule_flows(kernel, net, attack_flows)
    schedule_attack_markers(kernel, attacks)

    mode = "server" if cfg.scenario == "ddos" else "source"
    subjects = topo.servers() if mode == "server" else topo.clients()
    detectors = {
        c: Detector(c, ClusterModel(cfg.ids.clusters, cfg.ids.weights, cfg.ids.theta,
                                    cfg.ids.eps_r),
                    topo, subjects, mode, tau_p, cfg.ids.continuous)
        for c in topo.controllers
    }
    verdicts: list[Verdict] = []
    staleness_rows = []
    violations = 0
    training_end = cfg.training_duration

    def on_eval(at: float) -> None:
        nonlocal violations
        training = at < training_end
        bound = plane.staleness_bound(at)
        for c, det in detectors.items():
            if not training and det.model.phase is Phase.TRAINING:
                det.model.freeze()
            view = plane.merged(c, at)
            for sw, sv in view.per_switch.items():
                age = None if sv.as_of is None else at - sv.as_of
                limit = bound if sv.remote else tau_p
                if age is not None and age > limit + 1e-9:
                    violations += 1
                if cfg.emit_staleness:
                    staleness_rows.append((at, c, sw, "remote" if sv.remote else "local", age))
            verdicts.extend(det.step(view, at, training))

    plane = ControlPlane(kernel, net, tau_p, tau_s if cfg.controllers > 1 else None,
                         training_end=training_end, fresh_training=cfg.fresh_training,
                         poll_phase=cfg.poll_phase, sync_phase=cfg.sync_phase,
                         on_eval=on_eval)
    plane.start()
    kernel.run_until(horizon)

    if not kernel.accounted():
        raise InvariantViolation("event accounting mismatch")
    if violations:
        raise InvariantViolation(f"{violations} staleness-bound violations")

    reported = [v for v in verdicts if _reported(cfg, topo, v.controller, v.subject)]
    episodes = episodes_from_verdicts(reported, tau_p, cfg.episode_bridge)
    eval_points = [((v.controller, v.subject), v.at) for v in reported]
    metrics = match(attacks, episodes, eval_points, grace=tau_p, run_id=run_index,
                    seed=seed, tau_p=tau_p, tau_s=tau_s)
    if metrics.tp + metrics.fn != len(attacks):
        raise InvariantViolation("tp + fn differs from attack count")

    trace_digest = ""
    if kernel.trace is not None:
        h = hashlib.sha256()
        for row in kernel.trace:
            h.update(repr(row).encode())
        trace_digest = h.hexdigest()
    return RunResult(metrics, attacks, verdicts, _digest_flows(legit), staleness_rows,
                     violations, {c: d.trained_points for c, d in detectors.items()},
                     {c: d.model for c, d in detectors.items()}, kernel.processed,
                     trace_digest)
