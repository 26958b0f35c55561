from bisect import bisect_right

import pytest
from hypothesis import given, settings, strategies as st

from staleids.kernel import EventKind, Kernel
from staleids.net import Flow, Network, Origin, Role, TopologyError, two_domain_topology


@pytest.fixture
def topo():
    return two_domain_topology()


def test_topology_shape(topo):
    assert topo.switches == ["sw1", "sw2"]
    assert len(topo.clients("sw1")) == len(topo.clients("sw2")) == 32
    assert topo.servers() == ["s1", "s2"]
    assert topo.controllers == ["ctl1", "ctl2"]
    assert topo.hosts["c1"].role is Role.CLIENT and topo.switch_of("c33") == "sw2"
    core = [l for l in topo.links if {l.a, l.b} == {"sw1", "sw2"}]
    assert core[0].capacity == 1000e6
    single = two_domain_topology(controllers=1)
    assert single.controllers == ["ctl1"] and single.owned_by("ctl1") == ["sw1", "sw2"]


def test_path_crosses_core_only_between_domains(topo):
    net = Network(topo)
    net.install_flow(Flow(1, "c1", "s2", 0.0, 2.0, 30, 512))
    net.install_flow(Flow(2, "c1", "s1", 0.0, 2.0, 30, 512))
    assert 1 in net.tables["sw1"] and 1 in net.tables["sw2"]
    assert 2 in net.tables["sw1"] and 2 not in net.tables["sw2"]


def test_unknown_host_rejected(topo):
    with pytest.raises(TopologyError):
        Network(topo).install_flow(Flow(1, "c1", "nowhere", 0.0, 2.0, 30, 512))


def test_unknown_switch_rejected(topo):
    with pytest.raises(TopologyError):
        Network(topo).query_stats("sw9", 1.0)


def test_three_deliveries(topo):
    net = Network(topo)
    net.install_flow(Flow(1, "c1", "s1", 0.0, 2.0, 30, 512))
    for t in (0.1, 0.2, 0.3):
        assert net.deliver_message(1, t)
    (c,) = net.query_stats("sw1", 1.0).counters
    assert (c.packets, c.bytes) == (3, 1536)
    assert c.first_seen == 0.0 and c.last_update == 0.3


def test_delivery_after_expiry_dropped(topo):
    net = Network(topo)
    net.install_flow(Flow(1, "c1", "s1", 0.0, 2.0, 30, 512))
    assert net.deliver_message(1, 2.0)
    assert not net.deliver_message(1, 2.0 + 1e-9)
    assert (net.dropped, net.dropped_bytes) == (1, 512)
    (c,) = net.query_stats("sw1", 3.0).counters
    assert c.packets == 1


def test_counters_independent(topo):
    net = Network(topo)
    net.install_flow(Flow(1, "c1", "s1", 0.0, 2.0, 30, 512))
    net.install_flow(Flow(2, "c2", "s1", 0.0, 2.0, 30, 100))
    net.deliver_message(1, 0.5)
    net.deliver_message(2, 0.5)
    net.deliver_message(2, 0.6)
    by_id = {c.flow_id: c for c in net.query_stats("sw1", 1.0).counters}
    assert (by_id[1].packets, by_id[1].bytes) == (1, 512)
    assert (by_id[2].packets, by_id[2].bytes) == (2, 200)


def test_idle_polls_identical_counters(topo):
    net = Network(topo)
    net.install_flow(Flow(1, "c1", "s1", 0.0, 10.0, 30, 512))
    net.deliver_message(1, 0.5)
    a = net.query_stats("sw1", 2.0)
    b = net.query_stats("sw1", 4.0)
    assert [(c.packets, c.bytes) for c in a.counters] == [(c.packets, c.bytes) for c in b.counters]
    assert (a.captured_at, b.captured_at) == (2.0, 4.0)


def test_snapshot_unaffected_by_later_deliveries(topo):
    net = Network(topo)
    net.install_flow(Flow(1, "c1", "s1", 0.0, 10.0, 30, 512))
    net.deliver_message(1, 0.5)
    snap = net.query_stats("sw1", 1.0)
    net.deliver_message(1, 1.5)
    net.deliver_message(1, 1.6)
    assert snap.counters[0].packets == 1
    with pytest.raises(AttributeError):
        snap.counters[0].packets = 7


def test_snapshot_reflects_only_deliveries_up_to_poll(topo):
    net = Network(topo)
    net.install_flow(Flow(1, "c1", "s1", 0.0, 10.0, 30, 512))
    net.schedule_deliveries(1, [0.5, 1.0, 1.5])
    assert net.query_stats("sw1", 1.0).counters[0].packets == 2


def test_short_flow_reported_exactly_once(topo):
    k = Kernel()
    net = Network(topo, k)
    k.run_until(2.1)
    net.install_flow(Flow(1, "c1", "s1", 2.1, 0.5, 30, 64, Origin.SYN))
    net.deliver_message(1, 2.1)
    k.run_until(4.0)
    first = net.query_stats("sw1", 4.0).counters
    assert [(c.flow_id, c.packets, c.expired_at) for c in first] == [(1, 1, 2.6)]
    assert net.query_stats("sw1", 6.0).counters == ()


def test_expire_event_scheduled_at_end(topo):
    k = Kernel()
    net = Network(topo, k)
    ev = net.install_flow(Flow(1, "c1", "s1", 0.0, 2.0, 30, 512))
    assert ev.kind is EventKind.FLOW_EXPIRE and ev.fire_at == 2.0
    k.run_until(3.0)
    assert net.flows[1].expired_at == 2.0


def test_flow_field_checks():
    with pytest.raises(ValueError):
        Flow(1, "c1", "s1", 0.0, -1.0, 30, 512)
    with pytest.raises(ValueError):
        Flow(1, "c1", "s1", 0.0, 1.0, 30, -5)


flow_spec = st.tuples(
    st.sampled_from(["c1", "c2", "c33", "c40"]), st.sampled_from(["s1", "s2"]),
    st.floats(0, 20), st.floats(0.1, 6),
    st.lists(st.floats(0, 1), max_size=8), st.integers(0, 1500))


@settings(max_examples=60, deadline=None)
@given(st.lists(flow_spec, min_size=1, max_size=10), st.sampled_from([1.0, 2.0, 4.0]))
def test_retention_matches_delivery_log_replay(specs, period):
    """Every counter in every poll equals a replay of the delivery log; a flow
    shows up from its first poll through the first poll at or after expiry."""
    topo = two_domain_topology()
    k = Kernel()
    net = Network(topo, k)
    flows = []
    for fid, (src, dst, start, ttl, fracs, payload) in enumerate(specs, 1):
        f = Flow(fid, src, dst, start, ttl, 10, payload)
        times = sorted(start + x * ttl * 1.2 for x in fracs)   # some land past expiry

        def begin(ev, f=f, times=times):
            net.install_flow(f)
            net.schedule_deliveries(f.flow_id, times)
        k.schedule(start, EventKind.FLOW_START, begin)
        flows.append((f, times))

    polls = [period * i for i in range(1, int(30 / period) + 1)]
    seen = {sw: [] for sw in topo.switches}
    for t in polls:
        k.run_until(t)
        for sw in topo.switches:
            seen[sw].append({c.flow_id: c for c in net.query_stats(sw, t).counters})

    final = {}
    for f, times in flows:
        kept = [x for x in times if x <= f.end]
        for sw in topo.path(f.src, f.dst):
            expected = [i for i, t in enumerate(polls)
                        if t >= f.start and (i == 0 or polls[i - 1] < f.end)]
            got = [i for i, snap in enumerate(seen[sw]) if f.flow_id in snap]
            assert got == expected
            for i in got:
                n = bisect_right(kept, polls[i])
                c = seen[sw][i][f.flow_id]
                assert (c.packets, c.bytes) == (n, n * f.payload)
                final[sw, f.flow_id] = c.bytes

    # conservation: counter bytes on every on-path switch, plus drops, equal
    # the generated payload counted once per on-path switch
    hops = {f.flow_id: len(topo.path(f.src, f.dst)) for f, _ in flows}
    dropped = {f.flow_id: sum(1 for x in times if x > f.end) * f.payload for f, times in flows}
    generated = sum(len(times) * f.payload * hops[f.flow_id] for f, times in flows)
    assert sum(final.values()) + sum(dropped[i] * hops[i] for i in hops) == generated
    assert net.dropped_bytes == sum(dropped.values())
