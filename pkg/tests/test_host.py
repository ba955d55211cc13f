import pytest

from floodroute.fabric import parse_topology
from floodroute.host import (
    ACCEPT_LOWER,
    DEGRADED,
    ESTABLISHED,
    FAILED,
    RETRY_ON_DEGRADE,
    Host,
    NoAccessLink,
)
from floodroute.wire import FloodKey, PacketType, QosSpec, SignallingCell

TOPO = """
node R1 router
node h1 host
node h2 host
link h1 R1
link h2 R1
"""


def make_host(name="h1", **kwargs):
    t = parse_topology(TOPO)
    return Host(name, t, retry_timeout_ns=1_000_000, **kwargs)


def qos(bw=10):
    return QosSpec(bw, 100)


def cacc_for(key, bw):
    return SignallingCell(packet_type=PacketType.CACC, key=key, cdm=2,
                          qos=qos(bw))


def test_originate_numbers_connections_from_zero():
    h = make_host()
    (link, cell), record = h.originate(dst_address=3, qos=qos(), now=0)
    assert link == "h1-R1"
    assert cell.packet_type == PacketType.CREQ and cell.cdm == 0
    assert record.key.connection_no == 0
    (_, cell2), record2 = h.originate(dst_address=3, qos=qos(), now=1)
    assert record2.key.connection_no == 1
    assert record2.key != record.key


def test_no_access_link():
    t = parse_topology(TOPO)
    t._adjacency["h1"] = []  # sever the host
    h = Host("h1", t)
    with pytest.raises(NoAccessLink):
        h.originate(dst_address=3, qos=qos(), now=0)


def test_full_grant_establishes():
    h = make_host()
    _, record = h.originate(dst_address=3, qos=qos(10), now=0)
    out, emissions, retry = h.src_on_cacc(cacc_for(record.key, 10), now=5)
    assert out.status == ESTABLISHED and emissions == [] and retry is None
    assert out.granted.bandwidth == 10


def test_degraded_accept_lower():
    h = make_host(degrade_policy=ACCEPT_LOWER)
    _, record = h.originate(dst_address=3, qos=qos(10), now=0)
    out, emissions, retry = h.src_on_cacc(cacc_for(record.key, 6), now=5)
    assert out.status == DEGRADED and out.granted.bandwidth == 6
    assert emissions == [] and retry is None


def test_degraded_retry_policy_releases_and_refloods():
    h = make_host(degrade_policy=RETRY_ON_DEGRADE)
    _, record = h.originate(dst_address=3, qos=qos(10), now=0)
    out, emissions, retry = h.src_on_cacc(cacc_for(record.key, 6), now=5)
    kinds = [c.packet_type for _, c in emissions]
    assert kinds == [PacketType.REL, PacketType.CREQ]
    assert retry is not None and retry.key.connection_no == 1
    assert retry.attempts == 2


def test_zero_grant_is_retried_even_under_accept_policy():
    h = make_host(degrade_policy=ACCEPT_LOWER)
    _, record = h.originate(dst_address=3, qos=qos(10), now=0)
    out, emissions, retry = h.src_on_cacc(cacc_for(record.key, 0), now=5)
    assert retry is not None
    assert [c.packet_type for _, c in emissions] == [PacketType.REL, PacketType.CREQ]


def test_stale_cacc_ignored():
    h = make_host()
    out, emissions, retry = h.src_on_cacc(cacc_for(FloodKey(9, 9, 9), 10), now=5)
    assert out is None and emissions == [] and retry is None
    assert h.counters["stale_cacc"] == 1


def test_retry_timeout_refloods_then_fails():
    h = make_host(max_retries=2)
    _, record = h.originate(dst_address=3, qos=qos(), now=0)
    keys = [record.key]
    for i in range(1, 3):
        rec, emissions, retry = h.src_on_retry_timeout(
            keys[-1], now=i * 10_000_000)
        assert retry is not None
        keys.append(retry.key)
    rec, emissions, retry = h.src_on_retry_timeout(keys[-1], now=40_000_000)
    assert rec.status == FAILED and retry is None
    assert len(keys) == 3  # max_retries + 1 floods in total


def test_retry_timeout_noop_before_deadline_or_after_cacc():
    h = make_host()
    _, record = h.originate(dst_address=3, qos=qos(10), now=0)
    rec, _, _ = h.src_on_retry_timeout(record.key, now=0)  # deadline not reached
    assert rec is None
    h.src_on_cacc(cacc_for(record.key, 10), now=5)
    rec, _, _ = h.src_on_retry_timeout(record.key, now=10_000_000)
    assert rec is None  # established, timer is stale


# -- destination side -------------------------------------------------


def dcreq(conn=0, cdm=3, dst=4):
    return SignallingCell(packet_type=PacketType.CREQ,
                          key=FloodKey(3, dst, conn), cdm=cdm, qos=qos(10))


def test_window_keeps_lowest_cdm():
    h = make_host("h2")
    win = h.dest_on_creq("h2-R1", dcreq(cdm=3), now=0, window_ns=1000)
    assert win is not None and win.deadline == 1000
    assert h.dest_on_creq("L2", dcreq(cdm=2), now=10, window_ns=1000) is None
    state = h.windows[dcreq().key]
    assert state.best_cdm == 2 and state.best_link == "L2"


def test_window_tie_keeps_first():
    h = make_host("h2")
    h.dest_on_creq("L1", dcreq(cdm=2), now=0, window_ns=1000)
    h.dest_on_creq("L2", dcreq(cdm=2), now=10, window_ns=1000)
    assert h.windows[dcreq().key].best_link == "L1"


def test_window_expiry_emits_single_cacc():
    h = make_host("h2")
    h.dest_on_creq("L1", dcreq(cdm=4), now=0, window_ns=1000)
    out = h.dest_on_window_expiry(dcreq().key, now=1000)
    assert len(out) == 1
    link, cell = out[0]
    assert link == "L1"
    assert cell.packet_type == PacketType.CACC
    assert cell.cdm == 4 and cell.qos.bandwidth == 10
    # closed: a late copy is counted and dropped, and no second answer
    assert h.dest_on_creq("L2", dcreq(cdm=1), now=1500, window_ns=1000) is None
    assert h.counters["late_creq"] == 1
    assert h.dest_on_window_expiry(dcreq().key, now=2000) == []


def test_independent_windows_per_flood():
    h = make_host("h2")
    h.dest_on_creq("L1", dcreq(conn=0), now=0, window_ns=1000)
    h.dest_on_creq("L2", dcreq(conn=1), now=5, window_ns=1000)
    assert len(h.windows) == 2
    assert len(h.dest_on_window_expiry(dcreq(conn=0).key, now=1000)) == 1
    assert len(h.dest_on_window_expiry(dcreq(conn=1).key, now=1005)) == 1
