import filecmp
import os

import pytest

from floodroute.engine import (
    AuditError,
    ConfigError,
    Engine,
    PastEvent,
    ScenarioConfig,
    parse_scenario,
    run_scenario,
)
from floodroute.fabric import build_topology, parse_topology
from floodroute.oracle import brute_force_flood, min_hops

BOTTLENECK = """
node R1 router
node R2 router
node h1 host
node h2 host
link h1 R1
link h2 R2
link R1 R2 capacity_kbps=100 delay_ms=1
"""


def scripted(calls, **kwargs):
    kwargs.setdefault("duration_s", 5.0)
    kwargs.setdefault("audit_interval_s", 1.0)
    return ScenarioConfig(calls=calls, **kwargs)


def test_zero_duration_is_empty():
    report = run_scenario(build_topology("line:3"),
                          ScenarioConfig(duration_s=0))
    assert report.events_processed == 0
    assert report.connections == []


def test_negative_duration_rejected():
    with pytest.raises(ConfigError):
        Engine(build_topology("line:3"), ScenarioConfig(duration_s=-1))


def test_past_event_rejected():
    eng = Engine(build_topology("line:3"))
    eng._now = 100
    with pytest.raises(PastEvent):
        eng.schedule(50, "cell_arrival")


def test_equal_times_run_in_schedule_order():
    eng = Engine(build_topology("line:3"),
                 ScenarioConfig(duration_s=1.0, audit_interval_s=0),
                 trace=True)
    eng.schedule(10, "link_change", link="R1-R2", up=False)
    eng.schedule(10, "link_change", link="R1-R2", up=True)
    eng.run()
    seqs = [e["seq"] for e in eng.trace if e["t_ns"] == 10]
    assert seqs == sorted(seqs)
    assert eng.topology.link("R1-R2").up


def test_single_call_matches_oracle():
    topo = build_topology("line:3")
    report = run_scenario(
        topo, scripted([(0.1, "h1", "h2", 10, None)]))
    (conn,) = report.connections
    assert conn.status == "established"
    assert conn.granted_bw == 10
    assert len(conn.path_links) == min_hops(build_topology("line:3"),
                                            "h1", "h2")
    cdm, creq = brute_force_flood(build_topology("line:3"), "h1", "h2")
    assert conn.best_cdm == cdm
    (point,) = report.flood_points
    assert point.creq_count == creq


def test_paper_network_single_flood_cost():
    topo = build_topology("paper_sim")
    report = run_scenario(
        topo, scripted([(0.1, "h1", "h9", 64, None)]))
    (conn,) = report.connections
    assert conn.status == "established"
    assert report.flood_points[0].creq_count == 18


def test_degraded_grant_on_contended_bottleneck():
    # both floods cross the idle 100 kbps core link before either
    # acceptance returns; the first acceptance reserves 64, so the second
    # is whittled down to the remaining 36 and accepted degraded
    topo = parse_topology(BOTTLENECK)
    report = run_scenario(topo, scripted([
        (0.100, "h1", "h2", 64, None),
        (0.101, "h1", "h2", 64, None),
    ]))
    first, second = report.connections
    assert first.status == "established" and first.granted_bw == 64
    assert second.status == "degraded_established"
    assert second.granted_bw == 36
    assert topo.link("R1-R2").reserved_kbps == 100


def test_zero_grant_released_and_retried():
    # two racing calls each want the whole core link; the loser's
    # acceptance comes back with zero bandwidth, which is torn down and
    # retried rather than accepted, and the retry flood is then pruned
    # at the full link until the attempts run out
    topo = parse_topology(BOTTLENECK)
    report = run_scenario(topo, scripted(
        [(0.100, "h1", "h2", 100, None), (0.101, "h1", "h2", 100, None)],
        max_retries=1, duration_s=30.0,
    ))
    first, second = report.connections
    assert first.status == "established" and first.granted_bw == 100
    assert second.status == "failed"
    assert second.attempts == 2
    assert topo.link("R1-R2").reserved_kbps == 100


def test_full_link_starves_flood_then_fails():
    # the core link is already exactly full, so the second flood is
    # pruned at the router and the caller times out, refloods, and gives
    # up after the initial attempt plus max_retries
    topo = parse_topology(BOTTLENECK)
    report = run_scenario(topo, scripted(
        [(0.1, "h1", "h2", 100, None), (1.0, "h1", "h2", 64, None)],
        max_retries=2, duration_s=30.0,
    ))
    first, second = report.connections
    assert first.status == "established"
    assert second.status == "failed"
    assert second.attempts == 3
    assert len(report.flood_points) == 1 + 3


def test_retry_policy_refloods_on_degraded_offer():
    # under the retry policy a degraded offer is released and the call
    # refloods; once the bottleneck stays full the retry is starved and
    # the call eventually fails instead of accepting less
    topo = parse_topology(BOTTLENECK)
    report = run_scenario(topo, scripted(
        [(0.100, "h1", "h2", 64, None), (0.101, "h1", "h2", 64, None)],
        degrade_policy="retry", max_retries=1, duration_s=60.0,
    ))
    second = report.connections[1]
    assert second.status == "failed"
    assert second.attempts == 2
    assert len(report.flood_points) == 3


def test_retry_cap_accepts_degraded_offer():
    # with no retries left the degraded offer is taken even under the
    # retry policy
    topo = parse_topology(BOTTLENECK)
    report = run_scenario(topo, scripted(
        [(0.100, "h1", "h2", 64, None), (0.101, "h1", "h2", 64, None)],
        degrade_policy="retry", max_retries=0, duration_s=30.0,
    ))
    second = report.connections[1]
    assert second.status == "degraded_established"
    assert second.granted_bw == 36


def test_release_returns_bandwidth():
    topo = parse_topology(BOTTLENECK)
    report = run_scenario(topo, scripted(
        [(0.1, "h1", "h2", 64, 1.0)], duration_s=10.0))
    assert report.connections[0].status == "closed"
    assert all(l.final_reserved_kbps == 0 for l in report.links.values())
    assert report.audits_passed > 0


def test_link_failure_blocks_and_restore_recovers():
    topo = build_topology("line:3")
    cfg = scripted([(1.0, "h1", "h2", 10, None), (8.0, "h1", "h2", 10, None)],
                   max_retries=1, duration_s=20.0)
    eng = Engine(topo, cfg)
    eng.schedule_link_change(0.5, "R2-R3", up=False)
    eng.schedule_link_change(5.0, "R2-R3", up=True)
    report = eng.run()
    first, second = report.connections
    assert first.status == "failed"
    assert first.attempts == cfg.max_retries + 1
    assert second.status == "established"


def test_inflight_cells_dropped_across_failure():
    # take the link down while the first request copy is still in flight
    topo = build_topology("line:3")
    eng = Engine(topo, scripted([(1.0, "h1", "h2", 10, None)],
                                max_retries=0, duration_s=10.0))
    eng.schedule_link_change(1.0015, "R1-R2", up=False)
    report = eng.run()
    assert eng.cells_lost_linkdown >= 1
    assert report.connections[0].status == "failed"


def test_random_traffic_is_deterministic(tmp_path):
    def run_once(out):
        topo = build_topology("paper_sim")
        cfg = ScenarioConfig(duration_s=20.0, seed=7, call_rate=1.0,
                             hold_mean_s=4.0, qos_bw_kbps=64)
        report = run_scenario(topo, cfg)
        report.write_outputs(str(out))
        return report

    a = run_once(tmp_path / "a")
    b = run_once(tmp_path / "b")
    assert a.events_processed == b.events_processed
    for name in ("connections.csv", "flood_volume.csv", "links.csv",
                 "summary.json"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name,
                           shallow=False), name
    assert len(a.connections) > 5


def test_different_seeds_differ():
    def run_seed(seed):
        cfg = ScenarioConfig(duration_s=20.0, seed=seed, call_rate=1.0,
                             hold_mean_s=4.0)
        return run_scenario(build_topology("paper_sim"), cfg)

    a, b = run_seed(1), run_seed(2)
    starts_a = [c.start_ns for c in a.connections]
    starts_b = [c.start_ns for c in b.connections]
    assert starts_a != starts_b


def test_pairs_restrict_random_traffic():
    cfg = ScenarioConfig(duration_s=10.0, seed=3, call_rate=2.0,
                         hold_mean_s=1.0, pairs=[("h1", "h9")])
    report = run_scenario(build_topology("paper_sim"), cfg)
    assert report.connections
    assert all((c.src, c.dst) == ("h1", "h9") for c in report.connections)


def test_no_loops_and_audit_clean_under_load():
    cfg = ScenarioConfig(duration_s=30.0, seed=11, call_rate=3.0,
                         hold_mean_s=5.0, qos_bw_kbps=64)
    eng = Engine(build_topology("paper_sim"), cfg)
    eng.run()
    eng.audit()
    assert eng.loops_detected == 0


def test_audit_detects_leak():
    topo = build_topology("line:3")
    eng = Engine(topo)
    topo.link("R1-R2").reserve(10)  # not backed by any circuit entry
    with pytest.raises(AuditError):
        eng.audit()


def test_parse_scenario_roundtrip():
    cfg = parse_scenario(
        "# comment\n"
        "duration_s = 12.5\n"
        "seed = 42\n"
        "call_rate = 0.5  # trailing comment\n"
        "metric = load:4\n"
        "degrade_policy = retry\n"
        "pairs = h1:h2, h3:h4\n"
    )
    assert cfg.duration_s == 12.5
    assert cfg.seed == 42
    assert cfg.metric == "load:4"
    assert cfg.pairs == [("h1", "h2"), ("h3", "h4")]


def test_parse_scenario_errors():
    with pytest.raises(ConfigError):
        parse_scenario("no equals sign here")
    with pytest.raises(ConfigError):
        parse_scenario("seed = abc")
    with pytest.raises(ConfigError):
        parse_scenario("unknown_key = 1")
    with pytest.raises(ConfigError):
        parse_scenario("degrade_policy = maybe")
    with pytest.raises(ConfigError):
        parse_scenario("metric = nonsense")
    with pytest.raises(ConfigError):
        parse_scenario("pairs = h1h2")
