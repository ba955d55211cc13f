"""Deterministic discrete-event engine.

Time is integer nanoseconds; events execute in (time, sequence) order
with the sequence number assigned at scheduling time, so the complete
event trace is a pure function of (topology, scenario, seed). Random
traffic (Poisson arrivals, exponential holding times, uniform host-pair
choice) is drawn from one seeded Mersenne Twister stream in event order.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import host as host_mod
from .fabric import HOST, ROUTER, Topology
from .host import Host
from .metric import MetricPolicy, parse_metric
from .metrics import ConnectionStat, FloodPoint, LinkStat, SimulationReport
from .router import Router
from .wire import (
    CELL_SIZE,
    ChecksumMismatch,
    FloodKey,
    PacketType,
    SignallingCell,
    UnknownPacketType,
    decode_cell,
    encode_cell,
)

# event kinds
CELL_ARRIVAL = "cell_arrival"
WINDOW_EXPIRY = "window_expiry"
RETRY_TIMEOUT = "retry_timeout"
CALL_ARRIVAL = "call_arrival"
LINK_CHANGE = "link_change"
CONNECTION_END = "connection_end"
AUDIT_SWEEP = "audit_sweep"


class ConfigError(Exception):
    pass


class PastEvent(Exception):
    """An event was scheduled before the current simulation time."""


class AuditError(Exception):
    """The global bandwidth audit found an inconsistency."""


@dataclass
class ScenarioConfig:
    duration_s: float = 100.0
    seed: int = 1
    call_rate: float = 0.0  # Poisson calls per second; 0 disables
    hold_mean_s: float = 10.0
    qos_bw_kbps: int = 64
    qos_delay_ms: int = 100
    metric: str = "hop"
    window_tw_ms: Optional[float] = None  # default derived from topology
    retry_timeout_ms: Optional[float] = None  # default 4 x window
    max_retries: int = 3
    degrade_policy: str = "accept"  # accept | retry
    flood_queue_capacity: int = 1024
    audit_interval_s: float = 1.0
    pairs: Optional[List[Tuple[str, str]]] = None  # restrict random traffic
    # scripted calls: (time_s, src, dst, bw_kbps, hold_s or None)
    calls: List[Tuple[float, str, str, int, Optional[float]]] = field(
        default_factory=list
    )

    def policy(self) -> MetricPolicy:
        return parse_metric(self.metric)


_SCALAR_KEYS = {
    "duration_s": float,
    "seed": int,
    "call_rate": float,
    "hold_mean_s": float,
    "qos_bw_kbps": int,
    "qos_delay_ms": int,
    "metric": str,
    "window_tw_ms": float,
    "retry_timeout_ms": float,
    "max_retries": int,
    "degrade_policy": str,
    "flood_queue_capacity": int,
    "audit_interval_s": float,
}


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse ``key = value`` scenario lines; '#' starts a comment."""
    cfg = ScenarioConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key == "pairs":
            pairs = []
            for item in value.split(","):
                if ":" not in item:
                    raise ConfigError(f"line {lineno}: pairs wants src:dst")
                a, b = (p.strip() for p in item.split(":", 1))
                pairs.append((a, b))
            cfg.pairs = pairs
        elif key in _SCALAR_KEYS:
            try:
                setattr(cfg, key, _SCALAR_KEYS[key](value))
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: bad value for {key}: {value!r}"
                ) from None
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if cfg.degrade_policy not in ("accept", "retry"):
        raise ConfigError("degrade_policy must be 'accept' or 'retry'")
    try:
        cfg.policy()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


class Engine:
    def __init__(self, topology: Topology, config: Optional[ScenarioConfig] = None,
                 trace: bool = False):
        self.topology = topology
        self.config = config or ScenarioConfig()
        if self.config.duration_s < 0:
            raise ConfigError("duration must be non-negative")
        self.policy = self.config.policy()
        self.rng = random.Random(self.config.seed)
        self._now = 0
        self._seq = 0
        self._heap: List[Tuple[int, int, str, dict]] = []
        self.trace_enabled = trace
        self.trace: List[dict] = []

        per_hop = topology.max_cell_delay_ns()
        diameter = topology.diameter_hops()
        if self.config.window_tw_ms is not None:
            self.window_ns = int(self.config.window_tw_ms * 1e6)
        else:
            self.window_ns = 2 * diameter * per_hop
        if self.config.retry_timeout_ms is not None:
            self.retry_ns = int(self.config.retry_timeout_ms * 1e6)
        else:
            self.retry_ns = 4 * max(self.window_ns, 1)

        self.routers: Dict[str, Router] = {}
        self.hosts: Dict[str, Host] = {}
        for name, kind in topology.kinds.items():
            if kind == ROUTER:
                self.routers[name] = Router(
                    name, topology, policy=self.policy,
                    flood_queue_capacity=self.config.flood_queue_capacity,
                )
            else:
                self.hosts[name] = Host(
                    name, topology, retry_timeout_ns=self.retry_ns,
                    max_retries=self.config.max_retries,
                    degrade_policy=self.config.degrade_policy,
                )
        self._host_by_address = {h.address: h for h in self.hosts.values()}

        self.report = SimulationReport(
            duration_ns=int(self.config.duration_s * 1e9),
            seed=self.config.seed,
            config={"metric": self.config.metric},
        )
        for lid, link in topology.links.items():
            self.report.links[lid] = LinkStat(link_id=lid,
                                              capacity_kbps=link.capacity_kbps)
        # bookkeeping for connection records and flood attribution
        self._calls: Dict[FloodKey, ConnectionStat] = {}
        self._floods: Dict[FloodKey, FloodPoint] = {}
        self.loops_detected = 0
        self.cells_lost_linkdown = 0

    # -- scheduling ----------------------------------------------------

    def now(self) -> int:
        return self._now

    def schedule(self, time_ns: int, kind: str, **payload) -> None:
        if time_ns < self._now:
            raise PastEvent(f"{kind} at {time_ns} < now {self._now}")
        heapq.heappush(self._heap, (time_ns, self._seq, kind, payload))
        self._seq += 1

    def schedule_link_change(self, time_s: float, link_id: str, up: bool) -> None:
        self.topology.link(link_id)  # raises UnknownLink early
        self.schedule(int(time_s * 1e9), LINK_CHANGE, link=link_id, up=up)

    # -- cell transport ------------------------------------------------

    def transmit(self, sender: str, link_id: str, cell: SignallingCell) -> None:
        link = self.topology.link(link_id)
        stat = self.report.links[link_id]
        if cell.packet_type == PacketType.CREQ and sender in self.routers:
            # flooding-packet accounting: router emissions only; the
            # source's initial request is the call, not the flood
            stat.creq_tx += 1
            point = self._floods.get(cell.key)
            if point is not None:
                point.creq_count += 1
        elif cell.packet_type == PacketType.CACC:
            stat.cacc_tx += 1
        elif cell.packet_type == PacketType.REL:
            stat.rel_tx += 1
        if not link.up:
            self.cells_lost_linkdown += 1
            return
        stat.signalling_bytes += CELL_SIZE
        raw = encode_cell(cell)
        self.schedule(
            self._now + link.cell_delay_ns, CELL_ARRIVAL,
            link=link_id, receiver=link.other_end(sender),
            generation=link.generation, raw=raw,
        )

    def _emit_all(self, sender: str, emissions) -> None:
        for link_id, cell in emissions:
            self.transmit(sender, link_id, cell)

    # -- calls ---------------------------------------------------------

    def start_call(self, src: str, dst: str, bw_kbps: int,
                   hold_s: Optional[float] = None,
                   delay_ms: Optional[int] = None) -> ConnectionStat:
        """Originate a connection from host *src* to host *dst* now."""
        if src not in self.hosts or dst not in self.hosts:
            raise ConfigError(f"call endpoints must be hosts: {src}, {dst}")
        from .wire import QosSpec

        qos = QosSpec(bw_kbps, self.config.qos_delay_ms
                      if delay_ms is None else delay_ms)
        hold_ns = None if hold_s is None else int(hold_s * 1e9)
        source = self.hosts[src]
        emission, record = source.originate(
            self.topology.addresses[dst], qos, self._now, hold_ns=hold_ns)
        stat = ConnectionStat(
            index=len(self.report.connections), src=src, dst=dst,
            requested_bw=bw_kbps, start_ns=self._now, final_key=record.key,
        )
        self.report.connections.append(stat)
        self._register_attempt(record.key, stat)
        self._emit_all(src, [emission])
        self.schedule(record.retry_deadline, RETRY_TIMEOUT,
                      host=src, key=record.key)
        return stat

    def _register_attempt(self, key: FloodKey, stat: ConnectionStat) -> None:
        self._calls[key] = stat
        stat.final_key = key
        point = FloodPoint(index=len(self.report.flood_points), key=key,
                           start_ns=self._now)
        self.report.flood_points.append(point)
        self._floods[key] = point

    # -- event handlers ------------------------------------------------

    def _handle_cell_arrival(self, payload: dict) -> None:
        link = self.topology.link(payload["link"])
        if not link.up or link.generation != payload["generation"]:
            self.cells_lost_linkdown += 1
            return
        receiver = payload["receiver"]
        try:
            cell = decode_cell(payload["raw"])
        except ChecksumMismatch:
            node = self.routers.get(receiver) or self.hosts.get(receiver)
            node.counters["checksum_drops"] = (
                node.counters.get("checksum_drops", 0) + 1)
            return
        except UnknownPacketType:
            node = self.routers.get(receiver) or self.hosts.get(receiver)
            node.counters["unknown_type_drops"] = (
                node.counters.get("unknown_type_drops", 0) + 1)
            return
        if receiver in self.routers:
            self._router_cell(self.routers[receiver], link.id, cell)
        else:
            self._host_cell(self.hosts[receiver], link.id, cell)

    def _router_cell(self, router: Router, link_id: str, cell: SignallingCell) -> None:
        if cell.packet_type == PacketType.CREQ:
            self._emit_all(router.name, router.on_creq(link_id, cell, self._now))
        elif cell.packet_type == PacketType.CACC:
            emissions, _entry = router.on_cacc(link_id, cell, self._now)
            self._emit_all(router.name, emissions)
        else:
            self._emit_all(router.name, router.on_rel(link_id, cell, self._now))

    def _host_cell(self, host: Host, link_id: str, cell: SignallingCell) -> None:
        if cell.packet_type == PacketType.CREQ:
            if cell.key.destination != host.address:
                host.counters["foreign_creq"] = (
                    host.counters.get("foreign_creq", 0) + 1)
                return
            window = host.dest_on_creq(link_id, cell, self._now, self.window_ns)
            if window is not None:
                self.schedule(window.deadline, WINDOW_EXPIRY,
                              host=host.name, key=cell.key)
        elif cell.packet_type == PacketType.CACC:
            if cell.key.source != host.address:
                host.counters["stale_cacc"] += 1
                return
            record, emissions, retry = host.src_on_cacc(cell, self._now)
            self._emit_all(host.name, emissions)
            self._after_source_transition(host, record, retry)
        # REL reaching a host endpoint needs no action

    def _after_source_transition(self, host: Host, record, retry) -> None:
        if record is None:
            return
        stat = self._calls.get(record.key)
        if stat is None:
            return
        if record.status in (host_mod.ESTABLISHED, host_mod.DEGRADED):
            stat.status = record.status
            stat.granted_bw = record.granted.bandwidth if record.granted else None
            stat.established_ns = self._now
            self._record_path(stat, record.key)
            if record.hold_ns is not None:
                self.schedule(self._now + record.hold_ns, CONNECTION_END,
                              host=host.name, key=record.key)
        elif record.status == host_mod.FAILED:
            stat.status = host_mod.FAILED
            stat.attempts = record.attempts
        if retry is not None:
            stat.attempts = retry.attempts
            self._register_attempt(retry.key, stat)
            self.schedule(retry.retry_deadline, RETRY_TIMEOUT,
                          host=host.name, key=retry.key)

    def _record_path(self, stat: ConnectionStat, key: FloodKey) -> None:
        """Walk the installed circuit from the source; also the loop check."""
        node = stat.src
        link = self.topology.access_link(node)
        path_links = [link.id]
        path_nodes = [node, link.other_end(node)]
        node = path_nodes[-1]
        visited = set(path_nodes)
        while node in self.routers:
            entry = self.routers[node].vc_by_key.get(key)
            if entry is None:
                break
            out = self.topology.link(entry.out_link)
            nxt = out.other_end(node)
            path_links.append(out.id)
            if nxt in visited:
                self.loops_detected += 1
                break
            visited.add(nxt)
            path_nodes.append(nxt)
            node = nxt
        stat.path_links = path_links
        stat.path_nodes = path_nodes
        win = self.hosts[stat.dst].windows.get(key)
        if win is not None:
            stat.best_cdm = win.best_cdm

    def _handle_window_expiry(self, payload: dict) -> None:
        host = self.hosts[payload["host"]]
        self._emit_all(host.name, host.dest_on_window_expiry(
            payload["key"], self._now))

    def _handle_retry_timeout(self, payload: dict) -> None:
        host = self.hosts[payload["host"]]
        record, emissions, retry = host.src_on_retry_timeout(
            payload["key"], self._now)
        self._emit_all(host.name, emissions)
        self._after_source_transition(host, record, retry)

    def _handle_call_arrival(self, payload: dict) -> None:
        pairs = self.config.pairs
        if pairs:
            src, dst = pairs[self.rng.randrange(len(pairs))]
        else:
            names = list(self.hosts)
            src = names[self.rng.randrange(len(names))]
            dst = src
            while dst == src:
                dst = names[self.rng.randrange(len(names))]
        hold_s = self.rng.expovariate(1.0 / self.config.hold_mean_s)
        self.start_call(src, dst, self.config.qos_bw_kbps, hold_s=hold_s)
        gap_s = self.rng.expovariate(self.config.call_rate)
        self.schedule(self._now + max(1, int(gap_s * 1e9)), CALL_ARRIVAL)

    def _handle_connection_end(self, payload: dict) -> None:
        host = self.hosts[payload["host"]]
        key = payload["key"]
        self._emit_all(host.name, host.release(key, self._now))
        stat = self._calls.get(key)
        if stat is not None and stat.status in (
                host_mod.ESTABLISHED, host_mod.DEGRADED):
            stat.status = host_mod.CLOSED

    def _handle_link_change(self, payload: dict) -> None:
        self.topology.set_link_state(payload["link"], payload["up"])

    def audit(self) -> None:
        """reserved bandwidth on every link must equal the sum of the VC
        reservations charged to it (each circuit hop reserves on the
        upstream, source-facing link of its router)."""
        expected: Dict[str, int] = {lid: 0 for lid in self.topology.links}
        for router in self.routers.values():
            for entry in router.vc_by_key.values():
                expected[entry.in_link] += entry.reserved_bw
        for lid, link in self.topology.links.items():
            if link.reserved_kbps != expected[lid]:
                raise AuditError(
                    f"link {lid}: reserved {link.reserved_kbps} != "
                    f"sum of VC reservations {expected[lid]}"
                )
            if not 0 <= link.reserved_kbps <= link.capacity_kbps:
                raise AuditError(f"link {lid}: reservation out of range")
        self.report.audits_passed += 1

    def _handle_audit_sweep(self, payload: dict) -> None:
        self.audit()
        self.schedule(self._now + int(self.config.audit_interval_s * 1e9),
                      AUDIT_SWEEP)

    _HANDLERS = {
        CELL_ARRIVAL: _handle_cell_arrival,
        WINDOW_EXPIRY: _handle_window_expiry,
        RETRY_TIMEOUT: _handle_retry_timeout,
        CALL_ARRIVAL: _handle_call_arrival,
        CONNECTION_END: _handle_connection_end,
        LINK_CHANGE: _handle_link_change,
        AUDIT_SWEEP: _handle_audit_sweep,
    }

    # -- main loop -----------------------------------------------------

    def run(self) -> SimulationReport:
        duration_ns = int(self.config.duration_s * 1e9)
        if duration_ns > 0:
            if self.config.call_rate > 0:
                gap_s = self.rng.expovariate(self.config.call_rate)
                self.schedule(max(1, int(gap_s * 1e9)), CALL_ARRIVAL)
            for time_s, src, dst, bw, hold_s in sorted(
                    self.config.calls, key=lambda call: call[0]):
                self.schedule(int(time_s * 1e9), "scripted_call",
                              src=src, dst=dst, bw=bw, hold_s=hold_s)
            if self.config.audit_interval_s > 0:
                self.schedule(int(self.config.audit_interval_s * 1e9),
                              AUDIT_SWEEP)
        while self._heap and self._heap[0][0] <= duration_ns:
            time_ns, seq, kind, payload = heapq.heappop(self._heap)
            self._now = time_ns
            self.report.events_processed += 1
            if self.trace_enabled:
                self.trace.append({"t_ns": time_ns, "seq": seq, "kind": kind})
            if kind == "scripted_call":
                self.start_call(payload["src"], payload["dst"], payload["bw"],
                                hold_s=payload["hold_s"])
            else:
                self._HANDLERS[kind](self, payload)
        self._now = duration_ns
        for lid, link in self.topology.links.items():
            self.report.links[lid].final_reserved_kbps = link.reserved_kbps
        for name, router in self.routers.items():
            self.report.node_counters[name] = dict(router.counters)
        for name, host in self.hosts.items():
            self.report.node_counters[name] = dict(host.counters)
        return self.report


def run_scenario(topology: Topology, config: Optional[ScenarioConfig] = None,
                 trace: bool = False) -> SimulationReport:
    """Build an engine, run it to completion, return the report."""
    return Engine(topology, config, trace=trace).run()
