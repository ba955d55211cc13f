"""Endpoint state machines.

The source side originates one flood per connection attempt, arms a retry
timer, and judges the acceptance cell that comes back: full grant, a
degraded grant (accept or tear down and retry, per policy), or a zero
grant (failure). The destination side opens a short time-window on the
first request of a flood, absorbs competing copies, and answers once on
the lowest-CDM arrival link when the window closes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .fabric import Topology
from .wire import FloodKey, PacketType, QosSpec, SignallingCell

Emission = Tuple[str, SignallingCell]

FLOODING = "flooding"
ESTABLISHED = "established"
DEGRADED = "degraded_established"
FAILED = "failed"
CLOSED = "closed"

ACCEPT_LOWER = "accept"
RETRY_ON_DEGRADE = "retry"


class NoAccessLink(Exception):
    """Host has no usable link to a router."""


@dataclass
class ConnectionRecord:
    key: FloodKey
    requested: QosSpec
    granted: Optional[QosSpec] = None
    status: str = FLOODING
    attempts: int = 1
    policy: str = ACCEPT_LOWER
    started_at: int = 0
    established_at: Optional[int] = None
    retry_deadline: int = 0
    hold_ns: Optional[int] = None  # simulator-side lifetime, if any


@dataclass
class WindowState:
    key: FloodKey
    best_cdm: int
    best_link: str
    deadline: int
    requested: QosSpec = field(default_factory=lambda: QosSpec(0, 0))
    closed: bool = False


class Host:
    def __init__(self, name: str, topology: Topology,
                 retry_timeout_ns: int = 0, max_retries: int = 3,
                 degrade_policy: str = ACCEPT_LOWER):
        self.name = name
        self.topology = topology
        self.address = topology.addresses[name]
        self.retry_timeout_ns = retry_timeout_ns
        self.max_retries = max_retries
        self.degrade_policy = degrade_policy
        self._next_connection_no: Dict[int, int] = {}  # per destination address
        self.connections: Dict[FloodKey, ConnectionRecord] = {}
        self.windows: Dict[FloodKey, WindowState] = {}
        self.counters: Dict[str, int] = {
            "late_creq": 0,
            "stale_cacc": 0,
            "creq_rx": 0,
        }

    def _access_link(self):
        links = [l for l in self.topology.links_of(self.name)]
        if not links:
            raise NoAccessLink(self.name)
        return links[0]

    # -- source side ----------------------------------------------------

    def originate(self, dst_address: int, qos: QosSpec, now: int,
                  policy: Optional[str] = None, attempts: int = 1,
                  hold_ns: Optional[int] = None) -> Tuple[Emission, ConnectionRecord]:
        """Start a flood for a new connection attempt."""
        link = self._access_link()
        conn_no = self._next_connection_no.get(dst_address, 0)
        self._next_connection_no[dst_address] = (conn_no + 1) % 256
        key = FloodKey(source=self.address, destination=dst_address,
                       connection_no=conn_no)
        record = ConnectionRecord(
            key=key, requested=qos, started_at=now,
            policy=policy if policy is not None else self.degrade_policy,
            attempts=attempts,
            retry_deadline=now + self.retry_timeout_ns,
            hold_ns=hold_ns,
        )
        self.connections[key] = record
        cell = SignallingCell(packet_type=PacketType.CREQ, key=key, cdm=0, qos=qos)
        return (link.id, cell), record

    def src_on_cacc(self, cell: SignallingCell, now: int
                    ) -> Tuple[Optional[ConnectionRecord], List[Emission], Optional[ConnectionRecord]]:
        """Handle the acceptance for one of our floods.

        Returns (record, emissions, retry_record): emissions carry any
        release cell, retry_record is the fresh attempt when the degraded
        or failed offer is retried.
        """
        record = self.connections.get(cell.key)
        if record is None or record.status != FLOODING:
            self.counters["stale_cacc"] += 1
            return None, [], None
        granted = cell.qos
        record.granted = granted
        if granted.bandwidth >= record.requested.bandwidth:
            record.status = ESTABLISHED
            record.established_at = now
            return record, [], None
        rel = SignallingCell(packet_type=PacketType.REL, key=cell.key)
        link = self._access_link()
        can_retry = record.attempts <= self.max_retries
        if granted.bandwidth > 0 and (
                record.policy == ACCEPT_LOWER or not can_retry):
            record.status = DEGRADED
            record.established_at = now
            return record, [], None
        # zero grant, or degrade policy says try again: tear down and reflood
        record.status = FAILED if not can_retry else "retrying"
        emissions: List[Emission] = [(link.id, rel)]
        retry_record = None
        if can_retry:
            em, retry_record = self.originate(
                cell.key.destination, record.requested, now,
                policy=record.policy, attempts=record.attempts + 1,
                hold_ns=record.hold_ns,
            )
            emissions.append(em)
        return record, emissions, retry_record

    def src_on_retry_timeout(self, key: FloodKey, now: int
                             ) -> Tuple[Optional[ConnectionRecord], List[Emission], Optional[ConnectionRecord]]:
        """No acceptance arrived in time: reflood or give up."""
        record = self.connections.get(key)
        if record is None or record.status != FLOODING or now < record.retry_deadline:
            return None, [], None
        if record.attempts > self.max_retries:
            record.status = FAILED
            return record, [], None
        record.status = "retrying"
        em, retry_record = self.originate(
            key.destination, record.requested, now,
            policy=record.policy, attempts=record.attempts + 1,
            hold_ns=record.hold_ns,
        )
        return record, [em], retry_record

    def release(self, key: FloodKey, now: int) -> List[Emission]:
        """Tear down an established connection (simulator plumbing)."""
        record = self.connections.get(key)
        if record is None or record.status not in (ESTABLISHED, DEGRADED):
            return []
        record.status = CLOSED
        link = self._access_link()
        return [(link.id, SignallingCell(packet_type=PacketType.REL, key=key))]

    # -- destination side -------------------------------------------------

    def dest_on_creq(self, arrival_link: str, cell: SignallingCell, now: int,
                     window_ns: int) -> Optional[WindowState]:
        """Absorb a request copy; returns a new window when one opened."""
        self.counters["creq_rx"] += 1
        win = self.windows.get(cell.key)
        if win is None:
            win = WindowState(key=cell.key, best_cdm=cell.cdm,
                              best_link=arrival_link, deadline=now + window_ns,
                              requested=cell.qos)
            self.windows[cell.key] = win
            return win
        if win.closed:
            self.counters["late_creq"] += 1
            return None
        if cell.cdm < win.best_cdm:  # ties keep the earlier arrival
            win.best_cdm = cell.cdm
            win.best_link = arrival_link
        return None

    def dest_on_window_expiry(self, key: FloodKey, now: int) -> List[Emission]:
        """Close the window and answer along the best recorded link, granting
        the requested QoS (routers whittle it down on the way back)."""
        win = self.windows.get(key)
        if win is None or win.closed:
            return []
        win.closed = True
        cell = SignallingCell(packet_type=PacketType.CACC, key=key,
                              cdm=win.best_cdm, qos=win.requested)
        return [(win.best_link, cell)]
