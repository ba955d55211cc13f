"""Switching-node state machine.

A router owns no routing table. Everything it needs to forward is in two
places: the flood queue (best partial route per recent flood, used while
a connection is being discovered) and the VC table (installed circuits,
used for data cells). Connection requests are flooded to all adequate
output links; the acceptance cell walks the recorded best links back to
the source, reserving bandwidth and installing the circuit hop by hop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import metric
from .fabric import Topology
from .flood_queue import COMMITTED_REJECT, IMPROVED, NOT_BETTER, FloodQueue
from .metric import SATURATED, MetricPolicy
from .wire import FloodKey, PacketType, QosSpec, SignallingCell

Emission = Tuple[str, SignallingCell]  # (link id, cell)


@dataclass
class VcTableEntry:
    key: FloodKey
    in_link: str  # upstream, toward the source; carries this hop's reservation
    in_vc: int
    out_link: str  # downstream, toward the destination
    out_vc: int
    reserved_bw: int  # kbps actually reserved on in_link


class Router:
    def __init__(
        self,
        name: str,
        topology: Topology,
        policy: MetricPolicy = metric.HOP_COUNT,
        flood_queue_capacity: int = 1024,
    ):
        self.name = name
        self.topology = topology
        self.address = topology.addresses[name]
        self.policy = policy
        self.flood_queue = FloodQueue(flood_queue_capacity)
        self.vc_by_key: Dict[FloodKey, VcTableEntry] = {}
        self.vc_in_index: Dict[Tuple[str, int], VcTableEntry] = {}
        self.counters: Dict[str, int] = {
            "creq_rx": 0,
            "creq_tx": 0,
            "creq_duplicate_discard": 0,
            "creq_refloods": 0,
            "creq_saturated": 0,
            "cacc_relayed": 0,
            "cacc_orphaned": 0,
            "cacc_duplicate": 0,
            "vc_exhausted": 0,
            "checksum_drops": 0,
        }

    # -- CREQ flooding -------------------------------------------------

    def _flood(self, cell: SignallingCell, exclude_link: str) -> List[Emission]:
        """One flood action: copy to every adequate output link but the
        one the request came in on."""
        out: List[Emission] = []
        for link in self.topology.links_of(self.name):
            if link.id == exclude_link or not link.up:
                continue
            if link.available_kbps < cell.qos.bandwidth:
                continue
            cdm = metric.increment_cdm(cell.cdm, self.policy, link)
            if cdm is SATURATED:
                self.counters["creq_saturated"] += 1
                continue
            out.append((link.id, SignallingCell(
                packet_type=PacketType.CREQ,
                key=cell.key,
                cdm=cdm,
                qos=cell.qos,
            )))
        self.counters["creq_tx"] += len(out)
        return out

    def on_creq(self, arrival_link: str, cell: SignallingCell, now: int) -> List[Emission]:
        self.counters["creq_rx"] += 1
        if self.flood_queue.lookup(cell.key) is None:
            self.flood_queue.record_new(cell.key, cell.cdm, arrival_link, now)
            return self._flood(cell, arrival_link)
        outcome = self.flood_queue.try_improve(cell.key, cell.cdm, arrival_link)
        if outcome == IMPROVED:
            self.counters["creq_refloods"] += 1
            return self._flood(cell, arrival_link)
        assert outcome in (NOT_BETTER, COMMITTED_REJECT)
        self.counters["creq_duplicate_discard"] += 1
        return []

    # -- CACC relay and VC installation --------------------------------

    def on_cacc(
        self, arrival_link: str, cell: SignallingCell, now: int
    ) -> Tuple[List[Emission], Optional[VcTableEntry]]:
        key = cell.key
        entry = self.flood_queue.lookup(key)
        if entry is None:
            # the flood record was displaced before the acceptance came
            # back; nothing to relay, the source will retry
            self.counters["cacc_orphaned"] += 1
            return [], None
        if key in self.vc_by_key:
            self.counters["cacc_duplicate"] += 1
            return [], None
        self.flood_queue.commit(key)
        upstream = self.topology.link(entry.arrival_link)
        downstream = self.topology.link(arrival_link)
        in_vc = upstream.alloc_vc(key)
        out_vc = downstream.alloc_vc(key)
        if in_vc is None or out_vc is None:
            # no free VC number: degrade to a zero grant so the source
            # still learns the outcome
            self.counters["vc_exhausted"] += 1
            relay = SignallingCell(
                packet_type=PacketType.CACC, key=key, cdm=cell.cdm,
                qos=QosSpec(0, cell.qos.max_delay),
            )
            self.counters["cacc_relayed"] += 1
            return [(upstream.id, relay)], None
        granted = min(cell.qos.bandwidth, upstream.available_kbps)
        if granted:
            upstream.reserve(granted)
        vc_entry = VcTableEntry(
            key=key, in_link=upstream.id, in_vc=in_vc,
            out_link=downstream.id, out_vc=out_vc, reserved_bw=granted,
        )
        self.vc_by_key[key] = vc_entry
        self.vc_in_index[(upstream.id, in_vc)] = vc_entry
        relay = SignallingCell(
            packet_type=PacketType.CACC, key=key, cdm=cell.cdm,
            qos=QosSpec(granted, cell.qos.max_delay),
        )
        self.counters["cacc_relayed"] += 1
        return [(upstream.id, relay)], vc_entry

    # -- data plane ----------------------------------------------------

    def on_data(self, arrival_link: str, in_vc: int, payload) -> Optional[Tuple[str, int, object]]:
        entry = self.vc_in_index.get((arrival_link, in_vc))
        if entry is None:
            return None
        return entry.out_link, entry.out_vc, payload

    # -- release -------------------------------------------------------

    def on_rel(self, arrival_link: str, cell: SignallingCell, now: int) -> List[Emission]:
        entry = self.vc_by_key.pop(cell.key, None)
        if entry is None:
            return []
        self.vc_in_index.pop((entry.in_link, entry.in_vc), None)
        in_link = self.topology.link(entry.in_link)
        out_link = self.topology.link(entry.out_link)
        if entry.reserved_bw:
            in_link.release(entry.reserved_bw)
        in_link.free_vc(cell.key)
        out_link.free_vc(cell.key)
        # keep the release moving toward the destination
        return [(entry.out_link, cell)]
