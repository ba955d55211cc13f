"""Run statistics: per-connection outcomes, flood volume, link loads.

All stored quantities are exact integers (bytes, counts, nanoseconds);
rates are rendered with fixed three-decimal precision so that two runs
with the same config and seed produce byte-identical CSV files.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .wire import CELL_SIZE, FloodKey

CSV_SCHEMA_VERSION = "floodroute-csv-1"


@dataclass
class ConnectionStat:
    """One logical connection (a call), across all its flood attempts."""

    index: int
    src: str
    dst: str
    requested_bw: int
    status: str = "flooding"
    granted_bw: Optional[int] = None
    attempts: int = 1
    final_key: Optional[FloodKey] = None
    path_links: List[str] = field(default_factory=list)
    path_nodes: List[str] = field(default_factory=list)
    start_ns: int = 0
    established_ns: Optional[int] = None
    best_cdm: Optional[int] = None


@dataclass
class FloodPoint:
    """One flood attempt: how many request copies the routers emitted."""

    index: int
    key: FloodKey
    start_ns: int
    creq_count: int = 0


@dataclass
class LinkStat:
    link_id: str
    capacity_kbps: int
    signalling_bytes: int = 0
    creq_tx: int = 0
    cacc_tx: int = 0
    rel_tx: int = 0
    final_reserved_kbps: int = 0


class SimulationReport:
    def __init__(self, duration_ns: int, seed: int, config: Optional[dict] = None):
        self.duration_ns = duration_ns
        self.seed = seed
        self.config = dict(config or {})
        self.connections: List[ConnectionStat] = []
        self.flood_points: List[FloodPoint] = []
        self.links: Dict[str, LinkStat] = {}
        self.node_counters: Dict[str, Dict[str, int]] = {}
        self.events_processed: int = 0
        self.audits_passed: int = 0

    # -- the quantitative figures -------------------------------------

    def flood_volume_series(self) -> List[Tuple[int, int]]:
        """(attempt index, request transmissions) in flood start order."""
        return [(p.index, p.creq_count) for p in self.flood_points]

    def signalling_load(self, link_id: str) -> float:
        """Signalling traffic on one link in kbit/s over the whole run."""
        if self.duration_ns <= 0:
            raise ValueError("signalling_load needs a positive duration")
        bits = self.links[link_id].signalling_bytes * 8
        return bits / (self.duration_ns / 1e9) / 1000.0

    def path_optimality(self, topology, min_bw: int = 0) -> Optional[float]:
        """Fraction of established connections routed at the BFS minimum.

        None when nothing was established (not applicable).
        """
        from .oracle import min_hops

        established = [
            c for c in self.connections
            if c.status in ("established", "degraded_established", "closed")
            and c.path_links
        ]
        if not established:
            return None
        optimal = sum(
            1 for c in established
            if min_hops(topology, c.src, c.dst, min_bw) == len(c.path_links)
        )
        return optimal / len(established)

    def total_creq_per_link(self) -> int:
        return sum(l.creq_tx for l in self.links.values())

    def total_creq_per_connection(self) -> int:
        return sum(p.creq_count for p in self.flood_points)

    # -- serialization ------------------------------------------------

    def write_outputs(self, out_dir: str) -> List[str]:
        """Emit connections.csv, flood_volume.csv, links.csv and
        summary.json; returns the file paths."""
        os.makedirs(out_dir, exist_ok=True)
        paths = []

        path = os.path.join(out_dir, "connections.csv")
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema: connections {CSV_SCHEMA_VERSION}\n")
            w = csv.writer(fh)
            w.writerow([
                "index", "src", "dst", "requested_bw_kbps", "granted_bw_kbps",
                "status", "attempts", "best_cdm", "path", "start_ns",
                "established_ns",
            ])
            for c in self.connections:
                w.writerow([
                    c.index, c.src, c.dst, c.requested_bw,
                    "" if c.granted_bw is None else c.granted_bw,
                    c.status, c.attempts,
                    "" if c.best_cdm is None else c.best_cdm,
                    "|".join(c.path_links), c.start_ns,
                    "" if c.established_ns is None else c.established_ns,
                ])
        paths.append(path)

        path = os.path.join(out_dir, "flood_volume.csv")
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema: flood_volume {CSV_SCHEMA_VERSION}\n")
            w = csv.writer(fh)
            w.writerow(["index", "src_addr", "dst_addr", "connection_no",
                        "start_ns", "creq_count"])
            for p in self.flood_points:
                w.writerow([p.index, p.key.source, p.key.destination,
                            p.key.connection_no, p.start_ns, p.creq_count])
        paths.append(path)

        path = os.path.join(out_dir, "links.csv")
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema: links {CSV_SCHEMA_VERSION}\n")
            w = csv.writer(fh)
            w.writerow(["link", "capacity_kbps", "signalling_bytes", "creq_tx",
                        "cacc_tx", "rel_tx", "signalling_kbps",
                        "final_reserved_kbps"])
            for lid in sorted(self.links):
                l = self.links[lid]
                kbps = (
                    f"{self.signalling_load(lid):.3f}"
                    if self.duration_ns > 0 else "0.000"
                )
                w.writerow([l.link_id, l.capacity_kbps, l.signalling_bytes,
                            l.creq_tx, l.cacc_tx, l.rel_tx, kbps,
                            l.final_reserved_kbps])
        paths.append(path)

        path = os.path.join(out_dir, "summary.json")
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(path)
        return paths

    def summary(self) -> dict:
        by_status: Dict[str, int] = {}
        for c in self.connections:
            by_status[c.status] = by_status.get(c.status, 0) + 1
        return {
            "schema": CSV_SCHEMA_VERSION,
            "seed": self.seed,
            "duration_s": self.duration_ns / 1e9,
            "cell_size_bytes": CELL_SIZE,
            "connections": len(self.connections),
            "flood_attempts": len(self.flood_points),
            "connections_by_status": by_status,
            "creq_total": self.total_creq_per_connection(),
            "events_processed": self.events_processed,
            "audits_passed": self.audits_passed,
        }
