"""Flood-based virtual-circuit route discovery.

A protocol library (signalling cell codec, per-router flood queue and
switching state machine, endpoint state machines) plus a deterministic
discrete-event simulator that drives them over configurable topologies.
"""

from .engine import Engine, ScenarioConfig, parse_scenario, run_scenario
from .fabric import Topology, build_topology, parse_topology
from .flood_queue import FloodQueue
from .host import Host
from .metric import MetricPolicy, parse_metric
from .metrics import SimulationReport
from .oracle import brute_force_flood, min_hops
from .router import Router
from .wire import (
    CELL_SIZE,
    FloodKey,
    PacketType,
    QosSpec,
    SignallingCell,
    decode_cell,
    encode_cell,
)

__all__ = [
    "CELL_SIZE",
    "Engine",
    "FloodKey",
    "FloodQueue",
    "Host",
    "MetricPolicy",
    "PacketType",
    "QosSpec",
    "Router",
    "ScenarioConfig",
    "SignallingCell",
    "SimulationReport",
    "Topology",
    "brute_force_flood",
    "build_topology",
    "decode_cell",
    "encode_cell",
    "min_hops",
    "parse_metric",
    "parse_scenario",
    "parse_topology",
    "run_scenario",
]

__version__ = "0.1.0"
