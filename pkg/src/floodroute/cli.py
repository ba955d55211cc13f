"""Scenario runner.

Subcommands:
  run       simulate a scenario on a topology and write CSV reports
  oracle    print reference shortest-path / flood-replay numbers
  validate  check topology and scenario files without running
  vectors   emit the frozen wire-format golden vectors as hex

Exit codes: 0 success, 1 configuration error, 2 internal audit failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional, Tuple

from .engine import AuditError, ConfigError, Engine, ScenarioConfig, parse_scenario
from .fabric import ParseError, Topology, UnknownLink, ValidationError, build_topology, parse_topology
from .oracle import TooLarge, brute_force_flood, min_hops
from .wire import FloodKey, PacketType, QosSpec, SignallingCell, encode_cell

# Frozen wire-format vectors: name -> cell. Changing these is a wire
# format break and must fail the golden-vector test.
GOLDEN_VECTORS: List[Tuple[str, SignallingCell]] = [
    ("creq_zero", SignallingCell(
        packet_type=PacketType.CREQ, key=FloodKey(0, 0, 0),
        cdm=0, qos=QosSpec(0, 0))),
    ("creq_basic", SignallingCell(
        packet_type=PacketType.CREQ, key=FloodKey(0x0001, 0x0002, 0),
        cdm=0, qos=QosSpec(10, 100))),
    ("creq_mid_flood", SignallingCell(
        packet_type=PacketType.CREQ, key=FloodKey(0x0102, 0x0304, 17),
        cdm=5, qos=QosSpec(64, 25))),
    ("cacc_grant", SignallingCell(
        packet_type=PacketType.CACC, key=FloodKey(0x1234, 0xABCD, 7),
        cdm=5, qos=QosSpec(64, 20))),
    ("cacc_degraded", SignallingCell(
        packet_type=PacketType.CACC, key=FloodKey(0x0001, 0x0002, 1),
        cdm=3, qos=QosSpec(6, 100))),
    ("rel", SignallingCell(
        packet_type=PacketType.REL, key=FloodKey(0x0009, 0x0003, 255))),
]


def vector_lines() -> List[str]:
    return [f"{name} {encode_cell(cell).hex()}" for name, cell in GOLDEN_VECTORS]


def _load_topology(spec: str) -> Topology:
    try:
        return build_topology(spec)
    except (ValidationError, ValueError):
        pass  # not a builtin name: treat as a path
    with open(spec) as fh:
        return parse_topology(fh.read())


def _load_scenario(path: Optional[str]) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    with open(path) as fh:
        return parse_scenario(fh.read())


def _parse_link_event(text: str) -> Tuple[str, float]:
    if "@" not in text:
        raise ConfigError(f"want <link>@<t_s>, got {text!r}")
    link, t = text.rsplit("@", 1)
    try:
        return link, float(t)
    except ValueError:
        raise ConfigError(f"bad time in {text!r}") from None


def cmd_run(args) -> int:
    topology = _load_topology(args.topology)
    config = _load_scenario(args.scenario)
    if args.seed is not None:
        config.seed = args.seed
    engine = Engine(topology, config, trace=args.trace)
    for spec in args.fail_link or []:
        link, t = _parse_link_event(spec)
        engine.schedule_link_change(t, link, up=False)
    for spec in args.restore_link or []:
        link, t = _parse_link_event(spec)
        engine.schedule_link_change(t, link, up=True)
    report = engine.run()
    engine.audit()  # final sweep independent of the periodic one
    paths = report.write_outputs(args.out)
    if args.trace:
        trace_path = f"{args.out.rstrip('/')}/trace.jsonl"
        with open(trace_path, "w") as fh:
            for entry in engine.trace:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
        paths.append(trace_path)
    summary = report.summary()
    print(f"processed {summary['events_processed']} events, "
          f"{summary['connections']} connections "
          f"({summary['connections_by_status']})")
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_oracle(args) -> int:
    topology = _load_topology(args.topology)
    hops = min_hops(topology, args.src, args.dst, args.bw)
    print(f"min_hops({args.src}, {args.dst}, bw={args.bw}) = "
          f"{'unreachable' if hops is None else hops}")
    try:
        cdm, count = brute_force_flood(topology, args.src, args.dst, args.bw)
        print(f"brute_force_flood: best_cdm="
              f"{'unreachable' if cdm is None else cdm} creq_count={count}")
    except TooLarge as exc:
        print(f"brute_force_flood: skipped (too large: {exc})")
    except ValueError as exc:
        print(f"brute_force_flood: skipped ({exc})")
    return 0


def cmd_validate(args) -> int:
    topology = _load_topology(args.topology)
    config = _load_scenario(args.scenario)
    print(f"topology ok: {len(topology.routers())} routers, "
          f"{len(topology.hosts())} hosts, {len(topology.links)} links")
    print(f"scenario ok: duration={config.duration_s}s seed={config.seed} "
          f"metric={config.metric}")
    return 0


def cmd_vectors(args) -> int:
    lines = vector_lines()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    else:
        for line in lines:
            print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floodroute",
        description="flood-based route discovery simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("--topology", required=True,
                     help="builtin name (paper_sim, fig6, line:<n>, ring:<n>, "
                          "grid:<w>x<h>) or a topology file path")
    run.add_argument("--scenario", help="scenario config file")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--trace", action="store_true",
                     help="also write trace.jsonl")
    run.add_argument("--fail-link", action="append", metavar="ID@T",
                     help="take a link down at time T seconds")
    run.add_argument("--restore-link", action="append", metavar="ID@T",
                     help="bring a link back up at time T seconds")
    run.set_defaults(func=cmd_run)

    oracle = sub.add_parser("oracle", help="reference computations")
    oracle.add_argument("--topology", required=True)
    oracle.add_argument("--src", required=True)
    oracle.add_argument("--dst", required=True)
    oracle.add_argument("--bw", type=int, default=0)
    oracle.set_defaults(func=cmd_oracle)

    validate = sub.add_parser("validate", help="check config files")
    validate.add_argument("--topology", required=True)
    validate.add_argument("--scenario")
    validate.set_defaults(func=cmd_validate)

    vectors = sub.add_parser("vectors", help="emit wire golden vectors")
    vectors.add_argument("--out", help="write to a file instead of stdout")
    vectors.set_defaults(func=cmd_vectors)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError, ValidationError, UnknownLink,
            FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AuditError as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
