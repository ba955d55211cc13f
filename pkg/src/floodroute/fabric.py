"""Topology graph and directed-link state.

Links are full duplex: two directed channels that share one bandwidth
reservation pool and one VC-number space. A signalling or data cell
crossing a link takes ``prop_delay + 53*8/capacity`` to arrive.

Topologies come from a small line-oriented text grammar or from builtin
generators (``paper_sim``, ``fig6``, ``line:<n>``, ``ring:<n>``,
``grid:<w>x<h>``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .wire import CELL_SIZE, FloodKey

ROUTER = "router"
HOST = "host"

DEFAULT_CAPACITY_KBPS = 10_000
DEFAULT_DELAY_MS = 1

VC_MIN = 1
VC_MAX = 255


class ParseError(Exception):
    """Topology text is syntactically malformed; carries a line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ValidationError(Exception):
    """Topology is well-formed but semantically inconsistent."""


class UnknownLink(Exception):
    pass


class UnderflowOnRelease(Exception):
    """release() asked to give back more bandwidth than is reserved."""


@dataclass
class LinkState:
    id: str
    a: str
    b: str
    capacity_kbps: int
    prop_delay_ns: int
    reserved_kbps: int = 0
    up: bool = True
    generation: int = 0  # bumped on every down transition; in-flight cells die
    _vc_by_key: Dict[FloodKey, int] = field(default_factory=dict)
    _next_vc: int = VC_MIN
    _free_vcs: List[int] = field(default_factory=list)

    @property
    def available_kbps(self) -> int:
        return self.capacity_kbps - self.reserved_kbps

    @property
    def tx_delay_ns(self) -> int:
        # 53 bytes at capacity_kbps kilobits per second
        return (CELL_SIZE * 8 * 1_000_000) // self.capacity_kbps

    @property
    def cell_delay_ns(self) -> int:
        return self.prop_delay_ns + self.tx_delay_ns

    def other_end(self, node: str) -> str:
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise ValueError(f"{node} is not an endpoint of {self.id}")

    def reserve(self, kbps: int) -> bool:
        """Reserve bandwidth; False (nothing reserved) when insufficient."""
        if kbps < 0:
            raise ValueError("negative reservation")
        if kbps > self.available_kbps:
            return False
        self.reserved_kbps += kbps
        return True

    def release(self, kbps: int) -> None:
        if kbps > self.reserved_kbps:
            raise UnderflowOnRelease(
                f"{self.id}: release {kbps} > reserved {self.reserved_kbps}"
            )
        self.reserved_kbps -= kbps

    def set_up(self, up: bool) -> None:
        if self.up and not up:
            self.generation += 1
        self.up = up

    # VC numbers: both endpoint routers must use the same label for one
    # connection on the shared link, but signalling cells cannot carry it
    # (their VC field is pinned to 0), so allocation is idempotent per
    # flood key: whichever end asks first fixes the number.
    def alloc_vc(self, key: FloodKey) -> Optional[int]:
        vc = self._vc_by_key.get(key)
        if vc is not None:
            return vc
        if self._free_vcs:
            vc = self._free_vcs.pop()
        elif self._next_vc <= VC_MAX:
            vc = self._next_vc
            self._next_vc += 1
        else:
            return None  # exhausted
        self._vc_by_key[key] = vc
        return vc

    def vc_for_key(self, key: FloodKey) -> Optional[int]:
        return self._vc_by_key.get(key)

    def free_vc(self, key: FloodKey) -> None:
        vc = self._vc_by_key.pop(key, None)
        if vc is not None:
            self._free_vcs.append(vc)


class Topology:
    def __init__(self):
        self.kinds: Dict[str, str] = {}  # node name -> ROUTER | HOST
        self.addresses: Dict[str, int] = {}  # node name -> 16-bit address
        self.links: Dict[str, LinkState] = {}
        self._adjacency: Dict[str, List[str]] = {}  # node -> link ids, stable order

    # -- construction -------------------------------------------------

    def add_node(self, name: str, kind: str) -> None:
        if name in self.kinds:
            raise ValidationError(f"duplicate node {name!r}")
        if kind not in (ROUTER, HOST):
            raise ValidationError(f"node {name!r}: bad kind {kind!r}")
        self.kinds[name] = kind
        self.addresses[name] = len(self.addresses) + 1  # address 0 is reserved
        self._adjacency[name] = []

    def add_link(
        self,
        a: str,
        b: str,
        capacity_kbps: int = DEFAULT_CAPACITY_KBPS,
        delay_ms: int = DEFAULT_DELAY_MS,
        link_id: Optional[str] = None,
    ) -> LinkState:
        for end in (a, b):
            if end not in self.kinds:
                raise ValidationError(f"link endpoint {end!r} is not a defined node")
        if a == b:
            raise ValidationError(f"self-link at {a!r}")
        if capacity_kbps <= 0:
            raise ValidationError(f"link {a}-{b}: capacity must be positive")
        if link_id is None:
            base = f"{a}-{b}"
            link_id = base
            n = 1
            while link_id in self.links:
                n += 1
                link_id = f"{base}#{n}"
        elif link_id in self.links:
            raise ValidationError(f"duplicate link id {link_id!r}")
        link = LinkState(
            id=link_id,
            a=a,
            b=b,
            capacity_kbps=capacity_kbps,
            prop_delay_ns=delay_ms * 1_000_000,
        )
        self.links[link_id] = link
        self._adjacency[a].append(link_id)
        self._adjacency[b].append(link_id)
        return link

    def validate(self) -> None:
        for name, kind in self.kinds.items():
            if kind == HOST and not self._adjacency[name]:
                raise ValidationError(f"host {name!r} has no access link")

    # -- queries ------------------------------------------------------

    def links_of(self, node: str) -> List[LinkState]:
        return [self.links[i] for i in self._adjacency[node]]

    def link(self, link_id: str) -> LinkState:
        try:
            return self.links[link_id]
        except KeyError:
            raise UnknownLink(link_id) from None

    def routers(self) -> List[str]:
        return [n for n, k in self.kinds.items() if k == ROUTER]

    def hosts(self) -> List[str]:
        return [n for n, k in self.kinds.items() if k == HOST]

    def node_by_address(self, address: int) -> Optional[str]:
        for name, addr in self.addresses.items():
            if addr == address:
                return name
        return None

    def access_link(self, host: str) -> LinkState:
        return self.links_of(host)[0]

    def set_link_state(self, link_id: str, up: bool) -> None:
        self.link(link_id).set_up(up)

    def diameter_hops(self) -> int:
        """Longest shortest-path (in links) between any two nodes, hosts
        treated as endpoints only. Used to size the destination window."""
        best = 1
        for start in self.kinds:
            dist = {start: 0}
            frontier = [start]
            while frontier:
                nxt = []
                for node in frontier:
                    if self.kinds[node] == HOST and dist[node] > 0:
                        continue  # hosts do not forward
                    for link in self.links_of(node):
                        if not link.up:
                            continue
                        peer = link.other_end(node)
                        if peer not in dist:
                            dist[peer] = dist[node] + 1
                            nxt.append(peer)
                frontier = nxt
            best = max(best, max(dist.values()))
        return best

    def max_cell_delay_ns(self) -> int:
        return max((l.cell_delay_ns for l in self.links.values()), default=1_000_000)


# -- text grammar ----------------------------------------------------


def parse_topology(text: str) -> Topology:
    """Parse the line-oriented topology grammar.

    ``node <name> router|host``
    ``link <a> <b> [capacity_kbps=<int>] [delay_ms=<int>]``
    ``#`` starts a comment.
    """
    topo = Topology()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "node":
                if len(parts) != 3:
                    raise ParseError(lineno, "want: node <name> router|host")
                topo.add_node(parts[1], parts[2])
            elif parts[0] == "link":
                if len(parts) < 3:
                    raise ParseError(lineno, "want: link <a> <b> [key=value...]")
                kwargs = {"capacity_kbps": DEFAULT_CAPACITY_KBPS, "delay_ms": DEFAULT_DELAY_MS}
                for kv in parts[3:]:
                    if "=" not in kv:
                        raise ParseError(lineno, f"bad attribute {kv!r}")
                    k, v = kv.split("=", 1)
                    if k not in ("capacity_kbps", "delay_ms"):
                        raise ParseError(lineno, f"unknown attribute {k!r}")
                    try:
                        kwargs[k] = int(v)
                    except ValueError:
                        raise ParseError(lineno, f"{k} must be an integer") from None
                topo.add_link(parts[1], parts[2], **kwargs)
            else:
                raise ParseError(lineno, f"unknown directive {parts[0]!r}")
        except ValidationError as exc:
            raise ParseError(lineno, str(exc)) from None
    topo.validate()
    return topo


# -- builtin generators ----------------------------------------------


def _paper_sim() -> Topology:
    """The measurement network: 5 switches, 9 hosts, 16 links in total
    (7 inter-switch plus 9 host access links).

    Only the counts are fixed; the inter-switch wiring here is this
    repository's documented choice: a 5-ring with two chords, which
    keeps the switch core 2-edge-connected so any single
    inter-switch link can fail without partitioning it. With this wiring
    an uncontended flood costs sum over switches of (degree - 1) = 18
    request transmissions per connection.
    """
    t = Topology()
    for i in range(1, 6):
        t.add_node(f"R{i}", ROUTER)
    hosts_per_router = {"R1": 2, "R2": 2, "R3": 2, "R4": 2, "R5": 1}
    h = 0
    for r, count in hosts_per_router.items():
        for _ in range(count):
            h += 1
            t.add_node(f"h{h}", HOST)
            t.add_link(f"h{h}", r)
    core = [("R1", "R2"), ("R2", "R3"), ("R3", "R4"), ("R4", "R5"), ("R5", "R1"),
            ("R1", "R3"), ("R2", "R4")]
    for a, b in core:
        t.add_link(a, b)
    t.validate()
    return t


def _fig6() -> Topology:
    """Two subnets joined by exterior routers, plus three parallel links
    between border nodes A and H: the multipath load-sharing scenario.

    The parallel A-H links are the short routes a load-aware metric must
    spread connections across; the exterior routers give the subnets an
    alternative interconnect.
    """
    t = Topology()
    for r in ("A", "B1", "H", "C1", "E1", "E2", "E3"):
        t.add_node(r, ROUTER)
    t.add_node("hA", HOST)
    t.add_node("hH", HOST)
    t.add_link("hA", "A", capacity_kbps=20_000)
    t.add_link("hH", "H", capacity_kbps=20_000)
    # subnet 1: A-B1; subnet 2: H-C1
    t.add_link("A", "B1")
    t.add_link("H", "C1")
    # three parallel A-H links (the tested routes)
    for _ in range(3):
        t.add_link("A", "H", capacity_kbps=5_000)
    # exterior routers joining the subnets the long way round
    for e in ("E1", "E2", "E3"):
        t.add_link("B1", e)
        t.add_link(e, "C1")
    t.validate()
    return t


def _line(n: int) -> Topology:
    t = Topology()
    for i in range(1, n + 1):
        t.add_node(f"R{i}", ROUTER)
    t.add_node("h1", HOST)
    t.add_node("h2", HOST)
    t.add_link("h1", "R1")
    t.add_link("h2", f"R{n}")
    for i in range(1, n):
        t.add_link(f"R{i}", f"R{i + 1}")
    t.validate()
    return t


def _ring(n: int) -> Topology:
    t = Topology()
    for i in range(1, n + 1):
        t.add_node(f"R{i}", ROUTER)
    t.add_node("h1", HOST)
    t.add_node("h2", HOST)
    t.add_link("h1", "R1")
    t.add_link("h2", f"R{n // 2 + 1}")
    for i in range(1, n + 1):
        t.add_link(f"R{i}", f"R{i % n + 1}")
    t.validate()
    return t


def _grid(w: int, h: int) -> Topology:
    t = Topology()
    for y in range(h):
        for x in range(w):
            t.add_node(f"R{x}_{y}", ROUTER)
    t.add_node("h1", HOST)
    t.add_node("h2", HOST)
    t.add_link("h1", "R0_0")
    t.add_link("h2", f"R{w - 1}_{h - 1}")
    for y in range(h):
        for x in range(w):
            if x + 1 < w:
                t.add_link(f"R{x}_{y}", f"R{x + 1}_{y}")
            if y + 1 < h:
                t.add_link(f"R{x}_{y}", f"R{x}_{y + 1}")
    t.validate()
    return t


def build_topology(name: str) -> Topology:
    """Builtin generator lookup: paper_sim, fig6, line:<n>, ring:<n>,
    grid:<w>x<h>."""
    if name == "paper_sim":
        return _paper_sim()
    if name == "fig6":
        return _fig6()
    if name.startswith("line:"):
        n = int(name[5:])
        if n < 1:
            raise ValidationError("line:<n> needs n >= 1")
        return _line(n)
    if name.startswith("ring:"):
        n = int(name[5:])
        if n < 3:
            raise ValidationError("ring:<n> needs n >= 3")
        return _ring(n)
    if name.startswith("grid:"):
        try:
            w, h = (int(p) for p in name[5:].split("x"))
        except ValueError:
            raise ValidationError("grid:<w>x<h> wants two integers") from None
        if w < 1 or h < 1 or w * h < 2:
            raise ValidationError("grid needs at least two routers")
        return _grid(w, h)
    raise ValidationError(f"unknown builtin topology {name!r}")
