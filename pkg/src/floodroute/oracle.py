"""Reference computations for tests and audits.

Deliberately independent of the router/engine code paths: plain BFS and
a closed-form flood replay, so simulator results can be checked against
something that shares no machinery with them.
"""

from __future__ import annotations

from collections import deque
from typing import Optional, Set, Tuple

from .fabric import HOST, ROUTER, Topology


class TooLarge(Exception):
    """brute_force_flood is restricted to small graphs by contract."""


def _adequate(link, min_bw: int) -> bool:
    return link.up and link.available_kbps >= min_bw


def min_hops(topology: Topology, a: str, b: str, min_bw: int = 0) -> Optional[int]:
    """Fewest links from *a* to *b* over up links with enough spare
    bandwidth; hosts never relay. None when unreachable."""
    if a == b:
        return 0
    dist = {a: 0}
    queue = deque([a])
    while queue:
        node = queue.popleft()
        if topology.kinds[node] == HOST and node != a:
            continue
        for link in topology.links_of(node):
            if not _adequate(link, min_bw):
                continue
            peer = link.other_end(node)
            if peer in dist:
                continue
            dist[peer] = dist[node] + 1
            if peer == b:
                return dist[peer]
            queue.append(peer)
    return None


def reachable(topology: Topology, a: str, b: str, min_bw: int = 0) -> bool:
    return min_hops(topology, a, b, min_bw) is not None


def brute_force_flood(
    topology: Topology, src: str, dst: str, bandwidth: int = 0
) -> Tuple[Optional[int], int]:
    """Replay one flood exhaustively on a small idle graph.

    Returns ``(best_cdm_at_destination, total_request_transmissions)``.
    The transmission count assumes uniform per-hop delays, under which the
    first copy a router sees already has the minimal metric, so every
    reached router performs exactly one flood action: one copy per
    adequate link except the arrival link. The count is therefore
    sum over reached routers of (adequate links - 1), independent of
    which adequate link happened to be the arrival one.
    """
    if len(topology.kinds) > 10:
        raise TooLarge(f"{len(topology.kinds)} nodes")
    if topology.kinds.get(src) != HOST or topology.kinds.get(dst) != HOST:
        raise ValueError("src and dst must be hosts")

    # the source emits on its (single) access link without an admission
    # check; every later hop must be an adequate router-to-router link
    access = topology.access_link(src)
    if not access.up:
        return None, 0
    first_hop = access.other_end(src)

    dist = {first_hop: 1}  # metric value carried on copies leaving a router
    queue = deque([first_hop])
    while queue:
        node = queue.popleft()
        for link in topology.links_of(node):
            if not _adequate(link, bandwidth):
                continue
            peer = link.other_end(node)
            if topology.kinds[peer] == ROUTER and peer not in dist:
                dist[peer] = dist[node] + 1
                queue.append(peer)

    transmissions = 0
    for router in dist:
        emitted = 0
        for link in topology.links_of(router):
            if not _adequate(link, bandwidth):
                continue
            if router == first_hop and link.id == access.id:
                continue  # arrival link of the first flood action
            emitted += 1
        if router != first_hop:
            emitted -= 1  # arrival link is always one of the adequate links
        transmissions += max(emitted, 0)

    # best metric delivered to the destination: cheapest router adjacent
    # to it over an adequate access link
    best_cdm = None
    for link in topology.links_of(dst):
        if not _adequate(link, bandwidth):
            continue
        peer = link.other_end(dst)
        if peer in dist and (best_cdm is None or dist[peer] < best_cdm):
            best_cdm = dist[peer]
    return best_cdm, transmissions
