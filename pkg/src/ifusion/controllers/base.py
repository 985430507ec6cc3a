"""Machinery shared by the three domain controllers: deterministic
constrained path search and staged multi-device configuration commits
with compensation."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from ..devices import ConfigTree
from ..errors import CompensationFailed, NoPath
from ..model import Identifier, LinkRecord


def constrained_shortest_path(links, head: Identifier, tail: Identifier,
                              metric=None, usable=None) -> list[Identifier]:
    """CSPF over bidirectional links.

    Links failing ``usable`` are pruned. The best path minimizes
    (sum of metric, hop count, node-id sequence); the third component makes
    ties deterministic. Returns the ordered list of link ids; an empty list
    when head == tail. Raises NoPath with reason PRUNED_ALL or DISCONNECTED.
    """
    metric = metric or (lambda link: link.te.te_metric)
    usable = usable or (lambda link: True)
    if head == tail:
        return []

    adjacency: dict[Identifier, list[LinkRecord]] = {}
    for link in links:
        if not usable(link):
            continue
        a, z = link.nodes()
        adjacency.setdefault(a, []).append(link)
        adjacency.setdefault(z, []).append(link)

    # label = (cost, hops, node-render tuple); extension preserves order,
    # so plain Dijkstra over the composite label is exact
    start = (0, 0, (head.render(),))
    best: dict[Identifier, tuple] = {head: start}
    heap = [(start, head, [])]
    while heap:
        label, node, path = heapq.heappop(heap)
        if best.get(node) != label:
            continue
        if node == tail:
            return [link.id for link in path]
        for link in sorted(adjacency.get(node, ()), key=lambda l: l.id):
            peer = link.other_node(node)
            cand = (label[0] + metric(link), label[1] + 1,
                    label[2] + (peer.render(),))
            if peer not in best or cand < best[peer]:
                best[peer] = cand
                heapq.heappush(heap, (cand, peer, path + [link]))

    # distinguish "constraints pruned everything" from "no topology at all"
    reachable = {head}
    frontier = [head]
    full_adj: dict[Identifier, set[Identifier]] = {}
    for link in links:
        a, z = link.nodes()
        full_adj.setdefault(a, set()).add(z)
        full_adj.setdefault(z, set()).add(a)
    while frontier:
        node = frontier.pop()
        for peer in full_adj.get(node, ()):
            if peer not in reachable:
                reachable.add(peer)
                frontier.append(peer)
    reason = "PRUNED_ALL" if tail in reachable else "DISCONNECTED"
    raise NoPath(f"no feasible path {head} -> {tail}", reason=reason)


def enumerate_simple_paths(links, head: Identifier, tail: Identifier,
                           usable=None) -> list[list[LinkRecord]]:
    """All simple paths head -> tail, ordered by (hops, node-id sequence)."""
    usable = usable or (lambda link: True)
    adjacency: dict[Identifier, list[LinkRecord]] = {}
    for link in links:
        if not usable(link):
            continue
        a, z = link.nodes()
        adjacency.setdefault(a, []).append(link)
        adjacency.setdefault(z, []).append(link)

    out: list[tuple[tuple, list[LinkRecord]]] = []

    def walk(node, seen, path):
        if node == tail:
            seq = tuple(n.render() for n in _nodes_of(head, path))
            out.append(((len(path), seq), list(path)))
            return
        for link in sorted(adjacency.get(node, ()), key=lambda l: l.id):
            peer = link.other_node(node)
            if peer in seen:
                continue
            seen.add(peer)
            path.append(link)
            walk(peer, seen, path)
            path.pop()
            seen.remove(peer)

    walk(head, {head}, [])
    out.sort(key=lambda item: item[0])
    return [path for _, path in out]


def _nodes_of(head: Identifier, path) -> list[Identifier]:
    nodes = [head]
    for link in path:
        nodes.append(link.other_node(nodes[-1]))
    return nodes


def path_nodes(head: Identifier, path) -> list[Identifier]:
    return _nodes_of(head, path)


@dataclass
class _TxnEntry:
    device: object
    session: object
    inverse: list
    committed: bool = False


class ConfigTransaction:
    """Candidate edits staged across several devices, committed in stage
    order. A failed commit triggers compensation: every device already
    committed is restored with inverse edits, newest first. Compensation
    that itself fails raises CompensationFailed (flagged, never silent).
    """

    def __init__(self):
        self._entries: list[_TxnEntry] = []
        self._finished = False

    def stage(self, device, edits) -> None:
        before: ConfigTree = device.get_config("RUNNING")
        session = device.open_session("txn")
        try:
            session.edit(edits)
        except Exception:
            session.close()
            raise
        inverse = session.candidate().diff(before)
        self._entries.append(_TxnEntry(device, session, inverse))

    def commit_all(self) -> None:
        """Commit every staged device; on failure compensate and re-raise."""
        try:
            for entry in self._entries:
                entry.session.commit()
                entry.committed = True
                entry.session.close()
        except Exception:
            self.abort()
            raise
        self._finished = True

    def abort(self) -> None:
        """Discard staged sessions and undo any committed device."""
        if self._finished:
            raise CompensationFailed("transaction already finished")
        for entry in self._entries:
            if not entry.session.closed:
                entry.session.close()
        failures = []
        for entry in reversed(self._entries):
            if not entry.committed:
                continue
            try:
                with entry.device.open_session("txn-undo") as session:
                    session.edit(entry.inverse)
                    session.commit()
                entry.committed = False
            except Exception as exc:
                failures.append(f"{entry.device.id}: {exc}")
        self._finished = True
        if failures:
            raise CompensationFailed("; ".join(failures))

    @property
    def devices(self) -> list:
        return [entry.device for entry in self._entries]
