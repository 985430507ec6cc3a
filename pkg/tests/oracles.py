"""Brute-force reference implementations used to check the controllers.

Deliberately independent of the package internals: everything operates on
plain tuples and dicts, paths are enumerated exhaustively, and selection
rules are applied by sorting complete candidate lists.
"""


def simple_paths(links, head, tail):
    """All simple paths in a bidirectional graph.

    ``links``: iterable of (link_id, node_a, node_z). Yields (node_seq,
    link_id_seq) pairs, in no particular order.
    """
    adjacency = {}
    for link_id, a, z in links:
        adjacency.setdefault(a, []).append((link_id, z))
        adjacency.setdefault(z, []).append((link_id, a))

    results = []

    def walk(node, nodes, used):
        if node == tail:
            results.append((tuple(nodes), tuple(used)))
            return
        for link_id, peer in adjacency.get(node, ()):
            if peer in nodes:
                continue
            nodes.append(peer)
            used.append(link_id)
            walk(peer, nodes, used)
            nodes.pop()
            used.pop()

    if head == tail:
        return [((head,), ())]
    walk(head, [head], [])
    return results


def cspf_oracle(links, head, tail, mbps, excludes=frozenset()):
    """Exhaustive CSPF.

    ``links``: iterable of (link_id, node_a, node_z, metric, unreserved,
    oper_up). Returns (cost, link_id_seq) of the minimum under
    (cost, hops, node sequence), or None when no feasible path exists.
    """
    feasible = []
    metric = {}
    for link_id, a, z, m, unreserved, oper_up in links:
        metric[link_id] = m
        if link_id in excludes or a in excludes or z in excludes:
            continue
        if oper_up and unreserved >= mbps:
            feasible.append((link_id, a, z))
    if head == tail:
        return (0, ())
    ranked = []
    for nodes, used in simple_paths(feasible, head, tail):
        cost = sum(metric[l] for l in used)
        ranked.append(((cost, len(used), nodes), used))
    if not ranked:
        return None
    ranked.sort(key=lambda item: item[0])
    best_key, best_path = ranked[0]
    return (best_key[0], best_path)


def rwa_oracle(fibers, occupancy, a_node, z_node, wavelengths):
    """Exhaustive routing and wavelength assignment.

    ``fibers``: iterable of (fiber_id, node_a, node_z); ``occupancy``:
    fiber_id -> set of busy slot indexes; ``wavelengths``: fiber_id -> W.
    Returns (fiber_id_seq, lambda) minimizing (hops, node sequence, lambda),
    or None when blocked.
    """
    candidates = []
    for nodes, used in simple_paths(list(fibers), a_node, z_node):
        w = min(wavelengths[f] for f in used)
        for lam in range(w):
            if all(lam not in occupancy.get(f, set()) for f in used):
                candidates.append(((len(used), nodes, lam), used, lam))
    if not candidates:
        return None
    candidates.sort(key=lambda item: item[0])
    _, path, lam = candidates[0]
    return (tuple(path), lam)
