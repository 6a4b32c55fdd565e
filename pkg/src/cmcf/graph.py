"""Shortest paths over arc subsets, shared by pricing and the heuristics."""

from __future__ import annotations

import heapq
import math


def shortest_path(network, source, target, weights, admissible=None):
    """Dijkstra over nonnegative arc weights.

    ``admissible`` optionally restricts the arc set.  Returns ``(cost,
    arc_ids)`` or ``None`` when the target is unreachable.  Ties between
    equal-cost paths break toward fewer hops, then toward the
    lexicographically smaller arc id sequence, which keeps every caller
    deterministic.
    """
    if source == target:
        return 0.0, ()
    heap = [(0.0, 0, (), source)]
    done = set()
    while heap:
        dist, hops, arcs, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == target:
            return dist, arcs
        for a in network.out_arcs(node):
            if admissible is not None and not admissible(a):
                continue
            arc = network.arcs[a]
            if arc.head in done:
                continue
            w = weights[a]
            if w == math.inf:
                continue
            if w < 0:
                raise ValueError("negative arc weight %r on arc %d" % (w, a))
            heapq.heappush(heap, (dist + w, hops + 1, arcs + (a,), arc.head))
    return None


def simple_paths(network, source, target, max_paths=None, admissible=None):
    """All simple paths as arc id tuples, in depth-first lexicographic order."""
    out = []
    stack = [(source, (), frozenset([source]))]
    while stack:
        node, arcs, seen = stack.pop()
        if node == target:
            out.append(arcs)
            if max_paths is not None and len(out) >= max_paths:
                return out
            continue
        for a in reversed(network.out_arcs(node)):
            if admissible is not None and not admissible(a):
                continue
            head = network.arcs[a].head
            if head in seen:
                continue
            stack.append((head, arcs + (a,), seen | {head}))
    return out
