"""Branching state shared by the column-generation relaxations.

A node of the search tree is described by per-commodity forbidden arcs and
acceptance fixings.  The helpers below derive the unsplittable pricing
restrictions: arcs too small for a commodity, and residual capacity left by
commodities that every remaining path forces through an arc.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Restrictions:
    forbidden: dict = field(default_factory=dict)   # commodity id -> frozenset of arc ids
    y_fixed: dict = field(default_factory=dict)     # commodity id -> 0 or 1

    def banned(self, k):
        return self.forbidden.get(k, frozenset())

    def y_fix(self, k):
        return self.y_fixed.get(k)

    def child(self, k, extra_forbidden=(), y_value=None):
        forbidden = dict(self.forbidden)
        if extra_forbidden:
            forbidden[k] = self.banned(k) | frozenset(extra_forbidden)
        y_fixed = dict(self.y_fixed)
        if y_value is not None:
            y_fixed[k] = y_value
        return Restrictions(forbidden, y_fixed)


EMPTY = Restrictions()


def forced_prefix(instance, commodity, restrictions):
    """Arcs every remaining path of the commodity must cross.

    Walks from the source while exactly one admissible outgoing arc exists.
    Only commodities fixed to full acceptance can force load onto an arc.
    """
    if restrictions.y_fix(commodity.id) != 0:
        return ()
    net = instance.network
    banned = restrictions.banned(commodity.id)
    arcs = ()
    node = commodity.source
    visited = {node}
    while node != commodity.target:
        outs = [
            a for a in net.out_arcs(node)
            if a not in banned and net.arcs[a].capacity >= commodity.bandwidth - 1e-12
        ]
        if len(outs) != 1:
            break
        a = outs[0]
        head = net.arcs[a].head
        if head in visited:
            break
        arcs += (a,)
        node = head
        visited.add(head)
    return arcs


class UnsplittableFilter:
    """Arc admissibility for pricing under unsplittable semantics."""

    def __init__(self, instance, restrictions):
        self.instance = instance
        self.restrictions = restrictions
        self.forced = {}
        self.forced_load = [0.0] * len(instance.network.arcs)
        for k in instance.commodities:
            prefix = forced_prefix(instance, k, restrictions)
            self.forced[k.id] = frozenset(prefix)
            for a in prefix:
                self.forced_load[a] += k.bandwidth

    def admissible(self, k):
        """Predicate over arc ids for commodity ``k``."""
        banned = self.restrictions.banned(k.id)
        arcs = self.instance.network.arcs
        forced_load = self.forced_load
        own = self.forced[k.id]
        bw = k.bandwidth

        def ok(a):
            if a in banned:
                return False
            cap = arcs[a].capacity
            if cap < bw - 1e-12:
                return False
            other = forced_load[a] - (bw if a in own else 0.0)
            return cap - other >= bw - 1e-12

        return ok


class SplittableFilter:
    """Arc admissibility when fractional routing is allowed."""

    def __init__(self, instance, restrictions):
        self.restrictions = restrictions

    def admissible(self, k):
        banned = self.restrictions.banned(k.id)
        if not banned:
            return None
        return lambda a: a not in banned
