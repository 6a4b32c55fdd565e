"""Best-bound branch-and-price for the unsplittable problem.

Nodes carry per-commodity forbidden arcs and acceptance fixings; the node
relaxation is either the tightened inner approximation or the pattern
relaxation, re-solved over one shared column pool by deactivating columns
that violate the node's fixings.  Branching follows a divergence-node scheme
that partitions the unsplittable assignments: when a single route variable
is fractional the commodity's acceptance is branched, otherwise children
force or cut the common path and its busiest continuation.

Full-acceptance fixings are enforced through the rejection penalty instead
of hard variable bounds, which keeps every node's master feasible while the
pricer discovers replacement routes; the node bound stays a valid lower
bound for the node's subtree.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

from . import model
from .greedy import multi_start
from .inner import TIGHT, ColgenError, InnerColumnGeneration
from .pattern import PatternColumnGeneration
from .restrictions import EMPTY, Restrictions

INTEGRALITY_TOL = 1e-6

RELAXATIONS = ("tight", "pattern")


class GapUndefinedError(ValueError):
    """Relative gap needs a strictly positive unsplittable-splittable spread."""


def relative_gap(splittable, unsplittable, relaxed, tol=1e-12):
    """Position of a relaxation value between the two reference optima, in %."""
    spread = unsplittable - splittable
    if spread <= tol:
        raise GapUndefinedError(
            "unsplittable optimum %r does not exceed splittable optimum %r"
            % (unsplittable, splittable)
        )
    return 100.0 * (relaxed - splittable) / spread


def divergence(network, commodity, paths):
    """Last node shared by all paths, with the common arc prefix."""
    if len(paths) < 2:
        raise ValueError("divergence needs at least two distinct paths")
    prefix = []
    for arcs in zip(*paths):
        if all(a == arcs[0] for a in arcs[1:]):
            prefix.append(arcs[0])
        else:
            break
    if prefix:
        node = network.arcs[prefix[-1]].head
    else:
        node = commodity.source
    return node, tuple(prefix)


def branch(instance, restrictions, flow, k_id):
    """Children of a node as (rule label, restrictions) pairs.

    The caller guarantees commodity ``k_id`` has a variable strictly inside
    (0, 1).  All fixings are expressed as arc forbiddances plus acceptance
    fixings, so they survive column regeneration.
    """
    net = instance.network
    k = instance.commodities[k_id]
    ratios = flow.paths.get(k_id, {})
    fractional = [
        arcs for arcs, v in ratios.items()
        if INTEGRALITY_TOL < v < 1.0 - INTEGRALITY_TOL
    ]
    y_value = flow.rejection(k_id)
    y_free = restrictions.y_fix(k_id) is None
    if not fractional and not (
        INTEGRALITY_TOL < y_value < 1.0 - INTEGRALITY_TOL
    ):
        raise ValueError("commodity %d is integral; nothing to branch on" % k_id)
    if len(fractional) < 2:
        return [
            ("y=0", restrictions.child(k_id, (), 0)),
            ("y=1", restrictions.child(k_id, (), 1)),
        ]
    node, common = divergence(net, k, fractional)
    usage = {}
    for a in net.out_arcs(node):
        usage[a] = sum(v for arcs, v in ratios.items() if a in arcs)
    busiest = min(
        (a for a in net.out_arcs(node)),
        key=lambda a: (-usage[a], a),
    )
    gate = []
    for g in common:
        tail = net.arcs[g].tail
        gate.extend(a for a in net.out_arcs(tail) if a != g)
    children = []
    force_busiest = gate + [a for a in net.out_arcs(node) if a != busiest]
    children.append(("force-arc", restrictions.child(k_id, force_busiest, 0)))
    children.append(("cut-arc", restrictions.child(k_id, gate + [busiest], 0)))
    for g in common:
        children.append(
            ("cut-common@%s" % net.arcs[g].tail,
             restrictions.child(k_id, [g], 0))
        )
    if y_free:
        children.append(("y=1", restrictions.child(k_id, (), 1)))
    return children


def pick_branching_commodity(instance, flow):
    """Fractional commodity with the largest bandwidth; ties to smallest id."""
    best = None
    for k in instance.commodities:
        vals = [flow.rejection(k.id)]
        vals.extend(flow.paths.get(k.id, {}).values())
        if any(INTEGRALITY_TOL < v < 1.0 - INTEGRALITY_TOL for v in vals):
            if best is None or k.bandwidth > best.bandwidth + 1e-12:
                best = k
    return None if best is None else best.id


def snap_integral(flow):
    snapped = model.FlowSolution()
    for k_id, per_k in flow.paths.items():
        snapped.paths[k_id] = {
            arcs: 1.0 for arcs, v in per_k.items() if v > 0.5
        }
        snapped.rejected[k_id] = 1.0 if flow.rejection(k_id) > 0.5 else 0.0
    return snapped


@dataclass
class BnpResult:
    incumbent: model.FlowSolution
    incumbent_value: float
    lower_bound: float
    gap: float
    reached_target: bool
    nodes: int
    trace: list
    greedy_value: float
    stats: dict = field(default_factory=dict)


class BranchAndPrice:
    def __init__(self, instance, relaxation="pattern", backend=None,
                 greedy_starts=None, seed=0):
        if relaxation not in RELAXATIONS:
            raise ValueError("unknown relaxation %r" % (relaxation,))
        self.instance = instance
        self.relaxation = relaxation
        self.seed = seed
        self.greedy_starts = greedy_starts or max(10, 2 * len(instance.commodities))
        if relaxation == "tight":
            self.cg = InnerColumnGeneration(instance, TIGHT, backend=backend)
        else:
            self.cg = PatternColumnGeneration(instance, backend=backend)

    def _solve_node(self, restrictions, deadline):
        self.cg.set_restrictions(restrictions)
        return self.cg.run(deadline=deadline)

    def run(self, gap_target=0.001, time_limit=None, node_limit=None):
        start = time.monotonic()
        deadline = start + time_limit if time_limit else None
        inst = self.instance
        seed_run = multi_start(inst, self.greedy_starts, self.seed)
        incumbent = seed_run.to_flow()
        incumbent_value = seed_run.objective
        trace = []
        counter = 0
        heap = [(-math.inf, 0, EMPTY)]
        lower = -math.inf
        reached = False
        processed = 0
        while heap:
            key = heap[0][0]
            lower = key
            gap = self._gap(incumbent_value, lower)
            if gap <= gap_target:
                reached = True
                break
            if deadline is not None and time.monotonic() > deadline:
                break
            if node_limit is not None and processed >= node_limit:
                break
            key, node_id, restrictions = heapq.heappop(heap)
            try:
                result = self._solve_node(restrictions, deadline)
            except ColgenError:
                if deadline is not None and time.monotonic() > deadline:
                    break
                raise
            processed += 1
            bound = result.bound
            record = {
                "id": node_id,
                "key": key,
                "bound": bound,
                "restrictions": restrictions,
                "rule": None,
                "children": [],
                "integral": False,
            }
            trace.append(record)
            if bound >= incumbent_value - 1e-9 * (1.0 + abs(incumbent_value)):
                continue
            if result.flow.is_integral(INTEGRALITY_TOL):
                record["integral"] = True
                record["pattern_unit_error"] = self._pattern_unit_error()
                snapped = snap_integral(result.flow)
                value = model.objective(inst, snapped)
                if value < incumbent_value - 1e-12:
                    incumbent = snapped
                    incumbent_value = value
                continue
            k_id = pick_branching_commodity(inst, result.flow)
            if k_id is None:
                raise RuntimeError("non-integral node without a fractional commodity")
            children = branch(inst, restrictions, result.flow, k_id)
            record["rule"] = "commodity %d" % k_id
            for rule, child in children:
                counter += 1
                record["children"].append((rule, child))
                child_key = max(bound, key)
                if child_key < incumbent_value - 1e-12:
                    heapq.heappush(heap, (child_key, counter, child))
        if not heap and not reached:
            lower = incumbent_value
            reached = True
        gap = self._gap(incumbent_value, lower)
        stats = dict(self.cg.stats)
        return BnpResult(
            incumbent, incumbent_value, lower, gap, reached,
            processed, trace, seed_run.objective, stats,
        )

    def _pattern_unit_error(self):
        if not isinstance(self.cg, PatternColumnGeneration):
            return None
        sol = self.cg.solve_rmp()
        worst = 0.0
        for _, _, value in self.cg.pattern_values(sol, tol=1e-9):
            worst = max(worst, min(abs(value), abs(1.0 - value)))
        return worst

    @staticmethod
    def _gap(upper, lower):
        if lower == -math.inf:
            return math.inf
        if upper <= 0:
            return 0.0 if lower >= upper else math.inf
        return max(0.0, (upper - lower) / upper)


def solve_unsplittable(instance, relaxation="pattern", gap_target=0.001,
                       time_limit=None, seed=0, backend=None, node_limit=None):
    driver = BranchAndPrice(instance, relaxation, backend=backend, seed=seed)
    return driver.run(gap_target=gap_target, time_limit=time_limit,
                      node_limit=node_limit)
