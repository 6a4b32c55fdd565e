"""Sequential marginal-cost routing heuristic with random multi-start.

Commodities are routed one at a time on the cheapest path under marginal
costs at the current loads; arcs without enough residual capacity are
excluded.  A commodity with no finite-cost path is rejected.  Multi-start
shuffles the order with the pinned generator and keeps the best run.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import model
from .graph import shortest_path
from .rng import Xoshiro256


@dataclass
class GreedyResult:
    assignment: dict          # commodity id -> arc tuple or None
    objective: float
    order: tuple
    seed: object = None

    def to_flow(self):
        flow = model.FlowSolution()
        for k_id, path in self.assignment.items():
            if path is None:
                flow.paths[k_id] = {}
                flow.rejected[k_id] = 1.0
            else:
                flow.paths[k_id] = {tuple(path): 1.0}
                flow.rejected[k_id] = 0.0
        return flow


def greedy_once(instance, order):
    """One pass over the commodities in the given order."""
    net = instance.network
    if sorted(order) != list(range(len(instance.commodities))):
        raise ValueError("order must be a permutation of the commodity ids")
    loads = [0.0] * len(net.arcs)
    assignment = {}
    for k_id in order:
        k = instance.commodities[k_id]
        weights = []
        for arc in net.arcs:
            if loads[arc.id] + k.bandwidth <= arc.capacity + 1e-12:
                weights.append(
                    model.evaluate(arc.cost, loads[arc.id] + k.bandwidth)
                    - model.evaluate(arc.cost, loads[arc.id])
                )
            else:
                weights.append(None)
        admissible = lambda a: weights[a] is not None
        found = shortest_path(
            net, k.source, k.target,
            [w if w is not None else 0.0 for w in weights],
            admissible,
        )
        if found is None:
            assignment[k_id] = None
            continue
        _, arcs = found
        assignment[k_id] = arcs
        for a in arcs:
            loads[a] += k.bandwidth
    total = 0.0
    for arc in net.arcs:
        total += model.evaluate(arc.cost, loads[arc.id])
    for k in instance.commodities:
        if assignment[k.id] is None:
            total += instance.penalty * k.bandwidth
    return GreedyResult(assignment, total, tuple(order))


def multi_start(instance, n_starts, seed):
    """Best of ``n_starts`` greedy passes over seeded shuffled orders."""
    if n_starts < 1:
        raise ValueError("n_starts must be at least one")
    gen = Xoshiro256(seed)
    best = None
    for _ in range(n_starts):
        order = gen.shuffle(list(range(len(instance.commodities))))
        result = greedy_once(instance, order)
        if best is None or result.objective < best.objective - 1e-12:
            best = result
    return GreedyResult(best.assignment, best.objective, best.order, seed)
