"""Column generation for the commodity-pattern relaxation.

Each arc is covered by convex weights over *patterns*, subsets of commodities
costed at the arc cost of their total bandwidth.  Linking rows tie each
commodity's path usage on an arc to the pattern weight containing it, which
prices congestion at the joint load instead of the fractional one and gives a
much tighter bound for the unsplittable problem.

Pattern pricing is a 0/1 knapsack over integer-scaled bandwidths, solved by
dynamic programming on the exact total load so the (nonlinear) arc cost can
be charged at the true total.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import lp as lpmod
from . import model
from .graph import shortest_path
from .inner import ColgenError, ColgenResult
from .restrictions import EMPTY, UnsplittableFilter

_DP_CAPACITY_LIMIT = 2_000_000


class PatternConfigError(RuntimeError):
    """Bandwidths cannot be scaled to tractable integers."""


def bandwidth_scale(bandwidths, max_power=6):
    """Smallest power of ten making every bandwidth integral; flags rounding."""
    for p in range(max_power + 1):
        s = 10 ** p
        if all(abs(b * s - round(b * s)) <= 1e-9 * max(1.0, abs(b * s))
               for b in bandwidths):
            return s, False
    return 10 ** max_power, True


def knapsack_best_subset(weights, profits, cost_grid):
    """Maximize sum(profits) - cost(total weight) over subsets.

    ``weights`` are positive ints; ``cost_grid[w]`` is the cost charged at
    total weight ``w`` (its length fixes the capacity).  The dynamic program
    tracks the best profit at each *exact* total, then scans all totals, so
    the nonlinear cost is always evaluated at the true total load.  Ties
    break toward the smaller total.  Returns (value, subset tuple, total).
    """
    W = len(cost_grid) - 1
    n = len(weights)
    best = np.full(W + 1, -math.inf)
    best[0] = 0.0
    layers = [best]
    for w_k, p_k in zip(weights, profits):
        new = best.copy()
        if w_k <= W:
            cand = best[: W + 1 - w_k] + p_k
            new[w_k:] = np.maximum(new[w_k:], cand)
        best = new
        layers.append(best)
    values = best - cost_grid
    best_total = int(np.argmax(values))
    best_value = float(values[best_total])
    # walk the layers back; on ties the item stays out
    subset = []
    w = best_total
    for idx in range(n - 1, -1, -1):
        if layers[idx + 1][w] <= layers[idx][w] + 1e-15:
            continue
        subset.append(idx)
        w -= weights[idx]
    subset.reverse()
    return best_value, tuple(subset), best_total


class PatternColumnGeneration:
    """Restricted master plus path/pattern pricers."""

    def __init__(self, instance, backend=None, restrictions=EMPTY,
                 price_tol=1e-9):
        self.instance = instance
        self.backend = backend
        self.price_tol = price_tol
        net = instance.network
        bandwidths = [k.bandwidth for k in instance.commodities]
        self.scale, rounded = bandwidth_scale(bandwidths)
        self.stats = {
            "iterations": 0,
            "path_columns": 0,
            "pattern_columns": 0,
            "bound_trajectory": [],
            "bandwidths_rounded": rounded,
            "dp_table_sizes": {},
        }
        self.int_bw = {
            k.id: int(round(k.bandwidth * self.scale)) for k in instance.commodities
        }
        self._cost_grid = {}
        for arc in net.arcs:
            width = int(math.floor(arc.capacity * self.scale + 1e-9))
            if width > _DP_CAPACITY_LIMIT:
                raise PatternConfigError(
                    "scaled capacity %d on arc %d exceeds the pricing budget"
                    % (width, arc.id)
                )
            self.stats["dp_table_sizes"][arc.id] = width + 1
            self._cost_grid[arc.id] = np.array(
                [model.evaluate(arc.cost, w / self.scale) for w in range(width + 1)]
            )
        self.prog = lpmod.LinearProgram()
        self.coverage_row = {}
        self.link_row = {}
        self.convexity_row = {}
        for k in instance.commodities:
            self.coverage_row[k.id] = self.prog.add_row(lpmod.LESS_EQUAL, -1.0)
        for arc in net.arcs:
            for k in instance.commodities:
                self.link_row[(arc.id, k.id)] = self.prog.add_row(lpmod.LESS_EQUAL, 0.0)
            self.convexity_row[arc.id] = self.prog.add_row(lpmod.EQUAL, 1.0)
        self.y_col = {}
        for k in instance.commodities:
            self.y_col[k.id] = self.prog.add_column(
                instance.penalty * k.bandwidth, 0.0, 1.0,
                [(self.coverage_row[k.id], -1.0)],
            )
        self.pattern_col = {}
        self.patterns_of = {arc.id: [] for arc in net.arcs}
        for arc in net.arcs:
            self.add_pattern(arc.id, frozenset())
        self.path_col = {}
        self.paths_of = {k.id: [] for k in instance.commodities}
        self.set_restrictions(restrictions)

    # -- columns -----------------------------------------------------------

    def add_pattern(self, arc_id, members):
        members = frozenset(members)
        if (arc_id, members) in self.pattern_col:
            return False
        arc = self.instance.network.arcs[arc_id]
        total = sum(self.instance.commodities[k].bandwidth for k in members)
        if total > arc.capacity + 1e-9:
            raise ValueError("pattern exceeds capacity of arc %d" % arc_id)
        entries = [(self.convexity_row[arc_id], 1.0)]
        for k in members:
            entries.append((self.link_row[(arc_id, k)], -1.0))
        col = self.prog.add_column(
            model.evaluate(arc.cost, total), 0.0, math.inf, entries
        )
        self.pattern_col[(arc_id, members)] = col
        self.patterns_of[arc_id].append(members)
        self.stats["pattern_columns"] += 1
        return True

    def add_path(self, k_id, arcs, fixed_ratio=None):
        arcs = tuple(arcs)
        if (k_id, arcs) in self.path_col:
            return False
        k = self.instance.commodities[k_id]
        err = model.validate_path(self.instance.network, k, arcs)
        if err:
            raise ValueError("invalid path for commodity %d: %s" % (k_id, err))
        entries = [(self.coverage_row[k_id], -1.0)]
        for a in arcs:
            entries.append((self.link_row[(a, k_id)], 1.0))
        lb, ub = (0.0, 1.0) if fixed_ratio is None else (fixed_ratio, fixed_ratio)
        col = self.prog.add_column(0.0, lb, ub, entries)
        self.path_col[(k_id, arcs)] = col
        self.paths_of[k_id].append(arcs)
        self.stats["path_columns"] += 1
        return True

    def set_restrictions(self, restrictions):
        self.restrictions = restrictions
        self.filter = UnsplittableFilter(self.instance, restrictions)
        for k in self.instance.commodities:
            y_fix = restrictions.y_fix(k.id)
            self.prog.set_bounds(
                self.y_col[k.id], 1.0 if y_fix == 1 else 0.0, 1.0
            )
            banned = restrictions.banned(k.id)
            for arcs in self.paths_of[k.id]:
                col = self.path_col[(k.id, arcs)]
                active = y_fix != 1 and not any(a in banned for a in arcs)
                self.prog.set_bounds(col, 0.0, 1.0 if active else 0.0)

    # -- pricing -------------------------------------------------------------

    def price_paths(self, solution):
        mult = solution.multipliers
        added = 0
        net = self.instance.network
        for k in self.instance.commodities:
            if self.restrictions.y_fix(k.id) == 1:
                continue
            alpha = mult[self.coverage_row[k.id]]
            weights = [
                max(mult[self.link_row[(a.id, k.id)]], 0.0) for a in net.arcs
            ]
            found = shortest_path(
                net, k.source, k.target, weights, self.filter.admissible(k)
            )
            if found is None:
                continue
            cost, arcs = found
            eps = self.price_tol * (1.0 + abs(alpha))
            if arcs and cost < alpha - eps:
                if self.add_path(k.id, arcs):
                    added += 1
        return added

    def price_patterns(self, solution):
        """At most one new pattern per arc, from the knapsack argmax."""
        mult = solution.multipliers
        added = 0
        for arc in self.instance.network.arcs:
            gamma = mult[self.convexity_row[arc.id]]
            items = []
            for k in self.instance.commodities:
                if arc.id in self.restrictions.banned(k.id):
                    continue
                if self.restrictions.y_fix(k.id) == 1:
                    continue
                if k.bandwidth > arc.capacity + 1e-9:
                    continue
                beta = mult[self.link_row[(arc.id, k.id)]]
                if beta > 1e-12:
                    items.append((k.id, self.int_bw[k.id], beta))
            value, subset, _ = knapsack_best_subset(
                [w for _, w, _ in items],
                [p for _, _, p in items],
                self._cost_grid[arc.id],
            )
            eps = self.price_tol * (1.0 + abs(gamma))
            if value > gamma + eps:
                members = frozenset(items[i][0] for i in subset)
                if self.add_pattern(arc.id, members):
                    added += 1
        return added

    # -- driver -----------------------------------------------------------------

    def solve_rmp(self):
        sol = self.prog.solve(backend=self.backend)
        if sol.status != lpmod.OPTIMAL:
            raise ColgenError("restricted master ended %s" % sol.status)
        return sol

    def run(self, max_rounds=10000, path_pricing=True, pattern_pricing=True,
            deadline=None):
        solution = None
        for _ in range(max_rounds):
            solution = self.solve_rmp()
            self.stats["iterations"] += 1
            self.stats["bound_trajectory"].append(solution.objective)
            added = 0
            if path_pricing:
                added += self.price_paths(solution)
            if pattern_pricing:
                added += self.price_patterns(solution)
            if added == 0:
                flow = self.extract_flow(solution)
                return ColgenResult(flow, solution.objective, dict(self.stats))
            if deadline is not None and time.monotonic() > deadline:
                raise ColgenError("deadline hit after %d rounds" % self.stats["iterations"])
        raise ColgenError(
            "no convergence after %d rounds (last bound %r)"
            % (max_rounds, self.stats["bound_trajectory"][-1:])
        )

    def extract_flow(self, solution):
        flow = model.FlowSolution()
        for k in self.instance.commodities:
            per_k = {}
            for arcs in self.paths_of[k.id]:
                value = float(solution.x[self.path_col[(k.id, arcs)]])
                if value > 1e-12:
                    per_k[arcs] = min(value, 1.0)
            flow.paths[k.id] = per_k
            y = float(solution.x[self.y_col[k.id]])
            flow.rejected[k.id] = min(max(y, 0.0), 1.0)
        return flow

    def pattern_values(self, solution, tol=1e-9):
        """Active (arc, members, weight) triples in the master solution."""
        out = []
        for (arc_id, members), col in self.pattern_col.items():
            value = float(solution.x[col])
            if value > tol:
                out.append((arc_id, members, value))
        return out

    def arc_pattern_costs(self, solution):
        """Per-arc cost of the pattern combination in the master solution."""
        out = [0.0] * len(self.instance.network.arcs)
        for (arc_id, members), col in self.pattern_col.items():
            value = float(solution.x[col])
            if value > 1e-12:
                total = sum(
                    self.instance.commodities[k].bandwidth for k in members
                )
                arc = self.instance.network.arcs[arc_id]
                out[arc_id] += value * model.evaluate(arc.cost, total)
        return out
