"""Column generation over an inner approximation of the arc cost epigraphs.

The restricted master problem carries three row families per the splittable
relaxation: a coverage row per commodity (route or reject), a load row per
arc linking path flow to the sampled cost breakpoints, and a convexity row
per arc tying the breakpoint weights together.  ``mode="tight"`` splits each
load row by bandwidth thresholds, which strengthens the relaxation for the
unsplittable problem while keeping the same pricing structure.

Two pricers alternate: a shortest-path generator for new route columns and a
one-dimensional profit maximizer for new cost breakpoints (closed forms for
the analytic cost kinds, golden-section search otherwise).
"""

from __future__ import annotations

import bisect
import math
import time

from . import lp as lpmod
from . import model
from .graph import shortest_path
from .restrictions import EMPTY, SplittableFilter, UnsplittableFilter

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

INNER = "inner"
TIGHT = "tight"


class ColgenError(RuntimeError):
    """Column generation failed to converge within its round budget."""


class ColgenResult:
    def __init__(self, flow, bound, stats):
        self.flow = flow
        self.bound = bound
        self.stats = stats


def golden_section_max(fn, lo, hi, tol, max_iter=200):
    """Maximize a unimodal function on [lo, hi]; returns (argmax, value)."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    best_x = 0.5 * (a + b)
    best_v = fn(best_x)
    for x in (lo, hi):
        v = fn(x)
        if v > best_v:
            best_x, best_v = x, v
    return best_x, best_v


def best_breakpoint(cost, slope, lo, hi, cap, grid_stats=None):
    """Maximize ``slope * c - cost(c)`` over [lo, hi].

    Uses the closed-form maximizer for analytic kinds; a golden-section
    search for convex black boxes (the profile is concave); and a dense grid
    pass followed by local refinement for declared non-convex black boxes,
    which need the global maximizer.
    """

    def profit(c):
        return slope * c - model.evaluate(cost, c)

    if hi <= lo:
        return lo, profit(lo)
    candidates = [lo, hi]
    if cost.kind == model.QUADRATIC:
        candidates.append(min(max(slope / (2.0 * cost.f), lo), hi))
    elif cost.kind == model.KLEINROCK:
        if slope > 0:
            candidates.append(min(max(cost.d - math.sqrt(cost.f / slope), lo), hi))
    elif cost.kind == model.BLACKBOX:
        tol = 1e-9 * max(cap, 1.0)
        if cost.convex:
            candidates.append(golden_section_max(profit, lo, hi, tol)[0])
        else:
            if grid_stats is not None:
                grid_stats["grid_priced_arcs"] = grid_stats.get("grid_priced_arcs", 0) + 1
            n = 256
            step = (hi - lo) / n
            xs = [lo + i * step for i in range(n + 1)]
            vals = [profit(x) for x in xs]
            i = max(range(n + 1), key=lambda i: vals[i])
            a = xs[max(i - 1, 0)]
            b = xs[min(i + 1, n)]
            candidates.append(xs[i])
            candidates.append(golden_section_max(profit, a, b, tol)[0])
    best = max(candidates, key=profit)
    return best, profit(best)


class InnerColumnGeneration:
    """Restricted master plus pricers for the inner-approximation relaxation."""

    def __init__(self, instance, mode=INNER, thresholds=None, backend=None,
                 restrictions=EMPTY, price_tol=1e-9):
        if mode not in (INNER, TIGHT):
            raise ValueError("unknown mode %r" % (mode,))
        self.instance = instance
        self.mode = mode
        self.backend = backend
        # run-time emission threshold; kept an order of magnitude below the
        # 1e-8 certificate threshold so convergence is never tolerance-bound
        self.price_tol = price_tol
        net = instance.network
        if mode == TIGHT:
            if thresholds is None:
                thresholds = sorted({0.0} | {k.bandwidth for k in instance.commodities})
            else:
                thresholds = sorted(set(float(t) for t in thresholds) | {0.0})
        else:
            thresholds = [0.0]
        self.thresholds = thresholds
        self.prog = lpmod.LinearProgram()
        self.coverage_row = {}
        self.load_row = {}
        self.convexity_row = {}
        for k in instance.commodities:
            self.coverage_row[k.id] = self.prog.add_row(lpmod.LESS_EQUAL, -1.0)
        for arc in net.arcs:
            for j in range(len(thresholds)):
                self.load_row[(arc.id, j)] = self.prog.add_row(lpmod.LESS_EQUAL, 0.0)
            self.convexity_row[arc.id] = self.prog.add_row(lpmod.EQUAL, 1.0)
        self.stats = {
            "iterations": 0,
            "path_columns": 0,
            "vertex_columns": 0,
            "bound_trajectory": [],
        }
        self.y_col = {}
        for k in instance.commodities:
            self.y_col[k.id] = self.prog.add_column(
                instance.penalty * k.bandwidth, 0.0, 1.0,
                [(self.coverage_row[k.id], -1.0)],
            )
        self.vertices = {arc.id: [] for arc in net.arcs}
        self.vertex_col = {}
        for arc in net.arcs:
            self.add_vertex(arc.id, 0.0)
            if arc.capacity > 0:
                self.add_vertex(arc.id, arc.capacity)
        self.path_col = {}
        self.paths_of = {k.id: [] for k in instance.commodities}
        self.set_restrictions(restrictions)

    # -- column management ---------------------------------------------------

    def add_vertex(self, arc_id, value):
        """Register breakpoint ``value`` on an arc; returns False on duplicate."""
        arc = self.instance.network.arcs[arc_id]
        tol = 1e-9 * max(arc.capacity, 1.0)
        if any(abs(value - v) <= tol for v in self.vertices[arc_id]):
            return False
        entries = [(self.convexity_row[arc_id], 1.0)]
        if value > 0:
            cutoff = bisect.bisect_right(self.thresholds, value)
            for j in range(cutoff):
                entries.append((self.load_row[(arc_id, j)], -value))
        col = self.prog.add_column(
            model.evaluate(arc.cost, value), 0.0, math.inf, entries
        )
        self.vertices[arc_id].append(value)
        self.vertex_col[(arc_id, value)] = col
        self.stats["vertex_columns"] += 1
        return True

    def add_path(self, k_id, arcs, fixed_ratio=None):
        """Register a route column; returns False on duplicate."""
        arcs = tuple(arcs)
        if (k_id, arcs) in self.path_col:
            return False
        k = self.instance.commodities[k_id]
        err = model.validate_path(self.instance.network, k, arcs)
        if err:
            raise ValueError("invalid path for commodity %d: %s" % (k_id, err))
        entries = [(self.coverage_row[k_id], -1.0)]
        cutoff = bisect.bisect_right(self.thresholds, k.bandwidth)
        for a in arcs:
            for j in range(cutoff):
                entries.append((self.load_row[(a, j)], k.bandwidth))
        lb, ub = (0.0, 1.0) if fixed_ratio is None else (fixed_ratio, fixed_ratio)
        col = self.prog.add_column(0.0, lb, ub, entries)
        self.path_col[(k_id, arcs)] = col
        self.paths_of[k_id].append(arcs)
        self.stats["path_columns"] += 1
        return True

    def set_restrictions(self, restrictions):
        """Activate a branching state: deactivates violating route columns.

        Full-acceptance fixings are enforced through the rejection penalty
        rather than hard bounds, so the master stays feasible while pricing
        discovers replacement routes.
        """
        self.restrictions = restrictions
        if self.mode == TIGHT:
            self.filter = UnsplittableFilter(self.instance, restrictions)
        else:
            self.filter = SplittableFilter(self.instance, restrictions)
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

    # -- pricing ---------------------------------------------------------------

    def _beta_prefix(self, multipliers):
        """Per-arc cumulative load duals along the threshold list."""
        prefix = {}
        for arc in self.instance.network.arcs:
            acc = 0.0
            row = []
            for j in range(len(self.thresholds)):
                acc += max(multipliers[self.load_row[(arc.id, j)]], 0.0)
                row.append(acc)
            prefix[arc.id] = row
        return prefix

    def price_paths(self, solution):
        """Add one improving route per commodity; returns how many."""
        mult = solution.multipliers
        prefix = self._beta_prefix(mult)
        added = 0
        for k in self.instance.commodities:
            if self.restrictions.y_fix(k.id) == 1:
                continue
            alpha = mult[self.coverage_row[k.id]]
            cutoff = bisect.bisect_right(self.thresholds, k.bandwidth)
            weights = [
                prefix[a.id][cutoff - 1] if cutoff else 0.0
                for a in self.instance.network.arcs
            ]
            admissible = self.filter.admissible(k)
            found = shortest_path(
                self.instance.network, k.source, k.target, weights, admissible
            )
            if found is None:
                continue
            cost, arcs = found
            eps = self.price_tol * (1.0 + abs(alpha))
            if cost < alpha / k.bandwidth - eps and arcs:
                if self.add_path(k.id, arcs):
                    added += 1
        return added

    def price_vertices(self, solution):
        """Add at most one improving breakpoint per arc; returns how many."""
        mult = solution.multipliers
        prefix = self._beta_prefix(mult)
        thresholds = self.thresholds
        added = 0
        for arc in self.instance.network.arcs:
            gamma = mult[self.convexity_row[arc.id]]
            cap = arc.capacity
            best_c, best_v = None, -math.inf
            for j, lo in enumerate(thresholds):
                if lo > cap:
                    break
                hi = min(thresholds[j + 1], cap) if j + 1 < len(thresholds) else cap
                if hi < lo:
                    continue
                slope = prefix[arc.id][j]
                c, v = best_breakpoint(arc.cost, slope, lo, hi, cap, self.stats)
                if v > best_v:
                    best_c, best_v = c, v
            eps = self.price_tol * (1.0 + abs(gamma))
            if best_c is not None and best_v > gamma + eps:
                if self.add_vertex(arc.id, best_c):
                    added += 1
        return added

    # -- driver ------------------------------------------------------------------

    def solve_rmp(self):
        sol = self.prog.solve(backend=self.backend)
        if sol.status != lpmod.OPTIMAL:
            raise ColgenError("restricted master ended %s" % sol.status)
        return sol

    def run(self, max_rounds=10000, path_pricing=True, vertex_pricing=True,
            deadline=None):
        """Alternate master solves and pricing until no column improves."""
        solution = None
        for _ in range(max_rounds):
            solution = self.solve_rmp()
            self.stats["iterations"] += 1
            self.stats["bound_trajectory"].append(solution.objective)
            added = 0
            if path_pricing:
                added += self.price_paths(solution)
            if vertex_pricing:
                added += self.price_vertices(solution)
            if added == 0:
                return self._finish(solution)
            if deadline is not None and time.monotonic() > deadline:
                raise ColgenError("deadline hit after %d rounds" % self.stats["iterations"])
        raise ColgenError(
            "no convergence after %d rounds (last bound %r)"
            % (max_rounds, self.stats["bound_trajectory"][-1:])
        )

    def _finish(self, solution):
        flow = self.extract_flow(solution)
        return ColgenResult(flow, solution.objective, dict(self.stats))

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

    def arc_linearized_costs(self, solution):
        """Per-arc cost of the breakpoint combination in the master solution."""
        out = []
        for arc in self.instance.network.arcs:
            total = 0.0
            for value in self.vertices[arc.id]:
                z = float(solution.x[self.vertex_col[(arc.id, value)]])
                if z > 1e-12:
                    total += z * model.evaluate(arc.cost, value)
            out.append(total)
        return out

    def pricing_is_quiet(self, solution, threshold=1e-8):
        """True when re-pricing at a tenth of the documented tolerance is silent."""
        mult = solution.multipliers
        prefix = self._beta_prefix(mult)
        for k in self.instance.commodities:
            if self.restrictions.y_fix(k.id) == 1:
                continue
            alpha = mult[self.coverage_row[k.id]]
            cutoff = bisect.bisect_right(self.thresholds, k.bandwidth)
            weights = [
                prefix[a.id][cutoff - 1] if cutoff else 0.0
                for a in self.instance.network.arcs
            ]
            found = shortest_path(
                self.instance.network, k.source, k.target, weights,
                self.filter.admissible(k),
            )
            if found is not None:
                cost, arcs = found
                eps = threshold * (1.0 + abs(alpha))
                if arcs and cost < alpha / k.bandwidth - eps \
                        and (k.id, arcs) not in self.path_col:
                    return False
        for arc in self.instance.network.arcs:
            gamma = mult[self.convexity_row[arc.id]]
            cap = arc.capacity
            for j, lo in enumerate(self.thresholds):
                if lo > cap:
                    break
                hi = min(self.thresholds[j + 1], cap) if j + 1 < len(self.thresholds) else cap
                slope = prefix[arc.id][j]
                c, v = best_breakpoint(arc.cost, slope, lo, hi, cap)
                eps = threshold * (1.0 + abs(gamma))
                tol = 1e-9 * max(cap, 1.0)
                is_new = all(abs(c - v0) > tol for v0 in self.vertices[arc.id])
                if v > gamma + eps and is_new:
                    return False
        return True


def solve_splittable(instance, backend=None, max_rounds=10000):
    """Splittable optimum via the inner approximation; convenience wrapper."""
    return InnerColumnGeneration(instance, INNER, backend=backend).run(max_rounds)
