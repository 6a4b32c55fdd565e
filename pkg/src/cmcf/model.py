"""Core domain types for capacitated multi-commodity flow with convex arc costs.

A problem instance is a directed graph whose arcs carry a capacity and an
increasing convex cost function of the load, a set of commodities (source,
target, bandwidth), and a rejection penalty weight applied to unrouted
bandwidth.  All solvers in this package share these types and the evaluation
helpers below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


LINEAR = "linear"
QUADRATIC = "quadratic"
KLEINROCK = "kleinrock"
BLACKBOX = "blackbox"

#: default absolute feasibility tolerance
FEAS_TOL = 1e-6


class DomainError(ValueError):
    """Cost function evaluated outside its domain."""


@dataclass(frozen=True)
class CostFunction:
    """Increasing cost of the load on one arc.

    Analytic kinds: linear ``f*x``, quadratic ``f*x**2`` and the delay-style
    ``f/(d-x)`` with a pole at ``d``.  A black-box kind wraps an arbitrary
    evaluator; it must declare whether it is convex, and may supply a
    derivative (otherwise central finite differences are used).
    """

    kind: str
    f: float = 1.0
    d: float = 0.0
    fn: object = None
    fn_derivative: object = None
    convex: bool = True

    def __call__(self, x):
        return evaluate(self, x)


def linear_cost(f):
    if f <= 0:
        raise ValueError("linear cost factor must be positive")
    return CostFunction(LINEAR, f=f)


def quadratic_cost(f):
    if f <= 0:
        raise ValueError("quadratic cost factor must be positive")
    return CostFunction(QUADRATIC, f=f)


def kleinrock_cost(f, d):
    if f <= 0 or d <= 0:
        raise ValueError("delay cost parameters must be positive")
    return CostFunction(KLEINROCK, f=f, d=d)


def blackbox_cost(fn, convex, derivative=None):
    return CostFunction(BLACKBOX, fn=fn, fn_derivative=derivative, convex=convex)


def evaluate(cost, x):
    """Cost value at load ``x``; raises DomainError outside the domain."""
    if x < 0:
        raise DomainError("negative load %r" % (x,))
    if cost.kind == LINEAR:
        return cost.f * x
    if cost.kind == QUADRATIC:
        return cost.f * x * x
    if cost.kind == KLEINROCK:
        if x >= cost.d:
            raise DomainError("load %r at or beyond pole %r" % (x, cost.d))
        return cost.f / (cost.d - x)
    if cost.kind == BLACKBOX:
        return float(cost.fn(x))
    raise ValueError("unknown cost kind %r" % (cost.kind,))


def derivative(cost, x, cap=None):
    """Marginal cost at load ``x``.

    Analytic kinds use the exact derivative.  Black-box costs without a
    supplied derivative use a central finite difference with step
    ``max(1e-6, 1e-8 * cap)``.
    """
    if x < 0:
        raise DomainError("negative load %r" % (x,))
    if cost.kind == LINEAR:
        return cost.f
    if cost.kind == QUADRATIC:
        return 2.0 * cost.f * x
    if cost.kind == KLEINROCK:
        if x >= cost.d:
            raise DomainError("load %r at or beyond pole %r" % (x, cost.d))
        return cost.f / (cost.d - x) ** 2
    if cost.kind == BLACKBOX:
        if cost.fn_derivative is not None:
            return float(cost.fn_derivative(x))
        h = max(1e-6, 1e-8 * (cap if cap else 0.0))
        lo = max(0.0, x - h)
        return (float(cost.fn(x + h)) - float(cost.fn(lo))) / (x + h - lo)
    raise ValueError("unknown cost kind %r" % (cost.kind,))


def lipschitz_bound(cost, cap):
    """Upper bound on the slope magnitude of ``cost`` over ``[0, cap]``.

    Increasing convex kinds attain their maximal slope at ``cap``.  Black-box
    costs are sampled on a 64-point grid of finite differences, doubled as a
    safety factor.
    """
    if cost.kind == LINEAR:
        return cost.f
    if cost.kind == QUADRATIC:
        return 2.0 * cost.f * cap
    if cost.kind == KLEINROCK:
        return cost.f / (cost.d - cap) ** 2
    if cost.kind == BLACKBOX:
        if cap <= 0:
            return 0.0
        pts = [cap * i / 64.0 for i in range(65)]
        vals = [float(cost.fn(p)) for p in pts]
        step = cap / 64.0
        worst = max(
            abs(vals[i + 1] - vals[i]) / step for i in range(64)
        )
        return 2.0 * worst
    raise ValueError("unknown cost kind %r" % (cost.kind,))


@dataclass(frozen=True)
class Arc:
    id: int
    tail: str
    head: str
    capacity: float
    cost: CostFunction


class Network:
    """Directed graph with capacitated, cost-weighted arcs.

    Immutable after construction; arc ids are dense ``0..len(arcs)-1``.
    """

    def __init__(self, nodes, arcs):
        self.nodes = list(nodes)
        self.arcs = list(arcs)
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise ValueError("duplicate node names")
        for i, arc in enumerate(self.arcs):
            if arc.id != i:
                raise ValueError("arc ids must be dense 0..n-1, got %r at %d" % (arc.id, i))
            if arc.tail not in node_set or arc.head not in node_set:
                raise ValueError("arc %d references undeclared node" % i)
            if arc.tail == arc.head:
                raise ValueError("arc %d is a self-loop" % i)
            if not (0 <= arc.capacity < math.inf):
                raise ValueError("arc %d capacity must be finite and nonnegative" % i)
        self._out = {v: [] for v in self.nodes}
        self._in = {v: [] for v in self.nodes}
        for arc in self.arcs:
            self._out[arc.tail].append(arc.id)
            self._in[arc.head].append(arc.id)

    def out_arcs(self, v):
        return self._out[v]

    def in_arcs(self, v):
        return self._in[v]

    def __repr__(self):
        return "Network(%d nodes, %d arcs)" % (len(self.nodes), len(self.arcs))


@dataclass(frozen=True)
class Commodity:
    id: int
    source: str
    target: str
    bandwidth: float

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError("commodity %d has equal endpoints" % self.id)
        if not (self.bandwidth > 0):
            raise ValueError("commodity %d bandwidth must be positive" % self.id)


class Instance:
    """Network plus commodities plus the rejection penalty weight.

    The penalty weight must exceed the sum of the arcs' Lipschitz bounds so
    that any optimal solution rejects as little bandwidth as possible.  When
    not supplied it is set to ``2 * (1 + sum of bounds)``.
    """

    def __init__(self, network, commodities, penalty=None):
        self.network = network
        self.commodities = list(commodities)
        for i, k in enumerate(self.commodities):
            if k.id != i:
                raise ValueError("commodity ids must be dense 0..n-1")
            if k.source not in network._out or k.target not in network._out:
                raise ValueError("commodity %d references undeclared node" % i)
        seen = set()
        for k in self.commodities:
            if (k.source, k.target) in seen:
                raise ValueError(
                    "commodities sharing source and target must be merged first"
                )
            seen.add((k.source, k.target))
        total_slope = sum(
            lipschitz_bound(a.cost, a.capacity) for a in network.arcs
        )
        if penalty is None:
            penalty = 2.0 * (1.0 + total_slope)
        elif penalty <= total_slope:
            raise ValueError(
                "penalty %g must exceed the total Lipschitz bound %g"
                % (penalty, total_slope)
            )
        self.penalty = float(penalty)

    def __repr__(self):
        return "Instance(%r, %d commodities, M=%g)" % (
            self.network, len(self.commodities), self.penalty,
        )


def validate_path(network, commodity, arcs):
    """Check that an arc id sequence is a simple source-target path."""
    if not arcs:
        return "empty path"
    node = commodity.source
    visited = {node}
    for a in arcs:
        if not (0 <= a < len(network.arcs)):
            return "unknown arc id %r" % (a,)
        arc = network.arcs[a]
        if arc.tail != node:
            return "arc %d does not chain at %s" % (a, node)
        node = arc.head
        if node in visited:
            return "repeated node %s" % node
        visited.add(node)
    if node != commodity.target:
        return "path ends at %s, not %s" % (node, commodity.target)
    return None


@dataclass
class FlowSolution:
    """Per-commodity path ratios and rejection ratios.

    ``paths[k]`` maps arc id tuples to ratios in [0, 1]; ``rejected[k]`` is
    the unrouted ratio of commodity ``k``.
    """

    paths: dict = field(default_factory=dict)
    rejected: dict = field(default_factory=dict)

    def ratio_items(self, k):
        return self.paths.get(k, {}).items()

    def rejection(self, k):
        return self.rejected.get(k, 0.0)

    def is_integral(self, tol=FEAS_TOL):
        vals = list(self.rejected.values())
        for per_k in self.paths.values():
            vals.extend(per_k.values())
        return all(min(abs(v), abs(1.0 - v)) <= tol for v in vals)


def arc_loads(instance, solution):
    """Aggregate per-arc loads implied by the path ratios."""
    loads = [0.0] * len(instance.network.arcs)
    for k in instance.commodities:
        for arcs, ratio in solution.ratio_items(k.id):
            for a in arcs:
                loads[a] += k.bandwidth * ratio
    return loads


def objective(instance, solution):
    """Total routing cost plus rejection penalties.

    Idle arcs contribute their zero-load cost, which is nonzero for the
    delay-style kind.
    """
    loads = arc_loads(instance, solution)
    total = 0.0
    for arc, x in zip(instance.network.arcs, loads):
        total += evaluate(arc.cost, x)
    for k in instance.commodities:
        total += instance.penalty * k.bandwidth * solution.rejection(k.id)
    return total


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    magnitude: float


def check_feasible(instance, solution, tol=FEAS_TOL):
    """List structural, coverage and capacity violations; empty means feasible."""
    report = []
    for k in instance.commodities:
        covered = solution.rejection(k.id)
        if not (-tol <= covered <= 1.0 + tol):
            report.append(Violation("rejection_range", "commodity %d" % k.id,
                                    max(-covered, covered - 1.0)))
        for arcs, ratio in solution.ratio_items(k.id):
            err = validate_path(instance.network, k, arcs)
            if err is not None:
                report.append(Violation("path", "commodity %d: %s" % (k.id, err), 1.0))
            if ratio < -tol:
                report.append(Violation("ratio_range", "commodity %d" % k.id, -ratio))
            covered += ratio
        if covered < 1.0 - tol:
            report.append(Violation("coverage", "commodity %d" % k.id, 1.0 - covered))
    loads = arc_loads(instance, solution)
    for arc, x in zip(instance.network.arcs, loads):
        if x > arc.capacity + tol:
            report.append(Violation("capacity", "arc %d" % arc.id, x - arc.capacity))
    return report
