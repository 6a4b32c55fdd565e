"""Frank-Wolfe style flow deviation for the uncapacitated splittable problem.

Each round routes every commodity entirely onto its marginal-cost shortest
path, then line-searches between the current loads and that all-or-nothing
assignment.  Capacities are ignored; delay-style costs are replaced beyond
99% of their pole by the matching second-order polynomial so the objective
stays finite when loads overshoot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import model
from .graph import shortest_path

_LINE_SEARCH_ITERS = 80
_SHRINK = (math.sqrt(5.0) - 1.0) / 2.0


class FlowDeviationError(RuntimeError):
    """A commodity has no route; the uncapacitated model needs connectivity."""


@dataclass
class FwState:
    loads: list
    objective: float
    gap: float
    iterations: int
    converged: bool
    objective_trajectory: list = field(default_factory=list)


def _smoothed(cost, cap):
    """Evaluator/derivative pair, finite for loads beyond the capacity."""
    if cost.kind != model.KLEINROCK:
        return (
            lambda x: model.evaluate(cost, x),
            lambda x: model.derivative(cost, x, cap),
        )
    switch = 0.99 * cost.d
    gap0 = cost.d - switch
    v0 = cost.f / gap0
    d1 = cost.f / gap0 ** 2
    d2 = 2.0 * cost.f / gap0 ** 3

    def value(x):
        if x <= switch:
            return model.evaluate(cost, x)
        dx = x - switch
        return v0 + d1 * dx + 0.5 * d2 * dx * dx

    def deriv(x):
        if x <= switch:
            return model.derivative(cost, x, cap)
        return d1 + d2 * (x - switch)

    return value, deriv


def all_or_nothing(instance, weights):
    """Route each commodity fully on its weight-shortest path; return loads."""
    net = instance.network
    loads = [0.0] * len(net.arcs)
    for k in instance.commodities:
        found = shortest_path(net, k.source, k.target, weights)
        if found is None:
            raise FlowDeviationError(
                "commodity %d has no route from %s to %s"
                % (k.id, k.source, k.target)
            )
        _, arcs = found
        for a in arcs:
            loads[a] += k.bandwidth
    return loads


def run(instance, tol=1e-6, max_iters=1000):
    """Iterate all-or-nothing deviations with exact line search."""
    net = instance.network
    pairs = [_smoothed(arc.cost, arc.capacity) for arc in net.arcs]

    def total(loads):
        return sum(pairs[a][0](loads[a]) for a in range(len(loads)))

    def gradient(loads):
        return [max(pairs[a][1](loads[a]), 0.0) for a in range(len(loads))]

    x = all_or_nothing(instance, gradient([0.0] * len(net.arcs)))
    trajectory = [total(x)]
    gap = math.inf
    for iteration in range(1, max_iters + 1):
        w = gradient(x)
        target = all_or_nothing(instance, w)
        gap = sum(wi * (xi - ti) for wi, xi, ti in zip(w, x, target))
        obj = trajectory[-1]
        if gap <= tol * max(1.0, abs(obj)):
            return FwState(x, obj, gap, iteration, True, trajectory)
        direction = [t - xi for t, xi in zip(target, x)]

        def along(theta):
            return total([xi + theta * d for xi, d in zip(x, direction)])

        lo, hi = 0.0, 1.0
        c = hi - _SHRINK * (hi - lo)
        d = lo + _SHRINK * (hi - lo)
        fc, fd = along(c), along(d)
        for _ in range(_LINE_SEARCH_ITERS):
            if fc <= fd:
                hi, d, fd = d, c, fc
                c = hi - _SHRINK * (hi - lo)
                fc = along(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + _SHRINK * (hi - lo)
                fd = along(d)
        theta = 0.5 * (lo + hi)
        if along(theta) > obj:
            theta = 0.0
        x = [xi + theta * d_i for xi, d_i in zip(x, direction)]
        trajectory.append(total(x))
    return FwState(x, trajectory[-1], gap, max_iters, False, trajectory)
