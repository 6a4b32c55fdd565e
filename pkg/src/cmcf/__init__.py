"""Solvers for the splittable and unsplittable convex multi-commodity flow problem."""

from .model import (
    Arc,
    Commodity,
    CostFunction,
    FlowSolution,
    Instance,
    Network,
    arc_loads,
    blackbox_cost,
    check_feasible,
    derivative,
    evaluate,
    kleinrock_cost,
    linear_cost,
    lipschitz_bound,
    objective,
    quadratic_cost,
)

__all__ = [
    "Arc",
    "Commodity",
    "CostFunction",
    "FlowSolution",
    "Instance",
    "Network",
    "arc_loads",
    "blackbox_cost",
    "check_feasible",
    "derivative",
    "evaluate",
    "kleinrock_cost",
    "linear_cost",
    "lipschitz_bound",
    "objective",
    "quadratic_cost",
]

__version__ = "0.1.0"
