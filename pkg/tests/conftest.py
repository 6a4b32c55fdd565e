import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import random

import pytest

from cmcf import model


def build_instance(nodes, arc_specs, commodity_specs, penalty=None):
    """arc_specs: (tail, head, capacity, cost); commodity_specs: (s, t, bw)."""
    arcs = [
        model.Arc(i, t, h, float(c), cost)
        for i, (t, h, c, cost) in enumerate(arc_specs)
    ]
    commodities = [
        model.Commodity(i, s, t, float(b))
        for i, (s, t, b) in enumerate(commodity_specs)
    ]
    return model.Instance(model.Network(nodes, arcs), commodities, penalty)


def random_instance(rng, max_nodes=8, max_arcs=20, max_commodities=5,
                    cost_kinds=("linear",), cap_range=(1.0, 10.0),
                    bw_range=(0.5, 3.0), integer_bw=False):
    """Random digraph instance; commodities have distinct (source, target)."""
    n = rng.randint(3, max_nodes)
    nodes = ["n%d" % i for i in range(n)]
    pairs = [(u, v) for u in nodes for v in nodes if u != v]
    rng.shuffle(pairs)
    n_arcs = rng.randint(min(4, len(pairs)), min(max_arcs, len(pairs)))
    arc_specs = []
    for u, v in pairs[:n_arcs]:
        cap = rng.uniform(*cap_range)
        kind = rng.choice(cost_kinds)
        f = rng.uniform(0.1, 4.0)
        if kind == "linear":
            cost = model.linear_cost(f)
        elif kind == "quadratic":
            cost = model.quadratic_cost(f)
        elif kind == "kleinrock":
            cost = model.kleinrock_cost(f, 1.01 * cap)
        else:
            raise ValueError(kind)
        arc_specs.append((u, v, cap, cost))
    rng.shuffle(pairs)
    n_k = rng.randint(1, max_commodities)
    if integer_bw:
        lo, hi = int(round(bw_range[0])), int(round(bw_range[1]))
        draw = lambda: float(rng.randint(max(lo, 1), max(hi, 1)))
    else:
        draw = lambda: rng.uniform(*bw_range)
    commodity_specs = [(u, v, draw()) for u, v in pairs[:n_k]]
    return build_instance(nodes, arc_specs, commodity_specs)


@pytest.fixture
def seeded_rng():
    return random.Random(20240901)
