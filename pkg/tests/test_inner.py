import math
import random

import pytest

from cmcf import model
from cmcf.inner import (
    INNER,
    TIGHT,
    ColgenError,
    InnerColumnGeneration,
    best_breakpoint,
    golden_section_max,
)
from cmcf.model import blackbox_cost, kleinrock_cost, linear_cost, quadratic_cost
from cmcf.restrictions import EMPTY, Restrictions

from conftest import build_instance, random_instance
from oracles import compact_linear_optimum, lower_convex_hull, hull_interpolator


def test_init_rmp_column_and_row_counts():
    inst = build_instance(
        ["a", "b", "c"],
        [("a", "b", 4.0, quadratic_cost(1.0)), ("b", "c", 4.0, quadratic_cost(1.0))],
        [("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0)],
    )
    cg = InnerColumnGeneration(inst, INNER)
    assert cg.prog.num_rows == 3 + 2 + 2
    # two breakpoints per arc plus one rejection column per commodity
    assert cg.prog.num_cols == 2 * 2 + 3


def test_tight_mode_load_rows_per_threshold():
    inst = build_instance(
        ["a", "b"],
        [("a", "b", 8.0, quadratic_cost(1.0))],
        [("a", "b", 2.0), ("b", "a", 1.0)],
    )
    cg = InnerColumnGeneration(inst, TIGHT)
    assert cg.thresholds == [0.0, 1.0, 2.0]
    assert len(cg.load_row) == 1 * 3


def test_empty_commodities_optimum_is_idle_cost():
    inst = build_instance(
        ["a", "b"],
        [("a", "b", 2.0, kleinrock_cost(1.0, 2.02))],
        [],
    )
    result = InnerColumnGeneration(inst, INNER).run()
    assert result.bound == pytest.approx(1.0 / 2.02)


def test_single_path_instance():
    inst = build_instance(
        ["a", "b", "c"],
        [("a", "b", 5.0, quadratic_cost(1.0)), ("b", "c", 5.0, quadratic_cost(2.0))],
        [("a", "c", 2.0)],
    )
    result = InnerColumnGeneration(inst, INNER).run()
    assert result.bound == pytest.approx(4.0 + 8.0, abs=1e-6)
    assert result.flow.rejected[0] == pytest.approx(0.0, abs=1e-9)
    assert model.check_feasible(inst, result.flow) == []


def test_disconnected_commodity_rejected():
    inst = build_instance(
        ["a", "b", "c"],
        [("a", "b", 5.0, linear_cost(1.0))],
        [("a", "c", 2.0)],
        penalty=100.0,
    )
    result = InnerColumnGeneration(inst, INNER).run()
    assert result.bound == pytest.approx(200.0)
    assert result.flow.rejected[0] == pytest.approx(1.0)


def test_linear_costs_match_compact_lp():
    rng = random.Random(321)
    for _ in range(12):
        inst = random_instance(rng, max_nodes=7, max_arcs=16, max_commodities=4,
                               cost_kinds=("linear",))
        result = InnerColumnGeneration(inst, INNER).run()
        oracle = compact_linear_optimum(inst)
        assert result.bound == pytest.approx(oracle, rel=1e-6, abs=1e-6)


def test_monotone_bound_trajectory():
    rng = random.Random(17)
    inst = random_instance(rng, max_nodes=6, max_arcs=14, max_commodities=4,
                           cost_kinds=("quadratic",))
    result = InnerColumnGeneration(inst, INNER).run()
    traj = result.stats["bound_trajectory"]
    for a, b in zip(traj, traj[1:]):
        assert b <= a + 1e-6


def test_pricing_termination_certificate():
    rng = random.Random(23)
    for kinds in [("quadratic",), ("kleinrock",)]:
        inst = random_instance(rng, max_nodes=6, max_arcs=12, max_commodities=3,
                               cost_kinds=kinds)
        cg = InnerColumnGeneration(inst, INNER)
        cg.run()
        assert cg.pricing_is_quiet(cg.solve_rmp())


def test_single_support_for_strictly_convex_costs():
    rng = random.Random(29)
    inst = random_instance(rng, max_nodes=6, max_arcs=12, max_commodities=3,
                           cost_kinds=("quadratic",))
    cg = InnerColumnGeneration(inst, INNER)
    cg.run()
    sol = cg.solve_rmp()
    for arc in inst.network.arcs:
        heavy = [
            v for v in cg.vertices[arc.id]
            if sol.x[cg.vertex_col[(arc.id, v)]] > 1e-6
        ]
        # at most one breakpoint carries weight, or two = consecutive refinement
        values = sorted(heavy)
        assert len(values) <= 2
        if len(values) == 2:
            span = max(arc.capacity, 1.0)
            assert values[1] - values[0] <= 0.35 * span


def test_vertex_pricing_closed_forms():
    # quadratic: argmax of slope*c - f*c^2 sits at slope / (2 f)
    c, v = best_breakpoint(quadratic_cost(1.0), 2.0, 0.0, 10.0, 10.0)
    assert c == pytest.approx(1.0)
    assert v == pytest.approx(1.0)
    # delay kind: argmax of slope*c - f/(d-c)
    c, v = best_breakpoint(kleinrock_cost(1.0, 2.0), 1.0, 0.0, 1.5, 1.5)
    assert c == pytest.approx(1.0)
    assert v == pytest.approx(0.0, abs=1e-12)
    # black box mirrors the quadratic closed form through golden section
    bb = blackbox_cost(lambda x: x * x, convex=True)
    c, v = best_breakpoint(bb, 2.0, 0.0, 10.0, 10.0)
    assert c == pytest.approx(1.0, abs=1e-5)


def test_golden_section_matches_closed_forms_randomized():
    rng = random.Random(71)
    for _ in range(100):
        f = rng.uniform(0.1, 4.0)
        beta = rng.uniform(0.01, 5.0)
        cap = rng.uniform(0.5, 20.0)
        bb = blackbox_cost(lambda x, f=f: f * x * x, convex=True)
        c_bb, _ = best_breakpoint(bb, beta, 0.0, cap, cap)
        expected = min(max(beta / (2 * f), 0.0), cap)
        assert c_bb == pytest.approx(expected, abs=1e-5 * max(1.0, cap))
        d = cap * rng.uniform(1.005, 1.5)
        bbk = blackbox_cost(lambda x, f=f, d=d: f / (d - x), convex=True)
        c_bk, _ = best_breakpoint(bbk, beta, 0.0, cap, cap)
        closed = d - math.sqrt(f / beta) if beta > 0 else 0.0
        assert c_bk == pytest.approx(min(max(closed, 0.0), cap), abs=1e-5 * max(1.0, cap))


def build_shared_arc_instance():
    """Both commodities can route via the quadratic arc g or a free bypass."""
    nodes = ["s1", "s2", "g_in", "g_out", "t1", "t2"]
    eps = 1e-12
    arc_specs = [
        ("g_in", "g_out", 4.0, quadratic_cost(1.0)),  # arc g, id 0
        ("s1", "g_in", 4.0, linear_cost(eps)),        # id 1
        ("g_out", "t1", 4.0, linear_cost(eps)),       # id 2
        ("s1", "t1", 4.0, linear_cost(eps)),          # id 3 bypass k1
        ("s2", "g_in", 4.0, linear_cost(eps)),        # id 4
        ("g_out", "t2", 4.0, linear_cost(eps)),       # id 5
        ("s2", "t2", 4.0, linear_cost(eps)),          # id 6 bypass k2
    ]
    commodities = [("s1", "t1", 1.0), ("s2", "t2", 2.0)]
    return build_instance(nodes, arc_specs, commodities, penalty=1000.0)


def test_shared_arc_half_splits_inner_and_tight():
    """With both commodities split 50/50, the shared arc is costed at the
    aggregated load by the plain relaxation and at per-threshold breakpoints
    by the tightened one."""
    inst = build_shared_arc_instance()
    for mode, expected in ((INNER, 2.25), (TIGHT, 2.5)):
        cg = InnerColumnGeneration(inst, mode)
        cg.add_path(0, (1, 0, 2), fixed_ratio=0.5)
        cg.add_path(0, (3,), fixed_ratio=0.5)
        cg.add_path(1, (4, 0, 5), fixed_ratio=0.5)
        cg.add_path(1, (6,), fixed_ratio=0.5)
        cg.run(path_pricing=False)
        sol = cg.solve_rmp()
        contributions = cg.arc_linearized_costs(sol)
        assert contributions[0] == pytest.approx(expected, abs=1e-9)


def test_tight_bound_dominates_inner_bound():
    rng = random.Random(37)
    for _ in range(8):
        inst = random_instance(rng, max_nodes=6, max_arcs=12, max_commodities=4,
                               cost_kinds=("quadratic", "kleinrock"))
        inner_bound = InnerColumnGeneration(inst, INNER).run().bound
        tight_bound = InnerColumnGeneration(inst, TIGHT).run().bound
        assert tight_bound >= inner_bound - 1e-6


def test_tight_excludes_undersized_arcs():
    # the only route crosses an arc smaller than the demand
    inst = build_instance(
        ["a", "b"],
        [("a", "b", 4.0, linear_cost(1.0))],
        [("a", "b", 5.0)],
        penalty=100.0,
    )
    result = InnerColumnGeneration(inst, TIGHT).run()
    assert result.flow.rejected[0] == pytest.approx(1.0)
    assert result.stats["path_columns"] == 0


def test_forbidden_arcs_respected():
    inst = build_instance(
        ["a", "b", "c"],
        [("a", "b", 5.0, linear_cost(1.0)), ("b", "c", 5.0, linear_cost(1.0)),
         ("a", "c", 5.0, linear_cost(10.0))],
        [("a", "c", 1.0)],
    )
    free = InnerColumnGeneration(inst, INNER).run()
    assert free.bound == pytest.approx(2.0, abs=1e-6)
    restricted = InnerColumnGeneration(
        inst, INNER, restrictions=Restrictions({0: frozenset({0})}, {})
    ).run()
    assert restricted.bound == pytest.approx(10.0, abs=1e-6)


def test_nonconvex_blackbox_matches_its_convex_hull():
    cap = 2.0

    def wobble(x):
        return x + 0.08 * math.sin(2.0 * math.pi * x)

    xs = [cap * i / 1000.0 for i in range(1001)]
    hx, hy = lower_convex_hull(xs, [wobble(x) for x in xs])
    hull = hull_interpolator(hx, hy)

    def instance_with(cost):
        return build_instance(
            ["a", "b"],
            [("a", "b", cap, cost)],
            [("a", "b", 1.25)],
            penalty=50.0,
        )

    raw = instance_with(blackbox_cost(wobble, convex=False))
    hulled = instance_with(blackbox_cost(hull, convex=True))
    bound_raw = InnerColumnGeneration(raw, INNER).run().bound
    bound_hull = InnerColumnGeneration(hulled, INNER).run().bound
    assert bound_raw == pytest.approx(bound_hull, abs=1e-4)


def test_iteration_cap_raises():
    inst = build_instance(
        ["a", "b"],
        [("a", "b", 5.0, quadratic_cost(1.0))],
        [("a", "b", 2.0)],
    )
    with pytest.raises(ColgenError):
        InnerColumnGeneration(inst, INNER).run(max_rounds=1)
