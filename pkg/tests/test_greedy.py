import itertools

import pytest

from cmcf import model
from cmcf.greedy import greedy_once, multi_start
from cmcf.model import kleinrock_cost, linear_cost, quadratic_cost
from cmcf.rng import Xoshiro256

from conftest import build_instance
from oracles import unsplittable_optimum

TINY = linear_cost(1e-12)


def parallel_pair_instance():
    """Two unit commodities fed into a pair of parallel quadratic arcs."""
    return build_instance(
        ["s1", "s2", "s", "t"],
        [
            ("s1", "s", 9.0, TINY),                   # 0 feeder a
            ("s2", "s", 9.0, TINY),                   # 1 feeder b
            ("s", "t", 2.0, quadratic_cost(1.0)),     # 2
            ("s", "t", 2.0, quadratic_cost(1.0)),     # 3
        ],
        [("s1", "t", 1.0), ("s2", "t", 1.0)],
        penalty=100.0,
    )


def greedy_trap_instance():
    """Commodities 3, 2, 2 over a two-layer fan; every order is suboptimal.

    Layer one: arcs m, n (capacity 3) and o (capacity 2); layer two: arcs p,
    q (capacity 4).  The quadratic factors steer the first routed commodity
    onto the arcs the best pairing needs for the others.
    """
    return build_instance(
        ["s1", "s2", "s3", "s", "w", "t"],
        [
            ("s", "w", 3.0, quadratic_cost(1.0)),   # 0 m
            ("s", "w", 3.0, quadratic_cost(2.0)),   # 1 n
            ("s", "w", 2.0, quadratic_cost(2.0)),   # 2 o
            ("w", "t", 4.0, quadratic_cost(2.0)),   # 3 p
            ("w", "t", 4.0, quadratic_cost(1.0)),   # 4 q
            ("s1", "s", 3.0, TINY),                 # 5 feeder, big commodity
            ("s2", "s", 2.0, TINY),                 # 6
            ("s3", "s", 2.0, TINY),                 # 7
        ],
        [("s1", "t", 3.0), ("s2", "t", 2.0), ("s3", "t", 2.0)],
        penalty=500.0,
    )


def test_parallel_arcs_balance_under_marginal_costs():
    inst = parallel_pair_instance()
    for order in ([0, 1], [1, 0]):
        result = greedy_once(inst, order)
        loads = model.arc_loads(inst, result.to_flow())
        assert loads[2] == pytest.approx(1.0)
        assert loads[3] == pytest.approx(1.0)
        assert result.objective == pytest.approx(2.0, abs=1e-9)


def test_single_commodity_lex_tie_break():
    inst = parallel_pair_instance()
    result = greedy_once(inst, [0, 1])
    assert result.assignment[0] == (0, 2)


def test_oversized_commodity_rejected():
    inst = build_instance(
        ["s", "t"],
        [("s", "t", 1.0, linear_cost(1.0))],
        [("s", "t", 5.0)],
        penalty=10.0,
    )
    result = greedy_once(inst, [0])
    assert result.assignment[0] is None
    assert result.objective == pytest.approx(50.0)
    assert model.check_feasible(inst, result.to_flow()) == []


def test_empty_instance_idle_cost():
    inst = build_instance(
        ["s", "t"],
        [("s", "t", 1.0, kleinrock_cost(1.0, 1.01))],
        [],
    )
    assert greedy_once(inst, []).objective == pytest.approx(1.0 / 1.01)


def test_results_always_feasible_and_integral():
    inst = greedy_trap_instance()
    for order in itertools.permutations(range(3)):
        result = greedy_once(inst, list(order))
        flow = result.to_flow()
        assert model.check_feasible(inst, flow) == []
        assert flow.is_integral()
        assert model.objective(inst, flow) == pytest.approx(result.objective)


def test_bad_order_rejected():
    inst = parallel_pair_instance()
    with pytest.raises(ValueError):
        greedy_once(inst, [0, 0])


def test_multi_start_deterministic_and_monotone():
    inst = greedy_trap_instance()
    a = multi_start(inst, 5, seed=123)
    b = multi_start(inst, 5, seed=123)
    assert a.objective == b.objective and a.order == b.order
    one = multi_start(inst, 1, seed=77)
    expected_order = Xoshiro256(77).shuffle(list(range(3)))
    assert list(one.order) == expected_order
    many = multi_start(inst, 100, seed=77)
    assert many.objective <= one.objective + 1e-12


def test_trap_instance_every_order_strictly_suboptimal():
    inst = greedy_trap_instance()
    optimum, assignment = unsplittable_optimum(inst)
    assert optimum is not None
    assert all(path is not None for path in assignment.values())
    greedy_values = []
    for order in itertools.permutations(range(3)):
        result = greedy_once(inst, list(order))
        greedy_values.append(result.objective)
        assert result.objective > optimum + 1e-9
    # multi-start can only reach the best order, which is still short
    best = multi_start(inst, 60, seed=99)
    assert best.objective == pytest.approx(min(greedy_values), abs=1e-12)
    assert best.objective > optimum + 1e-9


def test_greedy_upper_bounds_the_enumeration_optimum():
    inst = parallel_pair_instance()
    optimum, _ = unsplittable_optimum(inst)
    for order in ([0, 1], [1, 0]):
        assert greedy_once(inst, order).objective >= optimum - 1e-9
