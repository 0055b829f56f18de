import itertools
import math

import numpy as np
import pytest

from pathprice.arrivals import gen_line_stochastic, gen_tree_sr_stochastic
from pathprice.errors import SizeError
from pathprice.lp import simplex_max
from pathprice.offline import (
    PackingProblem,
    lp_upper_bound,
    opt_bnb,
    opt_bruteforce,
    opt_cost_worst,
    selection_feasible,
)
from pathprice.topology import build_line, build_tree


def problem_from(values, rates, paths, capacities):
    return PackingProblem(
        values=np.array(values, dtype=float),
        rates=np.array(rates, dtype=float),
        paths=[tuple(p) for p in paths],
        capacities=np.array(capacities, dtype=float),
        request_ids=list(range(len(values))),
    )


def random_problem(rng, n_max=15, e_max=8):
    n = int(rng.integers(0, n_max + 1))
    E = int(rng.integers(1, e_max))
    paths = []
    for _ in range(n):
        ln = int(rng.integers(1, E + 1))
        s = int(rng.integers(0, E - ln + 1))
        paths.append(tuple(range(s, s + ln)))
    return problem_from(
        rng.uniform(0.5, 10.0, n), rng.uniform(0.2, 1.5, n), paths, rng.uniform(0.5, 3.0, E)
    )


def test_bruteforce_two_request_example():
    # oracle: enumerate the four subsets by hand
    problem = problem_from([1.0, 2.0], [1.0, 1.0], [(0,), (0,)], [1.0])
    best = max(
        (
            sum(v for take, v in zip(mask, [1.0, 2.0]) if take)
            for mask in itertools.product([0, 1], repeat=2)
            if sum(take for take in mask) <= 1  # capacity 1, unit rates
        ),
    )
    res = opt_bruteforce(problem)
    assert res.value == best == 2.0
    assert res.selection == frozenset({1})
    assert res.exact


def test_bruteforce_empty():
    res = opt_bruteforce(problem_from([], [], [], [2.0]))
    assert res.value == 0.0
    assert res.selection == frozenset()


def test_bruteforce_disjoint_paths_take_all():
    problem = problem_from([1.0, 2.0, 3.0], [1.0] * 3, [(0,), (1,), (2,)], [1.0] * 3)
    res = opt_bruteforce(problem)
    assert res.value == pytest.approx(6.0)
    assert res.selection == frozenset({0, 1, 2})


def test_bruteforce_lexicographic_ties():
    problem = problem_from([2.0, 2.0], [1.0, 1.0], [(0,), (0,)], [1.0])
    assert opt_bruteforce(problem).selection == frozenset({0})


def test_bruteforce_size_cap():
    n = 23
    problem = problem_from([1.0] * n, [1.0] * n, [(0,)] * n, [50.0])
    with pytest.raises(SizeError):
        opt_bruteforce(problem)


def test_bnb_equals_bruteforce_on_random_problems():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        problem = random_problem(rng)
        bf = opt_bruteforce(problem)
        bb = opt_bnb(problem, time_limit=10.0)
        assert bb.exact
        assert bb.value == bf.value
        assert selection_feasible(
            problem, [problem.request_ids.index(i) for i in bb.selection]
        )


def test_bnb_identical_items_closed_form():
    # k unit-rate copies fit a capacity-k edge: optimum is k * v
    v, k, n = 2.5, 3, 7
    problem = problem_from([v] * n, [1.0] * n, [(0,)] * n, [float(k)])
    res = opt_bnb(problem, time_limit=5.0)
    assert res.exact
    assert res.value == pytest.approx(k * v)


def test_bnb_empty():
    res = opt_bnb(problem_from([], [], [], [1.0]), time_limit=1.0)
    assert res.value == 0.0 and res.exact


def test_lp_matches_fractional_knapsack_on_single_edge():
    # oracle: greedy fill by value density on one shared edge
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 12))
        values = rng.uniform(0.5, 8.0, n)
        rates = rng.uniform(0.2, 1.5, n)
        cap = float(rng.uniform(0.5, 3.0))
        problem = problem_from(values, rates, [(0,)] * n, [cap])

        remaining, greedy = cap, 0.0
        for i in sorted(range(n), key=lambda i: -(values[i] / rates[i])):
            take = min(1.0, remaining / rates[i])
            greedy += take * values[i]
            remaining -= take * rates[i]
            if remaining <= 1e-15:
                break
        got = lp_upper_bound(problem)
        assert got.simplex_ok
        assert got.value == pytest.approx(greedy, rel=1e-9)


def test_lp_no_binding_constraint_is_total_value():
    problem = problem_from([1.0, 2.0], [1.0, 1.0], [(0,), (1,)], [5.0, 5.0])
    assert lp_upper_bound(problem).value == pytest.approx(3.0)


def test_lp_dominates_ilp_on_random_problems():
    rng = np.random.default_rng(99)
    for _ in range(60):
        problem = random_problem(rng, n_max=12)
        lp = lp_upper_bound(problem)
        ilp = opt_bruteforce(problem)
        assert lp.value >= ilp.value - 1e-7 * (1 + abs(ilp.value))


def test_bnb_timeout_reports_gap():
    # dense overlapping instance with a microscopic budget: the incumbent must
    # come back flagged as bounded, with a nonnegative gap
    rng = np.random.default_rng(5)
    n, E = 60, 10
    paths = []
    for _ in range(n):
        ln = int(rng.integers(2, E + 1))
        s = int(rng.integers(0, E - ln + 1))
        paths.append(tuple(range(s, s + ln)))
    problem = problem_from(
        rng.uniform(0.5, 10.0, n), rng.uniform(0.4, 1.0, n), paths, rng.uniform(1.0, 2.0, E)
    )
    res = opt_bnb(problem, time_limit=0.0)
    assert not res.exact
    assert res.bound_gap >= 0.0
    assert selection_feasible(problem, [problem.request_ids.index(i) for i in res.selection])


def test_opt_dominates_mechanism_on_instances():
    from pathprice.mechanism import ExponentialPricing, run

    net = build_line(13, 4.0)
    for seed in range(5):
        inst = gen_line_stochastic(net, 60, 1, 8, 6.0, 1.0, 400 + seed)
        problem = PackingProblem.from_instance(net, inst)
        opt = opt_bnb(problem, time_limit=10.0)
        for gamma in (0.5, 2.0, 4.0):
            report = run(net, inst, ExponentialPricing(gamma))
            assert opt.value >= report.alg_welfare - 1e-9


def test_from_instance_roundtrip_tree():
    net = build_tree(4, 2, 16.0, "exp_decay")
    inst = gen_tree_sr_stochastic(net, 40, 1, 4, 6.0, 1.0, 8)
    problem = PackingProblem.from_instance(net, inst)
    assert problem.n == 40
    assert problem.request_ids == [r.id for r in inst.requests]


def test_opt_cost_worst_values():
    # conjugate kink
    assert opt_cost_worst(1.0, 0.0, 1.0) == 0.0
    # (sqrt(4) - 1)^2 = 1
    assert opt_cost_worst(4.0, 0.0, 1.0) == pytest.approx(1.0)
    # oracle: grid-search sup of y*rho - f(rho) at y = 240
    y = 240.0
    rho = np.linspace(0.0, 1.0 - 1e-9, 2_000_001)
    sup = float(np.max(y * rho - rho / (1.0 - rho)))
    assert sup == pytest.approx((math.sqrt(240.0) - 1.0) ** 2, abs=1e-6)
    assert opt_cost_worst(6.0, 0.0, 40.0) == pytest.approx(sup, abs=1e-6)
    # below the conjugate kink the optimum is zero
    assert opt_cost_worst(0.5, 0.1, 2.0) == 0.0


def test_simplex_degenerate_rhs():
    # zero capacity row forces degenerate pivots; must still terminate
    c = np.array([1.0, 1.0])
    A = np.array([[1.0, 1.0], [1.0, 0.0]])
    b = np.array([0.0, 1.0])
    res = simplex_max(c, A, b, np.ones(2))
    assert res.status == "optimal"
    assert res.value == pytest.approx(0.0)
