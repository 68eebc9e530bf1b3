import numpy as np
import pytest

from pmedian import heuristics, oracle
from pmedian.instance import Instance, generate_rw, preprocess


def example():
    inst = Instance(3, 3, 1, np.array([[0, 4, 7], [4, 0, 3], [7, 3, 0]]))
    return inst, preprocess(inst)


def test_evaluate_example():
    inst, prep = example()
    assert heuristics.evaluate([1], inst, prep) == 7
    assert heuristics.evaluate([0], inst, prep) == 11
    assert heuristics.evaluate([2], inst, prep) == 10


def test_evaluate_all_open():
    inst = Instance(3, 3, 3, np.array([[2, 4, 7], [4, 1, 3], [7, 3, 2]]))
    prep = preprocess(inst)
    assert heuristics.evaluate([0, 1, 2], inst, prep) == 2 + 1 + 2


def test_evaluate_wrong_cardinality():
    inst, prep = example()
    with pytest.raises(ValueError):
        heuristics.evaluate([0, 1], inst, prep)
    with pytest.raises(ValueError):
        heuristics.evaluate([0, 0], Instance(3, 3, 2, inst.dist), prep)


def test_evaluate_against_double_loop():
    rng = np.random.Generator(np.random.PCG64(10))
    for _ in range(60):
        n, m = int(rng.integers(2, 10)), int(rng.integers(2, 10))
        p = int(rng.integers(1, m + 1))
        inst = Instance(n, m, p, rng.integers(0, 40, size=(n, m)))
        prep = preprocess(inst)
        open_sites = sorted(int(j) for j in rng.choice(m, size=p, replace=False))
        ref = sum(min(int(inst.dist[i, j]) for j in open_sites) for i in range(n))
        assert heuristics.evaluate(open_sites, inst, prep) == ref


def test_initial_solution_example_optimal():
    inst, prep = example()
    sol = heuristics.initial_solution(inst, prep)
    assert sol.open_sites == (1,) and sol.value == 7


def test_initial_solution_forced_all_open():
    inst = Instance(3, 3, 3, np.array([[2, 4, 7], [4, 1, 3], [7, 3, 2]]))
    prep = preprocess(inst)
    sol = heuristics.initial_solution(inst, prep)
    assert sol.open_sites == (0, 1, 2)
    assert sol.value == 5


def test_initial_solution_feasible_and_upper_bounds_optimum():
    rng = np.random.Generator(np.random.PCG64(11))
    for _ in range(25):
        n = int(rng.integers(4, 11))
        p = int(rng.integers(1, n))
        inst = Instance(n, n, p, rng.integers(1, 30, size=(n, n)))
        prep = preprocess(inst)
        sol = heuristics.initial_solution(inst, prep)
        assert len(sol.open_sites) == p
        assert sol.value == heuristics.evaluate(sol.open_sites, inst, prep)
        assert sol.value >= oracle.enumerate_opt(inst).optimum


def test_initial_solution_deterministic():
    inst = generate_rw(40, seed=5, p=6)
    prep = preprocess(inst)
    a = heuristics.initial_solution(inst, prep, seed=1)
    b = heuristics.initial_solution(inst, prep, seed=1)
    assert a == b


def test_random_solution_feasible_and_seeded():
    inst = generate_rw(30, seed=9, p=7)
    prep = preprocess(inst)
    a = heuristics.random_solution(inst, prep, seed=4)
    b = heuristics.random_solution(inst, prep, seed=4)
    c = heuristics.random_solution(inst, prep, seed=5)
    assert a == b
    assert len(a.open_sites) == 7
    assert a.value == heuristics.evaluate(a.open_sites, inst, prep)
    assert a != c or a.open_sites == c.open_sites


def test_round_solution_largest_values():
    inst, prep = example()
    sol = heuristics.round_solution(np.array([0.5, 0.6, 0.4]), inst, prep)
    assert sol.open_sites == (1,) and sol.value == 7


def test_round_solution_binary_fixed_point():
    inst, prep = example()
    sol = heuristics.round_solution(np.array([0.0, 1.0, 0.0]), inst, prep)
    assert sol.open_sites == (1,)


def test_round_solution_tie_by_index():
    inst = Instance(2, 4, 2, np.array([[1, 2, 3, 4], [4, 3, 2, 1]]))
    prep = preprocess(inst)
    sol = heuristics.round_solution(np.full(4, 0.5), inst, prep)
    assert sol.open_sites == (0, 1)


def test_interchange_improves_or_keeps():
    rng = np.random.Generator(np.random.PCG64(12))
    for _ in range(20):
        n = int(rng.integers(5, 12))
        p = int(rng.integers(1, n - 1))
        inst = Instance(n, n, p, rng.integers(1, 25, size=(n, n)))
        start = sorted(int(j) for j in rng.choice(n, size=p, replace=False))
        out = heuristics.interchange(inst, start)
        prep = preprocess(inst)
        assert len(set(out)) == p
        assert heuristics.evaluate(out, inst, prep) <= heuristics.evaluate(start, inst, prep)
