import numpy as np
import pytest
from scipy.optimize import linprog

from pmedian import oracle
from pmedian.errors import GuardExceeded
from pmedian.instance import Instance, preprocess


def example():
    return Instance(3, 3, 1, np.array([[0, 4, 7], [4, 0, 3], [7, 3, 0]]))


def test_enumerate_example():
    res = oracle.enumerate_opt(example())
    assert res.optimum == 7
    assert res.best_open == (1,)
    assert res.n_optimal == 1


def test_enumerate_all_open():
    inst = Instance(3, 3, 3, np.array([[2, 4, 7], [4, 1, 3], [7, 3, 2]]))
    res = oracle.enumerate_opt(inst)
    assert res.optimum == 5 and res.n_optimal == 1


def test_enumerate_symmetric_tie():
    inst = Instance(2, 2, 1, np.array([[0, 6], [6, 0]]))
    res = oracle.enumerate_opt(inst)
    assert res.optimum == 6 and res.n_optimal == 2


def test_enumerate_guard():
    inst = Instance(40, 40, 20, np.ones((40, 40), dtype=np.int64))
    with pytest.raises(GuardExceeded):
        oracle.enumerate_opt(inst)


def test_f4_value_at_most_optimum():
    rng = np.random.Generator(np.random.PCG64(15))
    for _ in range(30):
        n = int(rng.integers(3, 10))
        p = int(rng.integers(1, n))
        inst = Instance(n, n, p, rng.integers(1, 25, size=(n, n)))
        prep = preprocess(inst)
        lp = oracle.full_f4_lp_value(inst, prep)
        opt = oracle.enumerate_opt(inst).optimum
        assert lp <= opt + 1e-6


def test_f4_identical_rows_is_tight():
    row = np.array([3, 8, 1, 5])
    inst = Instance(3, 4, 2, np.tile(row, (3, 1)))
    prep = preprocess(inst)
    lp = oracle.full_f4_lp_value(inst, prep)
    opt = oracle.enumerate_opt(inst).optimum
    assert lp == pytest.approx(opt)


def test_f4_guard():
    import pmedian.oracle as mod
    inst = example()
    prep = preprocess(inst)
    old = mod.F4_ROW_GUARD
    mod.F4_ROW_GUARD = 3
    try:
        with pytest.raises(GuardExceeded):
            oracle.full_f4_lp_value(inst, prep)
    finally:
        mod.F4_ROW_GUARD = old


def test_f4_matches_external_lp_solver():
    """Cross-check the oracle itself against an unrelated implementation."""
    rng = np.random.Generator(np.random.PCG64(16))
    for _ in range(10):
        n = int(rng.integers(3, 8))
        p = int(rng.integers(1, n))
        inst = Instance(n, n, p, rng.integers(1, 20, size=(n, n)))
        prep = preprocess(inst)
        model = oracle.full_f4_model(inst, prep)
        msites, nclients = n, n
        nv = msites + nclients
        c = np.zeros(nv)
        c[msites:] = 1.0
        rows = model.rows
        A_ub = np.zeros((len(rows), nv))
        b_ub = np.zeros(len(rows))
        for r, row in enumerate(rows):
            A_ub[r, row.sites] = -row.coeffs
            A_ub[r, msites + row.client] = -1.0
            b_ub[r] = -row.rhs
        A_eq = np.zeros((1, nv))
        A_eq[0, :msites] = 1.0
        ref = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[p],
                      bounds=[(0, 1)] * msites + [(0, None)] * nclients,
                      method="highs")
        ours = oracle.full_f4_lp_value(inst, prep)
        assert ours == pytest.approx(ref.fun, abs=1e-6 * max(1, abs(ref.fun)))


def test_sp_lp_value_binary_is_distance():
    inst = example()
    y = np.array([0.0, 1.0, 0.0])
    assert oracle.sp_lp_value(0, y, inst) == pytest.approx(4.0)
    assert oracle.sp_lp_value(1, y, inst) == pytest.approx(0.0)
    assert oracle.sp_lp_value(2, y, inst) == pytest.approx(3.0)


def test_sp_lp_value_fractional_example():
    assert oracle.sp_lp_value(0, np.array([0.5, 0.5, 0.0]), example()) == pytest.approx(2.0)


def test_naive_ktilde_first_branch():
    inst = example()
    assert oracle.naive_ktilde(0, np.array([1.0, 0.0, 0.0]), inst) == 0
    assert oracle.naive_ktilde(0, np.array([0.0, 1.0, 0.0]), inst) == 1
