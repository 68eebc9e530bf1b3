import numpy as np
import pytest

from pmedian import benders, master
from pmedian.instance import Instance, preprocess
from pmedian.master import CutPool, FixingProvesOptimal
from pmedian.simplex import LpModel, SimplexSolver, lp_solve


def example():
    inst = Instance(3, 3, 1, np.array([[0, 4, 7], [4, 0, 3], [7, 3, 0]]))
    return inst, preprocess(inst)


def test_add_cuts_dedup():
    inst, prep = example()
    model = LpModel.empty(3, 3, 1)
    pool = CutPool()
    cut = benders.build_cut(0, 1, prep)
    assert master.add_cuts(pool, model, [cut]) == 1
    assert master.add_cuts(pool, model, [cut]) == 0
    assert pool.total() == 1 and len(model.rows) == 1


def test_add_cut_with_empty_support():
    inst = Instance(1, 2, 1, np.array([[3, 9]]))
    prep = preprocess(inst)
    model = LpModel.empty(2, 1, 1)
    pool = CutPool()
    cut = benders.build_cut(0, 0, prep)
    assert master.add_cuts(pool, model, [cut]) == 1
    assert len(model.rows[0].sites) == 0
    sol = lp_solve(model)
    assert sol.theta[0] == pytest.approx(3.0)


def test_add_cuts_after_one_separation_round():
    inst, prep = example()
    model = LpModel.empty(3, 3, 1)
    pool = CutPool()
    ub, cuts = benders.separate(np.array([0.0, 1.0, 0.0]), np.zeros(3), prep)
    added = master.add_cuts(pool, model, cuts)
    # clients 0 and 2 are underestimated; client 1 is exact, so no cut
    assert added == 2 and pool.total() == 2 and len(model.rows) == 2


def test_pool_model_row_consistency():
    rng = np.random.Generator(np.random.PCG64(8))
    inst = Instance(6, 6, 2, rng.integers(1, 20, size=(6, 6)))
    prep = preprocess(inst)
    model = LpModel.empty(6, 6, 2)
    pool = CutPool()
    solver = SimplexSolver(model)
    y = np.zeros(6)
    y[[0, 1]] = 1.0
    _, cuts = benders.separate(y, np.zeros(6), prep)
    master.add_cuts(pool, model, cuts)
    for _ in range(6):
        sol = solver.solve()
        assert pool.n_active() == len(model.rows)
        _, cuts = benders.separate(sol.y, sol.theta, prep)
        if master.add_cuts(pool, model, cuts) == 0:
            break
    for client, entries in pool.by_client.items():
        for kt, entry in entries.items():
            if entry.active:
                row = model.rows[entry.row]
                assert row.client == client and row.rhs == entry.cut.rhs


def _pool_with_cuts(khats):
    """Pool with one synthetic client, cuts at the given indices."""
    pool = CutPool()
    model = LpModel.empty(4, 1, 1)
    for kt in khats:
        cut = benders.BendersCut(
            client=0, ktilde=kt, rhs=10 + kt,
            sites=np.array([0], dtype=np.int32),
            coeffs=np.array([1 + kt], dtype=np.int64),
        )
        master.add_cuts(pool, model, [cut])
    return pool, model


class FakeSol:
    def __init__(self, y, theta):
        self.y = np.asarray(y, dtype=float)
        self.theta = np.asarray(theta, dtype=float)


def test_reduce_keeps_all_when_all_saturated():
    pool, model = _pool_with_cuts([0, 1, 2])
    # theta exactly on the max cut: with y=0 every cut reads rhs = 10+kt
    sol = FakeSol([0, 0, 0, 0], [12.0])
    removed = master.reduce_constraints(pool, model, sol)
    # cuts 0 and 1 are slack (10, 11 < 12), only kt=2 saturated -> khat=2, none above
    assert removed == 0
    assert pool.n_active() == 3


def test_reduce_drops_above_highest_saturated():
    pool, model = _pool_with_cuts([1, 3, 5])
    # y=0: cut values are 11, 13, 15; theta=13 saturates kt=3 only
    sol = FakeSol([0, 0, 0, 0], [13.0])
    removed = master.reduce_constraints(pool, model, sol)
    assert removed == 1
    active = sorted(kt for kt, e in pool.by_client[0].items() if e.active)
    assert active == [1, 3]
    assert len(model.rows) == 2
    # retained inactive for audit
    assert pool.total() == 3
    assert "off" in pool.dump()


def test_reduce_no_saturation_keeps_lowest():
    pool, model = _pool_with_cuts([1, 3, 5])
    sol = FakeSol([0, 0, 0, 0], [99.0])  # far above every cut: nothing saturated
    removed = master.reduce_constraints(pool, model, sol)
    assert removed == 2
    active = [kt for kt, e in pool.by_client[0].items() if e.active]
    assert active == [1]


def test_reduce_reindexes_model_rows():
    inst, prep = example()
    model = LpModel.empty(3, 3, 1)
    pool = CutPool()
    solver = SimplexSolver(model)
    y = np.array([0.0, 1.0, 0.0])
    _, cuts = benders.separate(y, np.zeros(3), prep)
    master.add_cuts(pool, model, cuts)
    sol = solver.solve()
    lb_before = sol.objective
    master.reduce_constraints(pool, model, sol)
    for entry in pool.entries():
        if entry.active:
            row = model.rows[entry.row]
            assert row.client == entry.cut.client
    # bound must not regress after reduction
    sol2 = lp_solve(model)
    assert sol2.objective >= lb_before - 1e-6 * max(1.0, abs(lb_before))


def test_reactivation_after_reduction():
    pool, model = _pool_with_cuts([1, 3, 5])
    sol = FakeSol([0, 0, 0, 0], [13.0])
    master.reduce_constraints(pool, model, sol)
    cut5 = pool.by_client[0][5].cut
    added = master.add_cuts(pool, model, [cut5])
    assert added == 1
    assert pool.n_active() == 3 and pool.total() == 3


# -- reduced-cost fixing ------------------------------------------------------

def _sol_with(rc, y, n_sites):
    class S:
        pass

    s = S()
    s.reduced_costs = np.array(rc + [0.0] * 0, dtype=float)
    s.y = np.array(y, dtype=float)
    return s


def test_rcfix_zero_rc_fixes_nothing():
    model = LpModel.empty(3, 1, 1)
    sol = _sol_with([0.0, 0.0, 0.0], [0.4, 0.6, 0.0], 3)
    f0, f1 = master.reduced_cost_fixing(10.0, 12.0, sol, model)
    assert f0 == [] and f1 == []


def test_rcfix_closes_expensive_site():
    model = LpModel.empty(3, 1, 1)
    sol = _sol_with([3.0, 0.0, 0.0], [0.0, 1.0, 0.0], 3)
    f0, f1 = master.reduced_cost_fixing(10.0, 12.0, sol, model)
    assert f0 == [0] and f1 == []
    assert model.y_hi[0] == 0.0


def test_rcfix_opens_mandatory_site():
    model = LpModel.empty(3, 1, 1)
    sol = _sol_with([0.0, -3.0, 0.0], [0.0, 1.0, 0.0], 3)
    f0, f1 = master.reduced_cost_fixing(10.0, 12.0, sol, model)
    assert f1 == [1]
    assert model.y_lo[1] == 1.0


def test_rcfix_zero_gap_fixes_every_nonbasic():
    model = LpModel.empty(3, 1, 1)
    sol = _sol_with([2.0, 0.0, -1.5], [0.0, 1.0, 1.0], 3)
    f0, f1 = master.reduced_cost_fixing(12.0, 12.0, sol, model)
    assert f0 == [0] and f1 == [2]


def test_rcfix_forced_resolve_exceeds_incumbent():
    # fixing is justified: forcing the closed site open must cost > ub1
    inst = Instance(2, 2, 1, np.array([[0, 10], [0, 10]]))
    prep = preprocess(inst)
    model = LpModel.empty(2, 2, 1)
    pool = CutPool()
    for i in range(2):
        for kt in range(int(prep.K[i])):
            master.add_cuts(pool, model, [benders.build_cut(i, kt, prep)])
    sol = lp_solve(model)
    assert sol.objective == pytest.approx(0.0)
    lb1, ub1 = sol.objective, 0
    f0, f1 = master.reduced_cost_fixing(lb1, float(ub1), sol, model)
    if 1 in f0:
        forced = LpModel(2, 2, 1, np.array([1.0, 1.0]), np.array([1.0, 1.0]),
                         model.rows)
        forced.y_lo[0] = 0.0
        forced.y_lo[1] = forced.y_hi[1] = 1.0
        forced.y_hi[0] = 0.0
        res = lp_solve(forced)
        assert res.objective > ub1 + 1e-6


def test_rcfix_escalates_when_nothing_feasible_remains():
    model = LpModel.empty(2, 1, 2)  # p = 2: both sites must open
    sol = _sol_with([5.0, 0.0], [0.0, 1.0], 2)
    with pytest.raises(FixingProvesOptimal):
        master.reduced_cost_fixing(10.0, 11.0, sol, model)
