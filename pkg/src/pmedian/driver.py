"""Two-phase exact solve: cutting planes on the relaxation, then tree search.

Phase 1 seeds the master with the cuts of a heuristic incumbent and
alternates LP solves with closed-form separation until the relaxation bound
meets the separation bound.  Phase 2 restores integrality with a best-bound
branch-and-cut in which integer candidates are separated lazily to a fixed
point; cuts found anywhere are valid everywhere, so they are shared
globally.  All incumbents are re-evaluated in exact integer arithmetic.
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import benders, heuristics, master
from .errors import IterationLimit, MemoryGuardExceeded, SimplexError
from .instance import Instance, Preprocessed, preprocess
from .master import CutPool, Phase1Result
from .simplex import Basis, LpModel, SimplexSolver

log = logging.getLogger("pmedian")

# Integer objective: a node within one unit of the incumbent cannot improve it.
ABS_GAP = 1.0 - 1e-6
REL_EPS = 1e-9
INTEGRALITY_TOL = 1e-6


@dataclass
class Params:
    """Solver configuration; the defaults mirror the benchmark setup."""

    time_limit: float = 36000.0
    seed: int = 0
    rounding: bool = True
    reduction: bool = True
    rcfix: bool = True
    frac_sep_phase2: bool = False
    initial: str = "heuristic"  # "heuristic" | "random"
    max_phase1_rounds: int | None = None  # default 10 * n_clients
    node_limit: int = 500_000


@dataclass
class Node:
    """One open subproblem of the tree search."""

    bound: float
    depth: int
    fixings: dict[int, int] = field(default_factory=dict)
    basis: Basis | None = None


@dataclass
class SolveResult:
    status: str            # "optimal" | "feasible" | "infeasible"
    value: int | None
    lb: float
    ub: float
    gap: float
    iterations: int        # separation rounds across both phases
    nodes: int
    t_phase1: float
    t_total: float
    incumbent: heuristics.IntegerSolution | None
    lb1: float = float("nan")  # relaxation bound at the end of phase 1
    ub1: int | None = None     # incumbent value at the end of phase 1

    @staticmethod
    def _gap(lb: float, ub: float) -> float:
        if ub <= lb:
            return 0.0
        if ub == 0:
            return float("inf")
        return (ub - lb) / abs(ub)


def _progress(phase: str, iters: int, lb: float, ub: float, nodes: int, t0: float) -> None:
    if log.isEnabledFor(logging.INFO):
        gap = SolveResult._gap(lb, ub)
        log.info("%s\t%d\t%.6f\t%.6f\t%.3g\t%d\t%.2f",
                 phase, iters, lb, ub, gap, nodes, time.perf_counter() - t0)


def phase1(
    inst: Instance,
    prep: Preprocessed,
    initial: heuristics.IntegerSolution,
    params: Params,
    deadline: float | None = None,
) -> Phase1Result:
    """Cutting-plane loop on the relaxed master (no integrality)."""
    t0 = time.perf_counter()
    n, m = inst.n_clients, inst.n_sites
    model = LpModel.empty(m, n, inst.p)
    pool = CutPool()
    solver = SimplexSolver(model)

    incumbent = initial
    ub1 = initial.value
    ub_mp = float(initial.value)
    lb_mp = 0.0
    separations = 1
    _, cuts = benders.separate(initial.as_y(m), np.zeros(n), prep)
    master.add_cuts(pool, model, cuts)

    cap = params.max_phase1_rounds or 10 * n
    rounds = 0
    converged = False
    sol = None
    while True:
        if rounds >= cap:
            raise IterationLimit(
                f"phase 1 did not converge within {cap} rounds",
                partial=_phase1_result(lb_mp, ub1, incumbent, sol, pool, model,
                                       rounds, separations, t0, False),
            )
        rounds += 1
        sol = solver.solve()
        if sol.status != "optimal":
            raise SimplexError(f"master relaxation came back {sol.status}", solver.iterations)
        lb_mp = sol.objective
        if lb_mp >= ub_mp - max(REL_EPS * abs(ub_mp), REL_EPS):
            converged = True
            break

        opt_sp, cuts = benders.separate(sol.y, sol.theta, prep)
        separations += 1
        added = master.add_cuts(pool, model, cuts)
        ub_mp = min(ub_mp, opt_sp)

        if params.rounding and _is_fractional(sol.y):
            rounded = heuristics.round_solution(sol.y, inst, prep)
            if rounded.value < ub1:
                ub1 = rounded.value
                incumbent = rounded
        _progress("phase1", rounds, lb_mp, float(ub1), 0, t0)

        if lb_mp >= ub_mp - max(REL_EPS * abs(ub_mp), REL_EPS) or added == 0:
            converged = True
            break
        if deadline is not None and time.perf_counter() > deadline:
            break

    return _phase1_result(lb_mp, ub1, incumbent, sol, pool, model,
                          rounds, separations, t0, converged)


def _phase1_result(lb, ub1, incumbent, sol, pool, model, rounds, seps, t0, converged):
    return Phase1Result(
        lb1=lb,
        ub1=ub1,
        incumbent=incumbent,
        ybar=sol.y if sol is not None else np.zeros(model.n_sites),
        theta=sol.theta if sol is not None else np.zeros(model.n_clients),
        solution=sol,
        khat=master.saturation_khat(pool, sol) if sol is not None else {},
        iterations=rounds,
        separations=seps,
        time=time.perf_counter() - t0,
        converged=converged,
        basis=sol.basis if sol is not None else None,
        pool=pool,
        model=model,
    )


def _is_fractional(y: np.ndarray) -> bool:
    return bool(np.abs(y - np.round(y)).max(initial=0.0) > INTEGRALITY_TOL)


def phase2(
    inst: Instance,
    prep: Preprocessed,
    ph1: Phase1Result,
    params: Params,
    deadline: float | None = None,
    t_start: float | None = None,
) -> SolveResult:
    """Best-bound branch-and-cut over the master with lazy integer separation."""
    t0 = t_start if t_start is not None else time.perf_counter()
    deadline = deadline if deadline is not None else t0 + params.time_limit
    model, pool = ph1.model, ph1.pool
    incumbent = ph1.incumbent
    ub = float(ph1.ub1)
    lb_global = ph1.lb1
    separations = ph1.separations
    nodes_done = 0

    if ub - lb_global < ABS_GAP:
        return SolveResult(
            status="optimal", value=incumbent.value, lb=lb_global, ub=ub,
            gap=0.0, iterations=separations, nodes=0,
            t_phase1=ph1.time, t_total=time.perf_counter() - t0, incumbent=incumbent,
            lb1=ph1.lb1, ub1=ph1.ub1,
        )

    solver = SimplexSolver(model)
    root_lo = model.y_lo.copy()
    root_hi = model.y_hi.copy()

    seq = 0
    heap: list[tuple[float, int, int, Node]] = []
    heapq.heappush(heap, (ph1.lb1, 0, seq, Node(bound=ph1.lb1, depth=0)))
    timed_out = False

    while heap:
        bound, _, _, node = heapq.heappop(heap)
        if bound >= ub - ABS_GAP:
            lb_global = ub  # every remaining node proves no improvement
            break
        lb_global = max(lb_global, bound)
        if time.perf_counter() > deadline:
            timed_out = True
            break
        if len(heap) > params.node_limit:
            raise MemoryGuardExceeded(
                f"open-node guard {params.node_limit} exceeded", lb=lb_global, ub=ub,
            )

        lo, hi = root_lo.copy(), root_hi.copy()
        for j, v in node.fixings.items():
            lo[j] = hi[j] = float(v)
        solver.set_y_bounds(lo, hi)
        sol = solver.solve(warm=node.basis if node.basis is not None else None)
        nodes_done += 1
        if sol.status != "optimal":
            continue  # infeasible fixings: prune

        # lazy separation loop at integral candidates
        while True:
            if sol.objective >= ub - ABS_GAP:
                break
            if _is_fractional(sol.y):
                if params.frac_sep_phase2:
                    _, cuts = benders.separate(sol.y, sol.theta, prep)
                    separations += 1
                    if master.add_cuts(pool, model, cuts) > 0:
                        sol = solver.solve()
                        if sol.status != "optimal":
                            break
                        continue
                seq += 2
                _branch(heap, node, sol, seq)
                break

            open_sites = tuple(int(j) for j in np.flatnonzero(sol.y > 0.5))
            cand = heuristics.IntegerSolution(
                open_sites, heuristics.evaluate(open_sites, inst, prep)
            )
            if cand.value < ub:
                incumbent, ub = cand, float(cand.value)
                _progress("phase2", separations, lb_global, ub, nodes_done, t0)
            _, cuts = benders.separate(sol.y, sol.theta, prep)
            separations += 1
            if master.add_cuts(pool, model, cuts) == 0:
                break  # candidate costed exactly: subtree solved
            sol = solver.solve()
            if sol.status != "optimal":
                break

    if not heap and not timed_out:
        lb_global = ub

    status = "optimal" if ub - lb_global < ABS_GAP else "feasible"
    value = incumbent.value if incumbent is not None else None
    return SolveResult(
        status=status,
        value=value,
        lb=lb_global,
        ub=ub,
        gap=SolveResult._gap(lb_global, ub),
        iterations=separations,
        nodes=nodes_done,
        t_phase1=ph1.time,
        t_total=time.perf_counter() - t0,
        incumbent=incumbent,
        lb1=ph1.lb1,
        ub1=ph1.ub1,
    )


def _branch(heap, node: Node, sol, seq_base: int) -> None:
    """Split on the most fractional site, exploring the open side first."""
    frac = np.abs(sol.y - 0.5)
    j = int(np.argmin(frac))
    up = dict(node.fixings)
    up[j] = 1
    dn = dict(node.fixings)
    dn[j] = 0
    child_bound = max(node.bound, sol.objective)
    heapq.heappush(heap, (child_bound, -(node.depth + 1), seq_base - 1,
                          Node(child_bound, node.depth + 1, up, sol.basis)))
    heapq.heappush(heap, (child_bound, -(node.depth + 1), seq_base,
                          Node(child_bound, node.depth + 1, dn, sol.basis)))


def solve(inst: Instance, params: Params | None = None) -> SolveResult:
    """Full pipeline: preprocess, incumbent, phase 1, boundary surgery, phase 2."""
    params = params or Params()
    t0 = time.perf_counter()
    deadline = t0 + params.time_limit
    prep = preprocess(inst)

    if params.initial == "random":
        start = heuristics.random_solution(inst, prep, params.seed)
    else:
        start = heuristics.initial_solution(inst, prep, params.seed)

    ph1 = phase1(inst, prep, start, params, deadline=deadline)
    _progress("phase1", ph1.iterations, ph1.lb1, float(ph1.ub1), 0, t0)

    proven = ph1.converged and ph1.ub1 - ph1.lb1 < ABS_GAP
    if not proven and ph1.converged:
        if params.reduction and ph1.solution is not None:
            master.reduce_constraints(ph1.pool, ph1.model, ph1.solution)
        if params.rcfix and ph1.solution is not None:
            try:
                master.reduced_cost_fixing(ph1.lb1, float(ph1.ub1), ph1.solution, ph1.model)
            except master.FixingProvesOptimal:
                proven = True

    if proven:
        return SolveResult(
            status="optimal", value=ph1.incumbent.value, lb=float(ph1.incumbent.value),
            ub=float(ph1.incumbent.value), gap=0.0, iterations=ph1.separations,
            nodes=0, t_phase1=ph1.time, t_total=time.perf_counter() - t0,
            incumbent=ph1.incumbent, lb1=ph1.lb1, ub1=ph1.ub1,
        )

    result = phase2(inst, prep, ph1, params, deadline=deadline, t_start=t0)
    _progress("phase2", result.iterations, result.lb, result.ub, result.nodes, t0)
    return result
