"""Independent ground truth for tests and acceptance runs.

Nothing here shares a code path with the production solver beyond the raw
instance data (and, for the full compact-model bound, the LP engine fed
with explicitly materialized rows).  The enumerator answers "what is the
true optimum", the naive index scan re-reads the defining maximum directly,
and the substitution evaluator recomputes subproblem optima from the
primal closed form term by term.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import GuardExceeded
from .instance import Instance, Preprocessed
from .simplex import LpModel, lp_solve

ENUM_GUARD = 10_000_000
F4_ROW_GUARD = 50_000


@dataclass
class OracleResult:
    optimum: int
    best_open: tuple[int, ...]
    n_optimal: int


def enumerate_opt(inst: Instance) -> OracleResult:
    """Exact optimum by enumerating every p-subset of sites.

    Lexicographic depth-first enumeration; each level refines the running
    per-client minimum so a leaf costs one O(N) reduction instead of a full
    re-evaluation.
    """
    n, m, p = inst.n_clients, inst.n_sites, inst.p
    if comb(m, p) > ENUM_GUARD:
        raise GuardExceeded(
            f"C({m},{p}) = {comb(m, p)} subsets exceed the enumeration guard {ENUM_GUARD}"
        )
    dist = inst.dist
    big = dist.max() + 1
    best = np.iinfo(np.int64).max
    best_open: tuple[int, ...] = ()
    n_optimal = 0
    chosen: list[int] = []

    mins_stack = [np.full(n, big, dtype=np.int64)]

    def recurse(start: int) -> None:
        nonlocal best, best_open, n_optimal
        depth = len(chosen)
        if depth == p:
            value = int(mins_stack[-1].sum())
            if value < best:
                best = value
                best_open = tuple(chosen)
                n_optimal = 1
            elif value == best:
                n_optimal += 1
            return
        for j in range(start, m - (p - depth) + 1):
            chosen.append(j)
            mins_stack.append(np.minimum(mins_stack[-1], dist[:, j]))
            recurse(j + 1)
            mins_stack.pop()
            chosen.pop()

    recurse(0)
    return OracleResult(optimum=int(best), best_open=best_open, n_optimal=n_optimal)


def naive_ktilde(i: int, ybar: np.ndarray, inst: Instance, tol: float = 1e-9) -> int:
    """The defining index read literally: check every distinct radius.

    First branch: mass exactly at the nearest distinct distance already >= 1.
    Otherwise the largest 1-based index whose radius still holds mass < 1.
    Works from the raw distance row; shares nothing with the fast scan.
    """
    row = inst.dist[i]
    dvals = np.unique(row)
    first_mass = float(ybar[row == dvals[0]].sum())
    if first_mass >= 1.0 - tol:
        return 0
    best = 0
    for t in range(len(dvals)):
        mass = float(ybar[row <= dvals[t]].sum())
        if 1.0 - mass > tol:
            best = t + 1  # the defining maximum ranges over 1-based indices
    return best


def sp_lp_value(i: int, ybar: np.ndarray, inst: Instance) -> float:
    """Subproblem optimum by direct substitution of the primal closed form.

    Sums (D_{t+1} - D_t) * max(0, 1 - mass within D_t) term by term with a
    plain per-term scan over sites; deliberately unoptimized.
    """
    row = inst.dist[i]
    dvals = np.unique(row).astype(np.float64)
    total = dvals[0]
    for t in range(len(dvals) - 1):
        mass = float(ybar[row <= dvals[t]].sum())
        total += (dvals[t + 1] - dvals[t]) * max(0.0, 1.0 - mass)
    return float(total)


def full_f4_model(inst: Instance, prep: Preprocessed) -> LpModel:
    """Master LP with every possible optimality cut materialized.

    Rows are generated for every client and every distinct-distance index
    ``t = 0 .. K_i - 1`` as ``theta_i >= D_t - sum_{d_ij < D_t} (D_t - d_ij) y_j``
    (the ``t = 0`` row is plain ``theta_i >= D_i^1``); the index that would
    reference a distance past the last distinct value is meaningless and is
    not emitted.
    """
    total = prep.total_distinct
    if total > F4_ROW_GUARD:
        raise GuardExceeded(
            f"K = {total} rows exceed the full-model guard {F4_ROW_GUARD}"
        )
    model = LpModel.empty(inst.n_sites, inst.n_clients, inst.p)
    for i in range(inst.n_clients):
        dvals = prep.distinct(i)
        counts = prep.n_within(i)
        for t in range(len(dvals)):
            rhs = float(dvals[t])
            if t == 0:
                sites = np.empty(0, dtype=np.int64)
                coeffs = np.empty(0, dtype=np.float64)
            else:
                n_in = int(counts[t - 1])
                sites = prep.order[i, :n_in].astype(np.int64)
                coeffs = (rhs - prep.sorted_dist[i, :n_in]).astype(np.float64)
            model.add_row(i, sites, coeffs, rhs)
    return model


def full_f4_lp_value(inst: Instance, prep: Preprocessed) -> float:
    """LP relaxation value of the compact model with all rows present."""
    sol = lp_solve(full_f4_model(inst, prep))
    if sol.status != "optimal":
        raise RuntimeError(f"full compact model LP ended {sol.status}")
    return sol.objective
