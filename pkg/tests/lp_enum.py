"""Exhaustive LP oracle for tiny master models: enumerate every basic solution.

The master LP in equality form has columns y (two finite bounds), theta
(lower bound 0 only) and one logical per row (the cardinality logical is
fixed at 0, cut surpluses have upper bound 0 only).  A basic solution picks
a square column subset and parks each remaining column at one of its finite
bounds, so the only branching is over the nonbasic y's.  Feasible basic
solutions cover all vertices; the minimum objective over them is the LP
optimum whenever the LP is feasible and bounded (always true here).
"""

from itertools import combinations, product

import numpy as np


def brute_force_lp(model):
    """Returns the optimal objective or None when infeasible."""
    msites, nclients = model.n_sites, model.n_clients
    rows = model.rows
    m = 1 + len(rows)
    ncols = msites + nclients + m

    A = np.zeros((m, ncols))
    b = np.zeros(m)
    A[0, :msites] = 1.0
    b[0] = model.p
    for r, row in enumerate(rows, start=1):
        A[r, row.sites] = row.coeffs
        A[r, msites + row.client] = 1.0
        A[r, msites + nclients + r] = 1.0
        b[r] = row.rhs
    A[0, msites + nclients] = 1.0

    lo = np.concatenate([model.y_lo, np.zeros(nclients), np.zeros(m)])
    hi = np.concatenate([model.y_hi, np.full(nclients, np.inf), np.zeros(m)])
    hi[msites + nclients] = 0.0
    lo[msites + nclients + 1:] = -np.inf

    c = np.zeros(ncols)
    c[msites:msites + nclients] = 1.0

    best = None
    for basis in combinations(range(ncols), m):
        B = A[:, basis]
        if abs(np.linalg.det(B)) < 1e-9:
            continue
        nonbasic = [j for j in range(ncols) if j not in basis]
        free_y = [j for j in nonbasic if j < msites and hi[j] > lo[j]]
        rest = [j for j in nonbasic if j not in free_y]
        for pattern in product((0, 1), repeat=len(free_y)):
            x = np.zeros(ncols)
            for j in rest:
                x[j] = lo[j] if np.isfinite(lo[j]) else hi[j]
            for j, bit in zip(free_y, pattern):
                x[j] = hi[j] if bit else lo[j]
            rhs = b - A[:, nonbasic] @ x[nonbasic]
            xb = np.linalg.solve(B, rhs)
            x[list(basis)] = xb
            if (x >= lo - 1e-7).all() and (x <= hi + 1e-7).all():
                val = float(c @ x)
                if best is None or val < best:
                    best = val
    return best
