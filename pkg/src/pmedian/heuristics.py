"""Incumbent construction: greedy + vertex substitution, and LP rounding.

The exact solver only needs these for speed, never for correctness, so the
emphasis is on determinism and exact integer evaluation.  The substitution
step is a first-improvement interchange over a fixed scan order with the
classic closest/second-closest bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Instance, Preprocessed


@dataclass(frozen=True)
class IntegerSolution:
    """Exactly p open sites plus the exact integer objective."""

    open_sites: tuple[int, ...]
    value: int

    def as_y(self, n_sites: int) -> np.ndarray:
        y = np.zeros(n_sites)
        y[list(self.open_sites)] = 1.0
        return y


def evaluate(open_sites, inst: Instance, prep: Preprocessed | None = None) -> int:
    """Exact integer objective of a feasible open-site set."""
    sites = sorted(int(j) for j in open_sites)
    if len(set(sites)) != inst.p:
        raise ValueError(f"need exactly p={inst.p} distinct sites, got {len(set(sites))}")
    return int(inst.dist[:, sites].min(axis=1).sum())


def _closest_two(dist: np.ndarray, open_list: np.ndarray):
    """Per client: nearest open site (index into open_list) and the two best distances."""
    sub = dist[:, open_list]
    if len(open_list) == 1:
        first = np.zeros(len(dist), dtype=np.int64)
        return first, sub[:, 0].copy(), np.full(len(dist), np.iinfo(np.int64).max)
    part = np.argpartition(sub, 1, axis=1)
    rows = np.arange(len(dist))
    a, b = part[:, 0], part[:, 1]
    da, db = sub[rows, a], sub[rows, b]
    swap = (db < da) | ((db == da) & (b < a))
    first = np.where(swap, b, a)
    d1 = np.where(swap, db, da)
    d2 = np.where(swap, da, db)
    return first, d1, d2


def greedy(inst: Instance) -> list[int]:
    """Open sites one by one, each time the one that shrinks the total most."""
    dist = inst.dist
    chosen: list[int] = []
    cur = None
    for _ in range(inst.p):
        if cur is None:
            totals = dist.sum(axis=0)
        else:
            totals = np.minimum(dist, cur[:, None]).sum(axis=0)
        totals[chosen] = np.iinfo(np.int64).max
        j = int(np.argmin(totals))
        chosen.append(j)
        cur = dist[:, j].copy() if cur is None else np.minimum(cur, dist[:, j])
    return chosen


def interchange(inst: Instance, open_list: list[int], max_swaps: int | None = None) -> list[int]:
    """First-improvement swap search (open one site, close another).

    Scans candidate entering sites in index order; for each, the best
    leaving site is computed in one vectorized pass.  Stops at a local
    optimum or after the swap budget (default 10*M accepted swaps).
    """
    dist = inst.dist
    m = inst.n_sites
    p = inst.p
    if p == m:
        return sorted(open_list)
    budget = 10 * m if max_swaps is None else max_swaps
    open_arr = np.array(sorted(open_list), dtype=np.int64)
    swaps = 0
    improved = True
    while improved and swaps < budget:
        improved = False
        first, d1, d2 = _closest_two(dist, open_arr)
        total = int(d1.sum())
        is_open = np.zeros(m, dtype=bool)
        is_open[open_arr] = True
        for j_in in range(m):
            if is_open[j_in]:
                continue
            din = dist[:, j_in]
            w = np.minimum(d1, din)             # after opening j_in
            base = int(w.sum())
            # removing site t: clients served by t fall back to min(d2, din)
            fallback = np.minimum(d2, din) - w
            corr = np.bincount(first, weights=fallback.astype(np.float64), minlength=p)
            best_t = int(np.argmin(corr))
            new_total = base + int(round(corr[best_t]))
            if new_total < total:
                open_arr[best_t] = j_in
                open_arr.sort()
                swaps += 1
                improved = True
                break
    return [int(j) for j in open_arr]


def initial_solution(inst: Instance, prep: Preprocessed, seed: int = 0) -> IntegerSolution:
    """Greedy construction refined by vertex substitution."""
    sites = interchange(inst, greedy(inst))
    return IntegerSolution(tuple(sites), evaluate(sites, inst, prep))


def random_solution(inst: Instance, prep: Preprocessed, seed: int = 0) -> IntegerSolution:
    """Uniform random feasible solution (for very large runs where even the
    greedy pass is too slow)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    sites = sorted(int(j) for j in rng.choice(inst.n_sites, size=inst.p, replace=False))
    return IntegerSolution(tuple(sites), evaluate(sites, inst, prep))


def round_solution(ybar: np.ndarray, inst: Instance, prep: Preprocessed) -> IntegerSolution:
    """Open the p sites with the largest fractional values (ties: lowest index)."""
    order = np.argsort(-np.asarray(ybar), kind="stable")
    sites = sorted(int(j) for j in order[: inst.p])
    return IntegerSolution(tuple(sites), evaluate(sites, inst, prep))
