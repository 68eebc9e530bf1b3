"""Cut pool and master-problem surgery between the two solve phases.

The pool owns every cut ever generated, keyed by (client, index), and keeps
the LP row list in lockstep: active pool entries are exactly the model rows.
At the phase boundary the pool drops the cuts made irrelevant by the final
fractional solution (everything above the highest saturated index per
client) and the reduced costs of that solution fix sites that provably
cannot change the incumbent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .benders import BendersCut
from .errors import PmedianError
from .heuristics import IntegerSolution
from .simplex import Basis, LpModel, LpSolution

SATURATION_TOL = 1e-6
FIXING_MARGIN = 1e-6


class FixingProvesOptimal(PmedianError):
    """Reduced-cost fixing left no room for an improving solution."""


@dataclass
class _Entry:
    cut: BendersCut
    active: bool
    row: int  # row index in the model while active, -1 otherwise


@dataclass
class CutPool:
    """All cuts ever generated, with at most one entry per (client, index)."""

    by_client: dict[int, dict[int, _Entry]] = field(default_factory=dict)

    def total(self) -> int:
        return sum(len(d) for d in self.by_client.values())

    def n_active(self) -> int:
        return sum(1 for d in self.by_client.values() for e in d.values() if e.active)

    def entries(self):
        for d in self.by_client.values():
            yield from d.values()

    def all_cuts(self) -> list[BendersCut]:
        return [e.cut for e in self.entries()]

    def dump(self) -> str:
        lines = []
        for client in sorted(self.by_client):
            for kt in sorted(self.by_client[client]):
                e = self.by_client[client][kt]
                flag = "on " if e.active else "off"
                lines.append(
                    f"{flag} client={client} k={kt} rhs={e.cut.rhs} support={len(e.cut.sites)}"
                )
        return "\n".join(lines)


def add_cuts(pool: CutPool, model: LpModel, cuts: list[BendersCut]) -> int:
    """Append new or reactivated cuts to the model; duplicates are skipped.

    Returns the number of rows actually added.
    """
    added = 0
    for cut in cuts:
        entries = pool.by_client.setdefault(cut.client, {})
        entry = entries.get(cut.ktilde)
        if entry is not None and entry.active:
            continue
        row = model.add_row(cut.client, cut.sites, cut.coeffs.astype(np.float64), cut.rhs)
        if entry is None:
            entries[cut.ktilde] = _Entry(cut=cut, active=True, row=row)
        else:
            entry.active = True
            entry.row = row
        added += 1
    return added


def saturation_khat(pool: CutPool, sol: LpSolution, tol: float = SATURATION_TOL) -> dict[int, int]:
    """Highest cut index per client saturated by the LP solution.

    Clients whose active cuts are all slack do not appear in the map.
    """
    khat: dict[int, int] = {}
    for client, entries in pool.by_client.items():
        for kt, e in entries.items():
            if not e.active:
                continue
            slack = sol.theta[client] - e.cut.value_at(sol.y)
            if abs(slack) <= tol:
                if client not in khat or kt > khat[client]:
                    khat[client] = kt
    return khat


def reduce_constraints(pool: CutPool, model: LpModel, sol: LpSolution) -> int:
    """Drop cuts above each client's highest saturated index.

    A client with no saturated cut keeps only its lowest-index cut (a safe
    anchor so its theta stays bounded by real information).  Deactivated
    cuts stay in the pool for possible reactivation.  Returns the number of
    rows removed.
    """
    khat = saturation_khat(pool, sol)
    drop_rows: list[int] = []
    for client, entries in pool.by_client.items():
        active = [kt for kt, e in entries.items() if e.active]
        if not active:
            continue
        cutoff = khat.get(client)
        if cutoff is None:
            keep = {min(active)}
        else:
            keep = {kt for kt in active if kt <= cutoff}
        for kt in active:
            if kt not in keep:
                e = entries[kt]
                drop_rows.append(e.row)
                e.active = False
                e.row = -1

    if not drop_rows:
        return 0
    dropped = set(drop_rows)
    # model rows compact; remap surviving row indices
    new_index = {}
    nxt = 0
    for r in range(len(model.rows)):
        if r not in dropped:
            new_index[r] = nxt
            nxt += 1
    model.remove_rows(drop_rows)
    for e in pool.entries():
        if e.active:
            e.row = new_index[e.row]
    return len(drop_rows)


def reduced_cost_fixing(
    lb1: float,
    ub1: float,
    sol: LpSolution,
    model: LpModel,
    margin: float = FIXING_MARGIN,
) -> tuple[list[int], list[int]]:
    """Fix sites whose reduced cost pushes any change past the incumbent.

    A site at its lower bound with lb1 + rc > ub1 can never open in an
    improving solution; one at its upper bound with lb1 - rc > ub1 can never
    close.  Bounds are applied to the model in place.  Raises
    :class:`FixingProvesOptimal` when the fixings leave fewer than p
    openable sites (the incumbent is then optimal).
    """
    rc = sol.reduced_costs[: model.n_sites]
    y = sol.y
    fixed0: list[int] = []
    fixed1: list[int] = []
    for j in range(model.n_sites):
        if model.y_lo[j] == model.y_hi[j]:
            continue  # already fixed
        at_lo = abs(y[j] - model.y_lo[j]) <= 1e-9
        at_up = abs(y[j] - model.y_hi[j]) <= 1e-9
        if at_lo and rc[j] > 0 and lb1 + rc[j] > ub1 + margin:
            fixed0.append(j)
        elif at_up and rc[j] < 0 and lb1 - rc[j] > ub1 + margin:
            fixed1.append(j)
    for j in fixed0:
        model.y_hi[j] = model.y_lo[j]
    for j in fixed1:
        model.y_lo[j] = model.y_hi[j]
    open_capacity = int((model.y_hi > 0.5).sum())
    forced_open = int((model.y_lo > 0.5).sum())
    if forced_open > model.p or open_capacity < model.p:
        raise FixingProvesOptimal(
            f"fixing {len(fixed1)} open / {len(fixed0)} closed leaves no feasible "
            f"improvement over the incumbent"
        )
    return fixed0, fixed1


@dataclass
class Phase1Result:
    """Everything the tree search needs from the cutting-plane phase."""

    lb1: float
    ub1: int
    incumbent: IntegerSolution
    ybar: np.ndarray
    theta: np.ndarray
    solution: LpSolution
    khat: dict[int, int]
    iterations: int
    separations: int
    time: float
    converged: bool
    basis: Basis | None
    pool: CutPool
    model: LpModel
