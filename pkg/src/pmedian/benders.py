"""Closed-form cut machinery for the p-median master problem.

For a candidate site vector ``ybar`` the per-client subproblem (what is the
assignment distance of client ``i`` given this fractional opening?) has a
closed-form optimum.  Everything hinges on one index per client, ``ktilde``:
the last distinct-distance rank at which the accumulated open-site mass
within that radius is still below one.  From it we get

* the subproblem optimal value,
* an explicit optimal primal/dual pair (used only for self-checks), and
* the optimality cut  ``theta_i >= R - sum_{j: d_ij < R} (R - d_ij) y_j``
  with ``R`` the next distinct distance, which is valid for every feasible
  integer solution and tight at ``ybar``.

:func:`separate` evaluates all clients in one vectorized pass (O(N*M)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .instance import Preprocessed

# Residual 1 - sum(ybar) counts as positive only above this.
MASS_TOL = 1e-9
# A cut is emitted when theta underestimates the subproblem value by more
# than this absolute slack plus a relative term on the cut rhs.
VIOLATION_ABS = 1e-9
VIOLATION_REL = 1e-12


@dataclass(frozen=True)
class BendersCut:
    """One optimality cut: ``theta_client >= rhs - sum(coeff[j] * y[j])``.

    ``sites``/``coeffs`` list the sites strictly closer than ``rhs`` with
    their positive coefficients ``rhs - d``; ``ktilde`` identifies the cut
    within the client's finite cut family.
    """

    client: int
    ktilde: int
    rhs: int
    sites: np.ndarray   # int32 site indices
    coeffs: np.ndarray  # int64, strictly positive

    def value_at(self, y: np.ndarray) -> float:
        """Right-hand side of the cut evaluated at a site vector."""
        return float(self.rhs) - float(self.coeffs @ y[self.sites])

    def format(self) -> str:
        terms = " - ".join(
            f"{int(c)} y{int(j)}" for j, c in zip(self.sites, self.coeffs)
        )
        body = f"{self.rhs}" + (f" - {terms}" if terms else "")
        return f"theta{self.client} >= {body}"


def compute_ktilde(i: int, ybar: np.ndarray, prep: Preprocessed) -> int:
    """Index of the last distinct distance whose radius holds mass < 1.

    Returns 0 when the nearest distinct distance already accumulates mass
    at least one.  Single left-to-right scan of the client's site order,
    stopping as soon as the accumulated mass reaches one.
    """
    order = prep.order[i]
    sorted_rank = prep.sorted_rank[i]
    m = prep.n_sites
    acc = 0.0
    r = 0
    while r < m:
        acc += ybar[order[r]]
        if acc >= 1.0 - MASS_TOL:
            return int(sorted_rank[r])
        r += 1
    raise ContractViolation(
        f"client {i}: total site mass {acc:.12g} < 1; the optimality cut is undefined"
    )


def subproblem_value(i: int, ktilde: int, ybar: np.ndarray, prep: Preprocessed) -> float:
    """Closed-form optimum of client ``i``'s subproblem at ``ybar``.

    ``R - sum_{j: d_ij < R} (R - d_ij) ybar_j`` with ``R`` the distinct
    distance at index ``ktilde``; for binary ``ybar`` this is exactly the
    distance to the nearest open site.
    """
    dvals = prep.distinct(i)
    r_val = float(dvals[ktilde])
    if ktilde == 0:
        return r_val
    n_in = int(prep.n_within(i)[ktilde - 1])
    sites = prep.order[i, :n_in]
    dists = prep.sorted_dist[i, :n_in]
    return r_val - float(((r_val - dists) * ybar[sites]).sum())


def build_cut(i: int, ktilde: int, prep: Preprocessed) -> BendersCut:
    """Materialize the optimality cut of client ``i`` at index ``ktilde``."""
    k_i = int(prep.K[i])
    if not 0 <= ktilde < k_i:
        raise IndexError(f"ktilde={ktilde} outside [0, {k_i}) for client {i}")
    rhs = int(prep.distinct(i)[ktilde])
    if ktilde == 0:
        sites = np.empty(0, dtype=np.int32)
        coeffs = np.empty(0, dtype=np.int64)
    else:
        n_in = int(prep.n_within(i)[ktilde - 1])
        sites = prep.order[i, :n_in].copy()
        coeffs = rhs - prep.sorted_dist[i, :n_in]
    return BendersCut(client=i, ktilde=int(ktilde), rhs=rhs, sites=sites, coeffs=coeffs)


def ktilde_all(ybar: np.ndarray, prep: Preprocessed) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``(ktilde, subproblem value)`` for every client at once."""
    mass = np.take(ybar, prep.order)          # (N, M) gather along site order
    acc = np.cumsum(mass, axis=1)
    first = (acc < 1.0 - MASS_TOL).sum(axis=1)  # first position with mass >= 1
    if (first >= prep.n_sites).any():
        bad = int(np.argmax(first >= prep.n_sites))
        raise ContractViolation(
            f"client {bad}: total site mass {acc[bad, -1]:.12g} < 1; "
            "the optimality cut is undefined"
        )
    ktilde = prep.sorted_rank[np.arange(prep.n_clients), first].astype(np.int64)

    rvals = prep.dvals[prep.offs[:-1] + ktilde].astype(np.float64)
    closer = prep.sorted_rank < ktilde[:, None]
    contrib = (rvals[:, None] - prep.sorted_dist) * mass
    values = rvals - np.where(closer, contrib, 0.0).sum(axis=1)
    return ktilde, values


def separate(
    ybar: np.ndarray,
    thetabar: np.ndarray,
    prep: Preprocessed,
) -> tuple[float, list[BendersCut]]:
    """One separation round: subproblem values for all clients plus cuts.

    Returns the total subproblem value (an upper bound on the master optimum
    at ``ybar``) and one cut per client whose ``theta`` underestimates its
    subproblem value.
    """
    ktilde, values = ktilde_all(ybar, prep)
    ub = float(values.sum())
    rvals = prep.dvals[prep.offs[:-1] + ktilde]
    threshold = VIOLATION_ABS + VIOLATION_REL * np.abs(rvals)
    violated = np.nonzero(values - thetabar > threshold)[0]
    cuts = [build_cut(int(i), int(ktilde[i]), prep) for i in violated]
    return ub, cuts


@dataclass
class SubproblemEval:
    """Primal/dual pair of one subproblem, materialized for verification."""

    client: int
    ktilde: int
    value: float
    z: np.ndarray
    v: np.ndarray


def dual_check(
    i: int, ktilde: int, ybar: np.ndarray, prep: Preprocessed
) -> tuple[float, float]:
    """Evaluate the explicit primal and dual optima independently.

    The primal substitutes ``z_t = max(0, 1 - mass within distance t)`` into
    the subproblem objective; the dual substitutes ``v_t = R - D_t`` (zero
    past ``ktilde``) into the dual objective.  Both must agree; the
    constructed dual is also asserted feasible.
    """
    ev = materialize_eval(i, ktilde, ybar, prep)
    dvals = prep.distinct(i).astype(np.float64)
    k_i = len(dvals)

    primal = dvals[0]
    if k_i > 1:
        primal += float(((dvals[1:] - dvals[:-1]) * ev.z[:-1]).sum())

    # Dual feasibility: v >= 0 and v_t - v_{t+1} <= D_{t+1} - D_t.
    v = ev.v
    if (v < 0).any() or (k_i > 1 and (v[:-1] - v[1:] > dvals[1:] - dvals[:-1] + 1e-12).any()):
        raise AssertionError(f"constructed dual solution infeasible for client {i}")

    # Dual objective: D_1 + v_1 (1 - mass at D_1) - sum_{t>=1} v_t * mass at D_t.
    mass_eq = np.zeros(k_i)
    np.add.at(mass_eq, prep.rank[i].astype(np.int64), ybar)
    dual = dvals[0] + v[0] * (1.0 - mass_eq[0]) - float((v[1:] * mass_eq[1:]).sum())
    return primal, dual


def materialize_eval(
    i: int, ktilde: int, ybar: np.ndarray, prep: Preprocessed
) -> SubproblemEval:
    """Explicit optimal primal ``z`` and dual ``v`` vectors of one subproblem."""
    k_i = int(prep.K[i])
    mass_eq = np.zeros(k_i)
    np.add.at(mass_eq, prep.rank[i].astype(np.int64), ybar)
    within = np.cumsum(mass_eq)
    z = np.maximum(0.0, 1.0 - within)

    dvals = prep.distinct(i).astype(np.float64)
    v = np.zeros(k_i)
    v[:ktilde] = dvals[ktilde] - dvals[:ktilde]
    value = subproblem_value(i, ktilde, ybar, prep)
    return SubproblemEval(client=i, ktilde=ktilde, value=value, z=z, v=v)


def dump_cuts(cuts: list[BendersCut]) -> str:
    """Textual dump of a cut list, one inequality per line, for diffing."""
    return "\n".join(c.format() for c in cuts)
