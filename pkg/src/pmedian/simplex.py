"""Bounded-variable revised simplex for the cut master problem.

The model class is narrow: minimize the sum of per-client ``theta``
variables subject to one cardinality equality ``sum(y) = p`` and a growing
set of cut rows ``theta_i + sum(c_j y_j) >= rhs`` with positive
coefficients.  Internally every row carries a logical variable, so the
all-logical basis is always dual feasible for this cost structure and both
cold starts and warm re-solves (after adding rows or tightening bounds) run
through the dual simplex; the primal simplex with Dantzig pricing and a
Bland anti-cycling fallback handles the remaining polish.

The factorization is a sparse LU of the basis refreshed periodically, with
product-form eta updates between refreshes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import PmedianError, SimplexError

PRIMAL_TOL = 1e-7   # bound feasibility
DUAL_TOL = 1e-7     # reduced-cost feasibility
PIVOT_TOL = 1e-9    # smallest acceptable pivot magnitude
REFRESH_EVERY = 96      # eta updates between refactorizations
PERTURB_AFTER = 40      # degenerate dual steps before cost perturbation kicks in
BLAND_AFTER = 400       # consecutive degenerate steps before Bland's rule

BASIC, AT_LO, AT_UP = 0, 1, 2

INF = float("inf")


class FixContradiction(PmedianError):
    """Requested variable fix conflicts with an existing opposite fix."""


@dataclass(frozen=True)
class CutRow:
    """One master row  theta_client + sum(coeffs * y[sites]) >= rhs."""

    client: int
    sites: np.ndarray
    coeffs: np.ndarray
    rhs: float


@dataclass
class LpModel:
    """Master LP data: y bounds, the cardinality constraint, and cut rows.

    ``rows`` is shared between bound-variants of the same model (branching
    copies bounds only); appending a row is therefore visible to every
    variant, which matches the globally-valid-cut semantics of the driver.
    """

    n_sites: int
    n_clients: int
    p: int
    y_lo: np.ndarray
    y_hi: np.ndarray
    rows: list[CutRow] = field(default_factory=list)

    @staticmethod
    def empty(n_sites: int, n_clients: int, p: int) -> "LpModel":
        return LpModel(
            n_sites=n_sites,
            n_clients=n_clients,
            p=p,
            y_lo=np.zeros(n_sites),
            y_hi=np.ones(n_sites),
        )

    def add_row(self, client: int, sites: np.ndarray, coeffs: np.ndarray, rhs: float) -> int:
        self.rows.append(
            CutRow(
                client=int(client),
                sites=np.asarray(sites, dtype=np.int64),
                coeffs=np.asarray(coeffs, dtype=np.float64),
                rhs=float(rhs),
            )
        )
        return len(self.rows) - 1

    def remove_rows(self, indices) -> None:
        drop = set(int(r) for r in indices)
        kept = [row for r, row in enumerate(self.rows) if r not in drop]
        self.rows.clear()
        self.rows.extend(kept)

    def copy_bounds(self) -> "LpModel":
        """Bound-variant sharing the row list (cheap branching copy)."""
        return LpModel(
            n_sites=self.n_sites,
            n_clients=self.n_clients,
            p=self.p,
            y_lo=self.y_lo.copy(),
            y_hi=self.y_hi.copy(),
            rows=self.rows,
        )


def fix_variable(model: LpModel, j: int, value: int) -> LpModel:
    """Copy-on-write fix of ``y_j`` to 0 or 1; the parent model is untouched."""
    if value not in (0, 1):
        raise ValueError(f"can only fix to 0 or 1, got {value}")
    if not (model.y_lo[j] - 1e-12 <= value <= model.y_hi[j] + 1e-12):
        raise FixContradiction(
            f"y_{j} already fixed to [{model.y_lo[j]}, {model.y_hi[j]}], cannot set {value}"
        )
    out = model.copy_bounds()
    out.y_lo[j] = out.y_hi[j] = float(value)
    return out


@dataclass
class Basis:
    """Warm-start descriptor: basic column per row plus nonbasic bound tags."""

    basic: np.ndarray  # (m,) int64 column indices
    vstat: np.ndarray  # (ncols,) int8 status codes


@dataclass
class LpSolution:
    status: str                 # "optimal" | "infeasible"
    y: np.ndarray
    theta: np.ndarray
    objective: float
    duals: np.ndarray           # one multiplier per row (row 0 = cardinality)
    reduced_costs: np.ndarray   # structural variables: y then theta
    basis: Basis | None
    iterations: int = 0
    pivots: int = 0


class SimplexSolver:
    """Revised simplex bound to one :class:`LpModel`.

    Columns are ordered y (0..M-1), theta (M..M+N-1), then one logical per
    row.  The solver stays usable across row additions and bound changes,
    re-using the previous basis.
    """

    def __init__(self, model: LpModel):
        self.model = model
        self.m = 0
        self.iterations = 0
        self.pivots = 0
        self._build(len(model.rows))
        self._cold_basis()

    # -- structure -----------------------------------------------------

    def _build(self, n_rows: int) -> None:
        model = self.model
        msites, nclients = model.n_sites, model.n_clients
        self.n_rows_synced = n_rows
        m = 1 + n_rows
        ncols = msites + nclients + m
        self.m = m
        self.ncols = ncols
        self.struct = msites + nclients

        data, ri, ci = [np.ones(msites)], [np.zeros(msites, dtype=np.int64)], [np.arange(msites, dtype=np.int64)]
        b = np.empty(m)
        b[0] = float(model.p)
        for r, row in enumerate(model.rows[:n_rows], start=1):
            k = len(row.sites)
            data.append(row.coeffs)
            ri.append(np.full(k, r, dtype=np.int64))
            ci.append(row.sites.astype(np.int64))
            data.append(np.ones(1))
            ri.append(np.array([r], dtype=np.int64))
            ci.append(np.array([msites + row.client], dtype=np.int64))
            b[r] = row.rhs
        # logicals: +1 on the diagonal block
        data.append(np.ones(m))
        ri.append(np.arange(m, dtype=np.int64))
        ci.append(self.struct + np.arange(m, dtype=np.int64))

        A = sp.csc_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
            shape=(m, ncols),
        )
        # row equilibration: cut coefficients grow with the distance scale,
        # and pivot tolerances only make sense on O(1) entries
        row_max = np.abs(A).max(axis=1).toarray().ravel()
        scale = 1.0 / np.maximum(row_max, 1.0)
        self.row_scale = scale
        self.A = (sp.diags(scale) @ A).tocsc()
        self.AT = self.A.T.tocsr()
        self.b = b * scale

        self.c = np.zeros(ncols)
        self.c[msites:msites + nclients] = 1.0
        # Deterministic cost perturbation used during dual pivoting: the y
        # costs are all zero, which leaves the dual simplex fully degenerate
        # without it.  The true costs are restored for the final polish.
        mix = (np.arange(msites, dtype=np.float64) * 2654435761.0) % 97.0
        self.c_pert = self.c.copy()
        self.c_pert[:msites] += 1e-6 * (1.0 + mix / 97.0)
        self.perturbed = False

        self.lo = np.empty(ncols)
        self.hi = np.empty(ncols)
        self.lo[:msites] = model.y_lo
        self.hi[:msites] = model.y_hi
        self.lo[msites:self.struct] = 0.0
        self.hi[msites:self.struct] = INF
        self.lo[self.struct] = 0.0       # equality logical fixed at 0
        self.hi[self.struct] = 0.0
        self.lo[self.struct + 1:] = -INF  # >= rows: surplus logical <= 0
        self.hi[self.struct + 1:] = 0.0

    def sync_rows(self) -> None:
        """Absorb rows appended to the model since the last build."""
        n_rows = len(self.model.rows)
        if n_rows == self.n_rows_synced:
            return
        if n_rows < self.n_rows_synced:  # rows were removed: restart cold
            self._build(n_rows)
            self._cold_basis()
            return
        old_basic = self.basic.copy() if hasattr(self, "basic") else None
        old_vstat = self.vstat.copy() if hasattr(self, "vstat") else None
        old_struct, old_m = self.struct, self.m
        self._build(n_rows)
        if old_basic is None:
            self._cold_basis()
            return
        # logical ids are stable (struct count unchanged); new logicals basic
        self.basic = np.concatenate(
            [old_basic, self.struct + np.arange(old_m, self.m, dtype=np.int64)]
        )
        vstat = np.full(self.ncols, AT_LO, dtype=np.int8)
        vstat[:old_struct + old_m] = old_vstat
        vstat[self.basic] = BASIC
        self.vstat = vstat
        self._invalidate()

    def set_y_bounds(self, y_lo: np.ndarray, y_hi: np.ndarray) -> None:
        # the basis matrix is untouched, so the factorization stays valid
        self.model.y_lo = np.asarray(y_lo, dtype=np.float64)
        self.model.y_hi = np.asarray(y_hi, dtype=np.float64)
        self.lo[:self.model.n_sites] = self.model.y_lo
        self.hi[:self.model.n_sites] = self.model.y_hi

    # -- basis & factorization ------------------------------------------

    def _cold_basis(self) -> None:
        self.basic = self.struct + np.arange(self.m, dtype=np.int64)
        vstat = np.full(self.ncols, AT_LO, dtype=np.int8)
        vstat[self.basic] = BASIC
        self.vstat = vstat
        self._invalidate()

    def load_basis(self, basis: Basis) -> None:
        """Install a warm-start basis.

        A basis recorded before additional rows were appended is accepted:
        the logicals of the newer rows join it as basic variables (their
        column ids are stable).
        """
        nb = len(basis.basic)
        if nb > self.m or len(basis.vstat) != self.struct + nb:
            raise ValueError("warm-start basis dimensions do not match the model")
        if nb == self.m:
            self.basic = basis.basic.copy()
            self.vstat = basis.vstat.copy()
        else:
            self.basic = np.concatenate(
                [basis.basic, self.struct + np.arange(nb, self.m, dtype=np.int64)]
            )
            vstat = np.full(self.ncols, AT_LO, dtype=np.int8)
            vstat[: self.struct + nb] = basis.vstat
            vstat[self.basic] = BASIC
            self.vstat = vstat
        self._invalidate()

    def _invalidate(self) -> None:
        self._lu = None
        self._etas: list[tuple[int, np.ndarray]] = []

    def _factorize(self) -> None:
        B = self.A[:, self.basic]
        try:
            self._lu = spla.splu(B.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:  # singular basis: fall back to logicals
            raise SimplexError(f"basis factorization failed: {exc}", self.iterations)
        self._etas = []

    def _ftran(self, v: np.ndarray) -> np.ndarray:
        x = self._lu.solve(v)
        for t, eta in self._etas:
            xt = x[t]
            if xt != 0.0:
                x += eta * xt
                x[t] = eta[t] * xt
        return x

    def _btran(self, v: np.ndarray) -> np.ndarray:
        x = v.copy()
        for t, eta in reversed(self._etas):
            x[t] = eta @ x
        return self._lu.solve(x, trans="T")

    def _push_eta(self, t: int, w: np.ndarray) -> None:
        # Basis column t replaced by a column with ftran image w.
        eta = -w / w[t]
        eta[t] = 1.0 / w[t]
        self._etas.append((t, eta))

    def _nonbasic_values(self) -> np.ndarray:
        x = np.where(self.vstat == AT_UP, self.hi, self.lo)
        x[self.vstat == BASIC] = 0.0
        # free-at-lower would be -inf; the model has none, but stay safe
        return np.where(np.isfinite(x), x, 0.0)

    def _recompute_x(self) -> None:
        x = self._nonbasic_values()
        resid = self.b - self.A @ x
        x[self.basic] = self._ftran(resid)
        self.x = x

    def _refresh(self) -> None:
        self._factorize()
        self._recompute_x()

    def _reduced_costs(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.c_pert if self.perturbed else self.c
        pi = self._btran(c[self.basic])
        rc = c - self.AT @ pi
        rc[self.basic] = 0.0
        return pi, rc

    # -- feasibility ----------------------------------------------------

    def _primal_infeas(self) -> np.ndarray:
        xb = self.x[self.basic]
        return np.maximum(self.lo[self.basic] - xb, xb - self.hi[self.basic])

    def _dual_feasible(self, rc: np.ndarray) -> bool:
        fixed = self.lo == self.hi
        bad_lo = (self.vstat == AT_LO) & ~fixed & (rc < -DUAL_TOL)
        bad_up = (self.vstat == AT_UP) & ~fixed & (rc > DUAL_TOL)
        return not (bad_lo.any() or bad_up.any())

    def _bounds_feasible(self) -> bool:
        if (self.model.y_lo > self.model.y_hi + PRIMAL_TOL).any():
            return False
        lo_sum = self.model.y_lo.sum()
        hi_sum = self.model.y_hi.sum()
        p = self.model.p
        return lo_sum <= p + PRIMAL_TOL and hi_sum >= p - PRIMAL_TOL

    # -- pivoting -------------------------------------------------------

    def _pivot(self, q: int, t: int, w: np.ndarray, leave_to: int) -> None:
        self.pivots += 1
        leaving = self.basic[t]
        self.vstat[leaving] = leave_to
        self.x[leaving] = self.lo[leaving] if leave_to == AT_LO else self.hi[leaving]
        self.basic[t] = q
        self.vstat[q] = BASIC
        self._push_eta(t, w)
        eta_growth = np.abs(self._etas[-1][1]).max()
        if len(self._etas) >= REFRESH_EVERY or eta_growth > 1e7:
            self._refresh()

    def _primal_simplex(self, max_iter: int) -> None:
        """Dantzig pricing from a primal-feasible basis; Bland after stalls."""
        degenerate_streak = 0
        for _ in range(max_iter):
            self.iterations += 1
            _, rc = self._reduced_costs()
            fixed = self.lo == self.hi
            score = np.zeros(self.ncols)
            at_lo = (self.vstat == AT_LO) & ~fixed
            at_up = (self.vstat == AT_UP) & ~fixed
            score[at_lo] = -rc[at_lo]
            score[at_up] = rc[at_up]
            eligible = score > DUAL_TOL
            if not eligible.any():
                return
            if degenerate_streak >= BLAND_AFTER:
                q = int(np.nonzero(eligible)[0][0])
            else:
                q = int(np.argmax(score))
            direction = 1.0 if self.vstat[q] == AT_LO else -1.0

            w = self._ftran(self.A[:, q].toarray().ravel())
            rate = -direction * w
            xb = self.x[self.basic]
            with np.errstate(divide="ignore", invalid="ignore"):
                room_dn = np.where(rate < -PIVOT_TOL, (self.lo[self.basic] - xb) / rate, INF)
                room_up = np.where(rate > PIVOT_TOL, (self.hi[self.basic] - xb) / rate, INF)
            ratios = np.minimum(room_dn, room_up)
            ratios = np.where(np.isnan(ratios), INF, np.maximum(ratios, 0.0))
            step_flip = self.hi[q] - self.lo[q]

            t_min = float(ratios.min()) if len(ratios) else INF
            if t_min == INF and not np.isfinite(step_flip):
                raise SimplexError("LP is unbounded, which this model class forbids",
                                   self.iterations)
            if step_flip <= t_min:
                # bound flip, no basis change
                self.pivots += 1
                self.x[self.basic] = xb + rate * step_flip
                self.vstat[q] = AT_UP if self.vstat[q] == AT_LO else AT_LO
                self.x[q] = self.hi[q] if self.vstat[q] == AT_UP else self.lo[q]
                degenerate_streak = 0 if step_flip > PRIMAL_TOL else degenerate_streak + 1
                continue

            # Harris-style: pick the largest pivot among near-minimal ratios
            slack = t_min + PRIMAL_TOL
            candidates = np.nonzero(ratios <= slack)[0]
            if degenerate_streak >= BLAND_AFTER:
                t = int(candidates[np.argmin(self.basic[candidates])])
            else:
                t = int(candidates[np.argmax(np.abs(w[candidates]))])
            step = max(float(ratios[t]), 0.0)

            self.x[self.basic] = xb + rate * step
            self.x[q] = (self.lo[q] if direction > 0 else self.hi[q]) + direction * step
            leave_to = AT_LO if rate[t] < 0 else AT_UP
            self._pivot(q, t, w, leave_to)
            degenerate_streak = 0 if step > PRIMAL_TOL else degenerate_streak + 1
        raise SimplexError("primal simplex hit its iteration cap", self.iterations)

    def _dual_ratio_test(self, t: int, sign: float, shortfall: float, rc: np.ndarray,
                         bland: bool):
        """Bound-flipping dual ratio test for row ``t``.

        Walks the eligible nonbasic columns in dual-ratio order.  A boxed
        candidate whose full range still leaves the leaving variable
        infeasible is recorded as a bound flip and the walk continues; the
        first candidate that can absorb the remaining shortfall (or has no
        opposite bound) becomes the entering variable.

        Returns (q, alpha, flips).  q = -2 signals a dual ray (primal
        infeasible); q = -1 signals that even flipping every candidate
        cannot restore the row, which is the boxed version of the same ray.
        """
        e = np.zeros(self.m)
        e[t] = 1.0
        rho = self._btran(e)
        alpha = self.AT @ rho

        fixed = self.lo == self.hi
        nb_lo = (self.vstat == AT_LO) & ~fixed
        nb_up = (self.vstat == AT_UP) & ~fixed
        elig = (nb_lo & (sign * alpha > PIVOT_TOL)) | (nb_up & (sign * alpha < -PIVOT_TOL))
        if not elig.any():
            return -2, alpha, []

        idx = np.nonzero(elig)[0]
        mag = np.abs(alpha[idx])
        feas_rc = np.where(nb_lo[idx], rc[idx], -rc[idx])  # >= -tol when dual feasible
        ratios = np.maximum(feas_rc, 0.0) / mag
        if bland:
            order = np.lexsort((idx, ratios))
        else:
            order = np.lexsort((-mag, ratios))

        flips: list[int] = []
        need = shortfall
        for pos in order:
            j = int(idx[pos])
            span = self.hi[j] - self.lo[j]
            absorb = mag[pos] * span
            if np.isfinite(span) and absorb < need - PRIMAL_TOL:
                flips.append(j)
                need -= absorb
            else:
                return j, alpha, flips
        return -1, alpha, flips

    def _apply_flips(self, flips: list[int]) -> None:
        """Move the listed nonbasic variables to their opposite bounds."""
        if not flips:
            return
        combined = np.zeros(self.m)
        for j in flips:
            if self.vstat[j] == AT_LO:
                delta = self.hi[j] - self.lo[j]
                self.vstat[j] = AT_UP
                self.x[j] = self.hi[j]
            else:
                delta = self.lo[j] - self.hi[j]
                self.vstat[j] = AT_LO
                self.x[j] = self.lo[j]
            combined += self.A[:, j].toarray().ravel() * delta
        self.x[self.basic] -= self._ftran(combined)

    def _dual_simplex(self, max_iter: int) -> str:
        """Drive out primal infeasibilities from a dual-feasible basis.

        Returns "optimal" once primal feasible or "infeasible" when a row
        proves the bounds incompatible.
        """
        _, rc = self._reduced_costs()
        degenerate_streak = 0
        fresh = True
        for _ in range(max_iter):
            self.iterations += 1
            infeas = self._primal_infeas()
            if infeas.max(initial=0.0) <= PRIMAL_TOL:
                return "optimal"
            bland = degenerate_streak >= BLAND_AFTER
            if bland:
                bad = np.nonzero(infeas > PRIMAL_TOL)[0]
                t = int(bad[np.argmin(self.basic[bad])])
            else:
                t = int(np.argmax(infeas))
            leaving = self.basic[t]
            xb = self.x[leaving]
            below = xb < self.lo[leaving]
            sign = -1.0 if below else 1.0
            target = self.lo[leaving] if below else self.hi[leaving]

            q, alpha, flips = self._dual_ratio_test(t, sign, abs(xb - target), rc, bland)
            if q < 0:
                if not fresh:
                    # confirm on clean numbers before declaring infeasible
                    self._refresh()
                    _, rc = self._reduced_costs()
                    fresh = True
                    continue
                return "infeasible"

            w = self._ftran(self.A[:, q].toarray().ravel())
            if abs(w[t]) <= max(PIVOT_TOL, 1e-9 * np.abs(w).max()):
                if not fresh:
                    self._refresh()
                    _, rc = self._reduced_costs()
                    fresh = True
                    continue
                raise SimplexError(f"dual pivot too small ({w[t]:.2e})", self.iterations)

            self._apply_flips(flips)
            if flips:
                xb = self.x[leaving]
                if (self.lo[leaving] - PRIMAL_TOL <= xb <= self.hi[leaving] + PRIMAL_TOL):
                    # the flips alone repaired the row; no pivot needed
                    fresh = False
                    degenerate_streak += 1
                    continue

            delta_q = (xb - target) / w[t]
            self.x[self.basic] = self.x[self.basic] - w * delta_q
            self.x[q] = self.x[q] + delta_q

            # incremental reduced-cost update via the pivot row
            theta_d = rc[q] / alpha[q]
            rc = rc - theta_d * alpha
            rc[q] = 0.0
            rc[leaving] = -theta_d

            self._pivot(q, t, w, AT_LO if below else AT_UP)
            if len(self._etas) == 0:  # _pivot refreshed the factorization
                _, rc = self._reduced_costs()
                fresh = True
            else:
                fresh = False
            degenerate_streak = 0 if abs(theta_d) > 1e-12 else degenerate_streak + 1
            if degenerate_streak == PERTURB_AFTER and not self.perturbed:
                self.perturbed = True
                _, rc = self._reduced_costs()
                degenerate_streak = 0
        raise SimplexError("dual simplex hit its iteration cap", self.iterations)

    # -- driver ---------------------------------------------------------

    def solve(self, warm: Basis | None = None) -> LpSolution:
        self.sync_rows()
        if warm is not None:
            self.load_basis(warm)
        if not self._bounds_feasible():
            return self._solution("infeasible")

        max_iter = max(20_000, 60 * (self.m + self.struct))
        try:
            if self._lu is None:
                self._factorize()
            self._recompute_x()
            status = self._run(max_iter)
        except SimplexError:
            # one clean retry from scratch before giving up
            self._cold_basis()
            self._refresh()
            self.perturbed = True
            status = self._dual_simplex(max_iter)
            self.perturbed = False
            if status != "infeasible":
                self._primal_simplex(max_iter)

        if status == "infeasible":
            return self._solution("infeasible")
        if self._etas:
            self._refresh()
        return self._solution("optimal")

    def _run(self, max_iter: int) -> str:
        self.perturbed = False
        _, rc = self._reduced_costs()
        if self._dual_feasible(rc):
            status = self._dual_simplex(max_iter)
            if status == "infeasible":
                return "infeasible"
        elif self._primal_infeas().max(initial=0.0) <= PRIMAL_TOL:
            pass  # primal feasible already; clean up reduced costs below
        else:
            self._cold_basis()
            self._refresh()
            self.perturbed = True
            _, rc = self._reduced_costs()
            if not self._dual_feasible(rc):
                raise SimplexError("all-logical basis not dual feasible", self.iterations)
            status = self._dual_simplex(max_iter)
            if status == "infeasible":
                return "infeasible"
        self.perturbed = False
        self._primal_simplex(max_iter)
        return "optimal"

    def _solution(self, status: str) -> LpSolution:
        model = self.model
        msites, nclients = model.n_sites, model.n_clients
        if status != "optimal":
            return LpSolution(
                status=status,
                y=np.zeros(msites),
                theta=np.zeros(nclients),
                objective=INF,
                duals=np.zeros(self.m),
                reduced_costs=np.zeros(self.struct),
                basis=None,
                iterations=self.iterations,
                pivots=self.pivots,
            )
        pi, rc = self._reduced_costs()
        return LpSolution(
            status="optimal",
            y=self.x[:msites].copy(),
            theta=self.x[msites:self.struct].copy(),
            objective=float(self.c @ self.x),
            duals=self.row_scale * pi,  # duals of the unscaled rows
            reduced_costs=rc[:self.struct].copy(),
            basis=Basis(self.basic.copy(), self.vstat.copy()),
            iterations=self.iterations,
            pivots=self.pivots,
        )


def lp_solve(model: LpModel, warm: Basis | None = None) -> LpSolution:
    """Solve the master LP to proven optimality (or detect infeasibility)."""
    return SimplexSolver(model).solve(warm)
