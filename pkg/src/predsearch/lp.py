"""Bounded-variable primal simplex for LP relaxations.

The solver works on the computational form

    min cost.z   s.t.  W z = b,   l <= z <= u,

where W = [A | I] pairs the structural columns with one slack column per
row; row senses live in the slack bounds (LE: [0, inf), GE: (-inf, 0],
EQ: [0, 0]). Rows whose initial slack value falls outside those bounds
get a one-sided artificial column, and a phase-1 run minimizes total
infeasibility before the real objective is optimized.

Pricing is Dantzig by default and switches permanently to Bland's rule
once a degenerate-pivot streak trips the cycling guard, which restores
the termination guarantee. The basis inverse is kept explicitly and
refactorized periodically (and on any suspicious pivot) to contain
round-off drift.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NumericalError
from .instance import MipInstance, Sense

_BASIC, _AT_LB, _AT_UB, _FREE = 0, 1, 2, 3

_REFACTOR_EVERY = 64
_PIVOT_TOL = 1e-9
_DEGEN_STEP_TOL = 1e-11


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    iterations: int


@dataclass
class StandardForm:
    """Dense computational form shared by all LP solves of one instance."""

    W: np.ndarray        # m x (n + m), structural columns then slack identity
    b: np.ndarray        # m
    cost: np.ndarray     # n + m, zeros on slacks
    lower: np.ndarray    # n + m
    upper: np.ndarray    # n + m
    nstruct: int

    @property
    def nrows(self) -> int:
        return self.W.shape[0]


def compile_standard_form(inst: MipInstance) -> StandardForm:
    n, m = inst.num_vars, inst.num_rows
    A = np.zeros((m, n))
    b = np.zeros(m)
    slack_lb = np.zeros(m)
    slack_ub = np.zeros(m)
    for j, row in enumerate(inst.rows):
        if row.terms:
            A[j, row.indices()] = row.coefficients()
        b[j] = row.rhs
        if row.sense is Sense.LE:
            slack_lb[j], slack_ub[j] = 0.0, np.inf
        elif row.sense is Sense.GE:
            slack_lb[j], slack_ub[j] = -np.inf, 0.0
        else:
            slack_lb[j], slack_ub[j] = 0.0, 0.0
    W = np.hstack([A, np.eye(m)]) if m else np.zeros((0, n))
    return StandardForm(
        W=W,
        b=b,
        cost=np.concatenate([inst.objective, np.zeros(m)]),
        lower=np.concatenate([inst.lower, slack_lb]),
        upper=np.concatenate([inst.upper, slack_ub]),
        nstruct=n,
    )


class _BoundedSimplex:
    def __init__(self, form: StandardForm, lower: np.ndarray, upper: np.ndarray):
        # lower/upper override the structural bounds (branch-and-bound nodes).
        self.m = form.nrows
        self.nstruct = form.nstruct
        self.b = form.b
        self.lower = np.concatenate([lower, form.lower[form.nstruct:]])
        self.upper = np.concatenate([upper, form.upper[form.nstruct:]])
        self.cost = form.cost.copy()
        self.W = form.W
        self.iterations = 0
        self.bland = False
        self._degen_streak = 0
        self._since_refactor = 0
        self._num_retries = 0

    # -- setup ---------------------------------------------------------------

    def _initial_state(self) -> bool:
        """Build the slack basis plus artificials; False if bounds are empty."""
        if np.any(self.lower > self.upper):
            return False
        m, n = self.m, self.W.shape[1]
        z = np.where(np.isfinite(self.lower), self.lower,
                     np.where(np.isfinite(self.upper), self.upper, 0.0))
        stat = np.where(np.isfinite(self.lower), _AT_LB,
                        np.where(np.isfinite(self.upper), _AT_UB, _FREE)).astype(np.int8)

        resid = self.b - self.W[:, :self.nstruct] @ z[:self.nstruct] if m else np.zeros(0)
        art_cols, art_rows, art_lb, art_ub, art_cost = [], [], [], [], []
        basis = np.arange(self.nstruct, self.nstruct + m)
        for j in range(m):
            s = self.nstruct + j
            if self.lower[s] - 1e-12 <= resid[j] <= self.upper[s] + 1e-12:
                z[s] = resid[j]
                stat[s] = _BASIC
            else:
                clamped = min(max(resid[j], self.lower[s]), self.upper[s])
                z[s] = clamped
                stat[s] = _AT_LB if clamped == self.lower[s] else _AT_UB
                e = resid[j] - clamped
                col = np.zeros(m)
                col[j] = 1.0
                art_cols.append(col)
                art_rows.append(j)
                if e > 0:
                    art_lb.append(0.0), art_ub.append(np.inf), art_cost.append(1.0)
                else:
                    art_lb.append(-np.inf), art_ub.append(0.0), art_cost.append(-1.0)

        self.n_art = len(art_rows)
        if self.n_art:
            self.W = np.hstack([self.W, np.column_stack(art_cols)])
            self.lower = np.concatenate([self.lower, art_lb])
            self.upper = np.concatenate([self.upper, art_ub])
            self.cost = np.concatenate([self.cost, np.zeros(self.n_art)])
            z = np.concatenate([z, np.zeros(self.n_art)])
            stat = np.concatenate([stat, np.full(self.n_art, _BASIC, dtype=np.int8)])
            self.phase1_cost = np.zeros(self.W.shape[1])
            self.phase1_cost[n:] = art_cost
            for k, j in enumerate(art_rows):
                basis[j] = n + k
        self.z = z
        self.stat = stat
        self.basis = basis
        self._refactor()
        return True

    def _refactor(self):
        try:
            self.Binv = np.linalg.inv(self.W[:, self.basis]) if self.m else np.zeros((0, 0))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular basis during refactorization: {exc}") from exc
        self._recompute_basics()
        self._since_refactor = 0

    def _recompute_basics(self):
        if not self.m:
            return
        znb = self.z.copy()
        znb[self.basis] = 0.0
        self.z[self.basis] = self.Binv @ (self.b - self.W @ znb)

    # -- core loop -------------------------------------------------------------

    def _run(self, cost: np.ndarray, *, max_iter: int) -> LpStatus:
        dj_tol = 1e-9 * (1.0 + np.abs(cost).max(initial=0.0))
        fixed = self.lower == self.upper
        while True:
            self.iterations += 1
            if self.iterations > max_iter:
                raise NumericalError(f"simplex exceeded {max_iter} iterations")
            if self._since_refactor >= _REFACTOR_EVERY:
                self._refactor()

            y = cost[self.basis] @ self.Binv if self.m else np.zeros(0)
            d = cost - y @ self.W if self.m else cost.copy()
            viol = np.zeros_like(d)
            at_lb = self.stat == _AT_LB
            at_ub = self.stat == _AT_UB
            free = self.stat == _FREE
            viol[at_lb] = np.maximum(0.0, -d[at_lb])
            viol[at_ub] = np.maximum(0.0, d[at_ub])
            viol[free] = np.abs(d[free])
            viol[fixed] = 0.0
            viol[viol <= dj_tol] = 0.0
            if not viol.any():
                return LpStatus.OPTIMAL

            if self.bland:
                q = int(np.nonzero(viol)[0][0])
            else:
                q = int(np.argmax(viol))
            direction = 1.0 if (self.stat[q] == _AT_LB or (self.stat[q] == _FREE and d[q] < 0)) else -1.0

            w = self.Binv @ self.W[:, q] if self.m else np.zeros(0)
            step = self._ratio_test(q, direction, w)
            if step is None:
                return LpStatus.UNBOUNDED
            t, leave_pos = step

            self._degen_streak = self._degen_streak + 1 if t <= _DEGEN_STEP_TOL else 0
            if self._degen_streak > 100 + 10 * self.m:
                self.bland = True

            delta = direction * w
            if leave_pos is None:
                # bound flip: entering variable jumps to its opposite bound
                self.z[self.basis] -= t * delta
                self.z[q] = self.upper[q] if direction > 0 else self.lower[q]
                self.stat[q] = _AT_UB if direction > 0 else _AT_LB
            else:
                piv = w[leave_pos]
                if abs(piv) < _PIVOT_TOL:
                    self._num_retries += 1
                    if self._num_retries > 3:
                        raise NumericalError("pivot element vanished repeatedly")
                    self._refactor()
                    continue
                leaving = self.basis[leave_pos]
                self.z[self.basis] -= t * delta
                self.z[q] += direction * t
                hit_lower = delta[leave_pos] > 0
                self.z[leaving] = self.lower[leaving] if hit_lower else self.upper[leaving]
                self.stat[leaving] = _AT_LB if hit_lower else _AT_UB
                self.stat[q] = _BASIC
                self.basis[leave_pos] = q
                # eta update of the explicit inverse
                self.Binv[leave_pos] /= piv
                others = np.arange(self.m) != leave_pos
                self.Binv[others] -= np.outer(w[others], self.Binv[leave_pos])
                self._since_refactor += 1

    def _ratio_test(self, q: int, direction: float, w: np.ndarray):
        """Largest feasible step; returns (t, leaving position or None)."""
        t_own = self.upper[q] - self.lower[q]  # inf unless both bounds finite
        if self.m:
            xB = self.z[self.basis]
            lB = self.lower[self.basis]
            uB = self.upper[self.basis]
            delta = direction * w
            cand = np.full(self.m, np.inf)
            dn = delta > _PIVOT_TOL
            up = delta < -_PIVOT_TOL
            with np.errstate(invalid="ignore"):
                cand[dn] = (xB[dn] - lB[dn]) / delta[dn]
                cand[up] = (xB[up] - uB[up]) / delta[up]
            cand[np.isnan(cand)] = np.inf
            np.maximum(cand, 0.0, out=cand)
            t_basic = cand.min() if self.m else np.inf
        else:
            cand = np.zeros(0)
            t_basic = np.inf

        t = min(t_own, t_basic)
        if not np.isfinite(t):
            return None
        if t_own <= t_basic:
            return t_own, None
        ties = np.nonzero(cand <= t_basic + 1e-9)[0]
        if self.bland:
            leave_pos = int(ties[np.argmin(self.basis[ties])])
        else:
            # prefer the largest pivot magnitude for stability, then lowest id
            mags = np.abs(w[ties])
            best = ties[mags >= mags.max() - 1e-12]
            leave_pos = int(best[np.argmin(self.basis[best])])
        return t_basic, leave_pos

    # -- driver ----------------------------------------------------------------

    def solve(self) -> LpResult:
        if not self._initial_state():
            return LpResult(LpStatus.INFEASIBLE, None, np.inf, 0)
        ncols = self.W.shape[1]
        max_iter = 20000 + 200 * ncols

        if self.n_art:
            status = self._run(self.phase1_cost, max_iter=max_iter)
            if status is LpStatus.UNBOUNDED:
                raise NumericalError("phase-1 objective reported unbounded")
            infeas = float(self.phase1_cost @ self.z)
            if infeas > 1e-7 * (1.0 + np.abs(self.b).max(initial=0.0)):
                return LpResult(LpStatus.INFEASIBLE, None, np.inf, self.iterations)
            # pin artificials at zero for phase 2
            art = slice(ncols - self.n_art, ncols)
            self.lower[art] = 0.0
            self.upper[art] = 0.0
            self.z[art] = np.where(self.stat[art] == _BASIC, self.z[art], 0.0)

        status = self._run(self.cost, max_iter=max_iter)
        if status is LpStatus.UNBOUNDED:
            return LpResult(LpStatus.UNBOUNDED, None, -np.inf, self.iterations)

        self._refactor()  # crisp final basic values
        x = self.z[: self.nstruct].copy()
        below = np.where(np.isfinite(self.lower), self.lower - self.z, 0.0)
        above = np.where(np.isfinite(self.upper), self.z - self.upper, 0.0)
        scale = 1.0 + np.abs(self.b).max(initial=0.0)
        if max(below.max(initial=0.0), above.max(initial=0.0)) > 1e-7 * scale:
            raise NumericalError("final LP basis violates bounds beyond tolerance")
        obj = float(self.cost[: self.nstruct] @ x)
        return LpResult(LpStatus.OPTIMAL, x, obj, self.iterations)


def solve_lp(form: StandardForm, lower: np.ndarray, upper: np.ndarray) -> LpResult:
    """Solve the LP for one set of structural bounds (no integrality)."""
    return _BoundedSimplex(form, np.asarray(lower, float), np.asarray(upper, float)).solve()


def solve_lp_relaxation(inst: MipInstance) -> LpResult:
    """LP relaxation of an instance (integrality dropped, bounds kept)."""
    form = compile_standard_form(inst)
    return solve_lp(form, inst.lower, inst.upper)
