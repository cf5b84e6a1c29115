"""Dense-tableau bounded-variable simplex.

Variable bounds are handled implicitly (nonbasic columns sit at a bound), so
branching only edits bounds and a dual simplex pass re-optimizes from the
parent's tableau.  A cold solve starts from the slack basis: the dual simplex
with zero costs reaches a feasible basis, then the primal simplex optimizes.

Entering columns follow the largest reduced cost; after a run of degenerate
pivots the rule switches to Bland's smallest-index rule, which cannot cycle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import IterationLimit
from ..milp import LinearForm, MilpModel

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
DEGENERATE_RUN = 30


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal", "infeasible" or "unbounded"
    objective: float
    x: np.ndarray | None
    iterations: int

    def values(self, form: LinearForm) -> dict[str, float]:
        return {n: float(v) for n, v in zip(form.names, self.x)}


class SimplexState:
    """Tableau, basis and bound status of one linear program."""

    def __init__(self, form: LinearForm, lb=None, ub=None, max_iter: int = 200000):
        lb = np.asarray(form.lb if lb is None else lb, dtype=float)
        ub = np.asarray(form.ub if ub is None else ub, dtype=float)
        self.form = form
        self.max_iter = max_iter
        self.iterations = 0
        n = len(form.c)
        cols, lo, hi = [], [], []
        for j in range(n):
            if np.isfinite(lb[j]):
                cols.append((j, 1.0)); lo.append(lb[j]); hi.append(ub[j])
            elif np.isfinite(ub[j]):
                cols.append((j, -1.0)); lo.append(-ub[j]); hi.append(np.inf)
            else:
                cols.append((j, 1.0)); lo.append(0.0); hi.append(np.inf)
                cols.append((j, -1.0)); lo.append(0.0); hi.append(np.inf)
        self.cols = cols
        self.col_of = {j: k for k, (j, s) in enumerate(cols) if s > 0}
        A0 = form.A
        m = A0.shape[0]
        idx = np.array([j for j, _ in cols], dtype=np.int64)
        sgn = np.array([s for _, s in cols])
        A = A0[:, idx] * sgn if len(cols) else np.zeros((m, 0))
        slack_sign = np.array([-1.0 if s == ">=" else 1.0 for s in form.senses])
        slack_hi = np.array([0.0 if s == "=" else np.inf for s in form.senses])
        nc = len(cols)
        self.nc = nc
        N = nc + m
        self.lo = np.concatenate([np.array(lo, dtype=float), np.zeros(m)])
        self.hi = np.concatenate([np.array(hi, dtype=float), slack_hi])
        self.cost = np.concatenate([form.c[idx] * sgn if nc else np.zeros(0), np.zeros(m)])
        # basis = slacks; B = diag(slack_sign) so B^-1 scales each row
        T = np.zeros((m, N))
        T[:, :nc] = A * slack_sign[:, None]
        T[np.arange(m), nc + np.arange(m)] = 1.0
        self.T = T
        self.basis = nc + np.arange(m)
        self.is_basic = np.zeros(N, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(N, dtype=bool)
        xN = np.where(self.is_basic, 0.0, self.lo)
        self.beta = slack_sign * (form.b - A @ xN[:nc]) if m else np.zeros(0)
        self.d = np.zeros(N)

    # ------------------------------------------------------------ basics
    def copy(self) -> "SimplexState":
        new = object.__new__(SimplexState)
        new.__dict__.update(self.__dict__)
        for k in ("T", "basis", "is_basic", "at_upper", "beta", "d", "lo", "hi"):
            setattr(new, k, getattr(self, k).copy())
        new.iterations = 0
        return new

    def _tick(self):
        self.iterations += 1
        if self.iterations > self.max_iter:
            raise IterationLimit(f"simplex exceeded {self.max_iter} pivots")

    def _pivot(self, r: int, q: int) -> None:
        T = self.T
        row = T[r] / T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        # tableaus of these models stay sparse; touch only the affected block
        rows = np.flatnonzero(col)
        cols = np.flatnonzero(row)
        if rows.size * cols.size > 0.3 * T.size:
            T -= np.outer(col, row)
        elif rows.size:
            _kernels.rank_one_update(T, rows, cols, col[rows], row[cols])
        T[r] = row
        self.d -= self.d[q] * row
        self.d[q] = 0.0
        old = self.basis[r]
        self.is_basic[old] = False
        self.is_basic[q] = True
        self.basis[r] = q

    def _nonbasic_value(self, j):
        return self.hi[j] if self.at_upper[j] else self.lo[j]

    def set_phase_two_costs(self) -> None:
        cb = self.cost[self.basis]
        self.d = self.cost - cb @ self.T

    # ------------------------------------------------------------ primal
    def primal(self) -> str:
        degenerate = 0
        movable = self.hi - self.lo > PIVOT_TOL
        while True:
            d = self.d
            free = ~self.is_basic & movable
            up = free & ~self.at_upper & (d > PIVOT_TOL)
            down = free & self.at_upper & (d < -PIVOT_TOL)
            score = np.where(up, d, np.where(down, -d, 0.0))
            if degenerate >= DEGENERATE_RUN:
                cand = np.nonzero(score > 0)[0]
                if cand.size == 0:
                    return "optimal"
                q = int(cand[0])
            else:
                q = int(np.argmax(score))
                if score[q] <= 0:
                    return "optimal"
            delta = 1.0 if up[q] else -1.0
            da = delta * self.T[:, q]
            lbB, ubB = self.lo[self.basis], self.hi[self.basis]
            theta = np.full(len(da), np.inf)
            dec = da > PIVOT_TOL
            inc = (da < -PIVOT_TOL) & np.isfinite(ubB)
            theta[dec] = (self.beta[dec] - lbB[dec]) / da[dec]
            theta[inc] = (ubB[inc] - self.beta[inc]) / (-da[inc])
            np.maximum(theta, 0.0, out=theta)
            tmin = theta.min() if len(theta) else np.inf
            flip = self.hi[q] - self.lo[q]
            if not np.isfinite(tmin) and not np.isfinite(flip):
                return "unbounded"
            self._tick()
            step = min(tmin, flip)
            degenerate = degenerate + 1 if step <= PIVOT_TOL else 0
            if flip <= tmin:
                self.beta -= flip * da
                self.at_upper[q] = not self.at_upper[q]
                continue
            ties = np.nonzero(theta <= tmin + PIVOT_TOL * max(1.0, tmin))[0]
            r = int(ties[np.argmin(self.basis[ties])])
            newval = self._nonbasic_value(q) + delta * tmin
            leave = self.basis[r]
            self.beta -= tmin * da
            self.at_upper[leave] = da[r] < 0
            self._pivot(r, q)
            self.beta[r] = newval

    # -------------------------------------------------------------- dual
    def dual(self) -> str:
        movable = self.hi - self.lo > PIVOT_TOL
        slow_after = 5 * (len(self.basis) + 10)
        steps = 0
        while True:
            lbB, ubB = self.lo[self.basis], self.hi[self.basis]
            below = lbB - self.beta
            above = self.beta - ubB
            viol = np.maximum(below, above)
            bland = steps >= slow_after
            if bland:
                bad = np.nonzero(viol > FEAS_TOL)[0]
                if bad.size == 0:
                    return "optimal"
                r = int(bad[np.argmin(self.basis[bad])])
            else:
                r = int(np.argmax(viol)) if len(viol) else 0
                if not len(viol) or viol[r] <= FEAS_TOL:
                    return "optimal"
            row = self.T[r]
            free = ~self.is_basic & movable
            if below[r] > above[r]:
                target = lbB[r]
                elig = free & ((~self.at_upper & (row < -PIVOT_TOL)) | (self.at_upper & (row > PIVOT_TOL)))
            else:
                target = ubB[r]
                elig = free & ((~self.at_upper & (row > PIVOT_TOL)) | (self.at_upper & (row < -PIVOT_TOL)))
            cand = np.nonzero(elig)[0]
            if cand.size == 0:
                return "infeasible"
            ratio = np.abs(self.d[cand]) / np.abs(row[cand])
            rmin = ratio.min()
            tied = cand[ratio <= rmin + PIVOT_TOL]
            q = int(tied[0]) if bland else int(tied[np.argmax(np.abs(row[tied]))])
            self._tick()
            steps += 1
            dx = (self.beta[r] - target) / row[q]
            newval = self._nonbasic_value(q) + dx
            leave = self.basis[r]
            self.beta -= dx * self.T[:, q]
            self.at_upper[leave] = bool(target == ubB[r]) and not bool(target == lbB[r])
            self._pivot(r, q)
            self.beta[r] = newval

    # ------------------------------------------------------------ driver
    def solve_cold(self) -> str:
        self.d = np.zeros_like(self.d)
        status = self.dual()
        if status != "optimal":
            return status
        self.set_phase_two_costs()
        return self.primal()

    def reoptimize(self) -> str:
        status = self.dual()
        if status != "optimal":
            return status
        # clean up any reduced costs pushed to the wrong sign by round-off
        return self.primal()

    def set_bounds(self, j: int, lo: float, hi: float) -> None:
        """Replace the bounds of structural variable ``j`` (finite lower bound)."""
        k = self.col_of[j]
        if self.is_basic[k]:
            self.lo[k], self.hi[k] = lo, hi
            return
        old = self._nonbasic_value(k)
        self.lo[k], self.hi[k] = lo, hi
        if self.at_upper[k] and not np.isfinite(hi):
            self.at_upper[k] = False
        new = self._nonbasic_value(k)
        if new != old:
            self.beta -= (new - old) * self.T[:, k]

    def x(self) -> np.ndarray:
        vals = np.where(self.at_upper, self.hi, self.lo)
        vals = np.where(self.is_basic, 0.0, vals)
        vals[self.basis] = self.beta
        out = np.zeros(len(self.form.c))
        for k, (j, s) in enumerate(self.cols):
            out[j] += s * vals[k]
        return out

    def solution(self, status: str) -> LpSolution:
        if status == "infeasible":
            return LpSolution("infeasible", float("nan"), None, self.iterations)
        if status == "unbounded":
            return LpSolution("unbounded", float("inf"), None, self.iterations)
        x = self.x()
        return LpSolution("optimal", float(self.form.c @ x), x, self.iterations)


def solve_form(form: LinearForm, lb=None, ub=None, max_iter: int = 200000) -> LpSolution:
    """Maximize ``form`` ignoring integrality, optionally with replaced bounds."""
    lbv = form.lb if lb is None else lb
    ubv = form.ub if ub is None else ub
    if np.any(np.asarray(lbv) > np.asarray(ubv) + PIVOT_TOL):
        return LpSolution("infeasible", float("nan"), None, 0)
    st = SimplexState(form, lbv, ubv, max_iter)
    return st.solution(st.solve_cold())


def simplex_solve(model: MilpModel, max_iter: int = 200000) -> LpSolution:
    """Optimal basic solution of the linear relaxation of ``model``."""
    return solve_form(model.dense, max_iter=max_iter)
