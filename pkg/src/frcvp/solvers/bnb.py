"""Best-bound branch and bound over the simplex relaxation."""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..milp import MilpModel
from .simplex import SimplexState, solve_form

INT_TOL = 1e-6
# open nodes keep their tableau for warm starts up to this many bytes
STATE_MEMORY = 256 * 2**20


@dataclass
class SearchStats:
    nodes: int = 0
    lp_iterations: int = 0
    incumbents: int = 0
    wall_time: float = 0.0
    bound_history: list = field(default_factory=list)


@dataclass(frozen=True)
class BnBResult:
    status: str  # "optimal", "infeasible", "budget_exceeded"
    objective: float | None
    values: dict | None
    bound: float
    gap: float
    stats: SearchStats


def _gap(bound: float, inc: float | None) -> float:
    if inc is None:
        return math.inf
    return max(0.0, bound - inc) / max(abs(inc), 1e-9) if bound - inc > 1e-9 else 0.0


def branch_and_bound(model: MilpModel, time_budget: float | None = None,
                     node_limit: int | None = None, prefer_prefix: str = "x_") -> BnBResult:
    """Maximize ``model``.  Branches on the most fractional integer variable,
    preferring names starting with ``prefer_prefix``; open nodes are explored
    best bound first, deeper first on ties.  A zero budget solves only the
    root relaxation and reports its bound.
    """
    t0 = time.perf_counter()
    form = model.dense
    stats = SearchStats()
    integer = np.nonzero(form.integer)[0]
    preferred = np.array([form.names[j].startswith(prefer_prefix) for j in integer], dtype=bool)
    lb0, ub0 = form.lb.copy(), form.ub.copy()
    # integer variables can have their bounds rounded inward
    lb0[integer] = np.ceil(lb0[integer] - INT_TOL)
    ub0[integer] = np.floor(ub0[integer] + INT_TOL)

    stored = [0]

    def finish(state, status):
        stats.lp_iterations += state.iterations
        stats.nodes += 1
        return state.solution(status)

    def keep(state):
        if stored[0] + state.T.nbytes > STATE_MEMORY:
            return None
        stored[0] += state.T.nbytes
        return state

    def release(state):
        if state is not None:
            stored[0] -= state.T.nbytes

    if np.any(lb0 > ub0):
        stats.wall_time = time.perf_counter() - t0
        return BnBResult("infeasible", None, None, -math.inf, math.inf, stats)
    root_state = SimplexState(form, lb0, ub0)
    root = finish(root_state, root_state.solve_cold())
    if root.status == "infeasible":
        stats.wall_time = time.perf_counter() - t0
        return BnBResult("infeasible", None, None, -math.inf, math.inf, stats)
    if root.status == "unbounded":
        raise ValueError("relaxation is unbounded")
    best_val, best_x = None, None
    seq = 0
    heap = [(-root.objective, 0, seq, lb0, ub0, root, keep(root_state))]
    budget_hit = False
    if time_budget is not None and time_budget <= 0:
        stats.bound_history.append(root.objective)
        stats.wall_time = time.perf_counter() - t0
        return BnBResult("budget_exceeded", None, None, root.objective, math.inf, stats)

    while heap:
        entry = heapq.heappop(heap)
        neg_bound, neg_depth, _, lb, ub, sol, state = entry
        release(state)
        bound = -neg_bound
        if best_val is not None and bound <= best_val + 1e-9:
            continue
        xi = sol.x[integer]
        frac = np.abs(xi - np.round(xi))
        fractional = frac > INT_TOL
        if not fractional.any():
            val = sol.objective
            if best_val is None or val > best_val + 1e-12:
                best_val = val
                x = sol.x.copy()
                x[integer] = np.round(x[integer])
                best_x = x
                stats.incumbents += 1
            continue
        pool = fractional & preferred if (fractional & preferred).any() else fractional
        score = np.where(pool, np.minimum(xi - np.floor(xi), np.ceil(xi) - xi), -1.0)
        k = int(np.argmax(score))
        j = integer[k]
        val = sol.x[j]
        for side in (1, 0):
            nlb, nub = lb.copy(), ub.copy()
            if side:
                nlb[j] = math.ceil(val)
            else:
                nub[j] = math.floor(val)
            if (time_budget is not None and time.perf_counter() - t0 > time_budget) or \
                    (node_limit is not None and stats.nodes >= node_limit):
                budget_hit = True
                break
            if nlb[j] > nub[j]:
                continue
            if state is None:
                child_state = SimplexState(form, nlb, nub)
                child = finish(child_state, child_state.solve_cold())
            else:
                child_state = state.copy() if side else state
                child_state.set_bounds(j, nlb[j], nub[j])
                child = finish(child_state, child_state.reoptimize())
            if child.status != "optimal":
                continue
            if best_val is not None and child.objective <= best_val + 1e-9:
                continue
            seq += 1
            heapq.heappush(heap, (-child.objective, neg_depth - 1, seq, nlb, nub, child, keep(child_state)))
        if heap:
            stats.bound_history.append(max(-heap[0][0], best_val if best_val is not None else -math.inf))
        if budget_hit:
            # the current node's bound still counts
            heapq.heappush(heap, (neg_bound, neg_depth, seq + 1, lb, ub, sol, None))
            break
    stats.wall_time = time.perf_counter() - t0
    values = None if best_x is None else {n: float(v) for n, v in zip(form.names, best_x)}
    if budget_hit:
        open_bound = max(-h[0] for h in heap) if heap else -math.inf
        bound = max(open_bound, best_val if best_val is not None else -math.inf)
        return BnBResult("budget_exceeded", best_val, values, bound, _gap(bound, best_val), stats)
    if best_val is None:
        return BnBResult("infeasible", None, None, -math.inf, math.inf, stats)
    return BnBResult("optimal", best_val, values, best_val, 0.0, stats)
