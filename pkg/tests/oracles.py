"""Reference computations written independently of the package internals."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
import scipy.optimize as so

from frcvp.milp import LinearForm


def platoon_value(n: int, lam, sl: float, sf: float) -> float:
    """Best split of n simultaneous vehicles into platoons of size <= lam."""
    cap = n if lam is None else lam

    @lru_cache(maxsize=None)
    def best(k):
        if k <= 1:
            return 0.0
        return max(best(k - s) + (sl + (s - 1) * sf if s >= 2 else 0.0) for s in range(1, min(cap, k) + 1))

    return best(n)


def assignment_value(instance, assignment) -> float:
    """Total saving of a bucket assignment, counted edge by edge."""
    total = 0.0
    for k, e in enumerate(instance.network.edges):
        groups = {}
        for v in instance.vehicles:
            if k in v.route:
                groups[assignment[v.id]] = groups.get(assignment[v.id], 0) + 1
        total += sum(e.cost * platoon_value(n, instance.lam, instance.sigma_l, instance.sigma_f)
                     for n in groups.values())
    return total


def group_saving(instance, vehicles, edges=None) -> float:
    """Saving of a vehicle set travelling together, recomputed from scratch."""
    vs = set(vehicles)
    total = 0.0
    for k, e in enumerate(instance.network.edges):
        if edges is not None and k not in edges:
            continue
        n = sum(1 for v in instance.vehicles if v.id in vs and k in v.route)
        total += e.cost * platoon_value(n, None, instance.sigma_l, instance.sigma_f)
    return total


def grid_optimum(instance, quantum=1.0) -> float:
    """Best saving over departures on the quantum grid."""
    from frcvp.objective import evaluate_schedule

    choices = []
    for v in instance.vehicles:
        last = v.t_arrive_max - instance.route_time(v.id)
        k = int(round((last - v.t_depart_min) / quantum))
        choices.append([v.t_depart_min + i * quantum for i in range(k + 1)])
    ids = instance.ids
    return max(evaluate_schedule(instance, dict(zip(ids, c))).total for c in itertools.product(*choices))


def brute_assignment(instance, buckets) -> float:
    ids = instance.ids
    return max(assignment_value(instance, dict(zip(ids, c)))
               for c in itertools.product(*[buckets.feasibility[v] for v in ids]))


def brute_midpoints(instance, buckets, rtws) -> float:
    """Best schedule when every vehicle departs at the midpoint of a feasible
    bucket, scored by simultaneous edge entry."""
    from frcvp.objective import evaluate_schedule

    ids = instance.ids
    mids = [[buckets.midpoint(t) - rtws[v].offset for t in buckets.feasibility[v]] for v in ids]
    return max(evaluate_schedule(instance, dict(zip(ids, c))).total for c in itertools.product(*mids))


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def min_clique_partition(windows) -> int:
    """Fewest groups of windows such that each group has a common interior point."""
    best = len(windows)
    for part in set_partitions(range(len(windows))):
        if len(part) < best and all(max(windows[i][0] for i in g) < min(windows[i][1] for i in g) for g in part):
            best = len(part)
    return best


def _scipy_parts(f: LinearForm):
    ub_rows, bu, eq, be = [], [], [], []
    for i, s in enumerate(f.senses):
        if s == "<=":
            ub_rows.append(f.A[i]); bu.append(f.b[i])
        elif s == ">=":
            ub_rows.append(-f.A[i]); bu.append(-f.b[i])
        else:
            eq.append(f.A[i]); be.append(f.b[i])
    return ub_rows, bu, eq, be


def highs_lp(f: LinearForm, lb=None, ub=None):
    """(status, objective) of the maximisation LP via HiGHS."""
    lb = f.lb if lb is None else lb
    ub = f.ub if ub is None else ub
    ub_rows, bu, eq, be = _scipy_parts(f)
    r = so.linprog(-f.c, A_ub=np.array(ub_rows) if ub_rows else None, b_ub=bu or None,
                   A_eq=np.array(eq) if eq else None, b_eq=be or None,
                   bounds=[(None if np.isinf(a) else a, None if np.isinf(b) else b) for a, b in zip(lb, ub)],
                   method="highs")
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(r.status, str(r.status))
    return status, (-r.fun if r.status == 0 else None)


def highs_milp(f: LinearForm) -> float:
    cons = []
    if len(f.senses):
        lo = np.array([b if s in (">=", "=") else -np.inf for s, b in zip(f.senses, f.b)])
        hi = np.array([b if s in ("<=", "=") else np.inf for s, b in zip(f.senses, f.b)])
        cons = [so.LinearConstraint(f.A, lo, hi)]
    r = so.milp(-f.c, constraints=cons, integrality=f.integer.astype(int), bounds=so.Bounds(f.lb, f.ub))
    assert r.status == 0, r.message
    return -r.fun
