"""Exhaustive search over bucket assignments with an admissible bound."""
from __future__ import annotations

import math
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .. import _kernels
from ..errors import InfeasibleAssignment, SearchSpaceTooLarge
from ..model import Instance
from ..objective import group_saving
from ..timewin import BucketSet

DEFAULT_LIMIT = 10**7


class EnumerationResult(NamedTuple):
    value: float
    assignment: dict
    nodes: int


def best_partition(n: int, lam, sigma_l: float, sigma_f: float) -> float:
    """Largest total saving rate over all ways to split n vehicles into groups."""
    best = [0.0] * (n + 1)
    for k in range(1, n + 1):
        b = group_saving(k, lam, sigma_l, sigma_f)
        for j in range(1, k // 2 + 1):
            b = max(b, best[j] + best[k - j])
        best[k] = b
    return best[n]


def search_space(buckets: BucketSet, vehicles: Iterable[int]) -> int:
    return math.prod(len(buckets.feasibility[v]) for v in vehicles)


def best_assignment(instance: Instance, buckets: BucketSet, vehicles: Iterable[int] | None = None,
                    edges: Iterable[int] | None = None, fixed: Mapping[int, int] | None = None,
                    prune: bool = True, limit: float = DEFAULT_LIMIT, kernels=None) -> EnumerationResult:
    """Optimal buckets for ``vehicles`` given the ``fixed`` choices of others.

    The objective counts only ``edges`` (default: every edge) and includes the
    contribution of fixed vehicles on them.
    """
    kern = kernels or _kernels
    ids = list(instance.ids if vehicles is None else vehicles)
    fixed = dict(fixed or {})
    size = search_space(buckets, ids)
    if ids and size == 0:
        raise InfeasibleAssignment("some vehicle has no feasible bucket")
    if size > limit:
        raise SearchSpaceTooLarge(f"{size} assignments exceed the limit {int(limit)}")
    on_edge = instance.vehicles_on_edge
    keep = sorted(on_edge if edges is None else set(edges) & set(on_edge))
    pos = {e: i for i, e in enumerate(keep)}
    net = instance.network.edges
    T = max(len(buckets), 1)
    E = len(keep)
    counts0 = np.zeros((E, T), dtype=np.int64)
    for v, t in fixed.items():
        for e in instance.vehicle(v).route:
            if e in pos:
                counts0[pos[e], t] += 1
    members = set(ids)
    n_on = [len(on_edge[e] & members) for e in keep]
    G = max([n_on[i] + int(counts0[i].max(initial=0)) for i in range(E)], default=0) + 1
    lam, sl, sf = instance.lam, instance.sigma_l, instance.sigma_f
    table = [group_saving(k, lam, sl, sf) for k in range(G + 1)]
    gain = np.zeros((E, G))
    cap = np.zeros(E)
    cur0 = np.zeros(E)
    for i, e in enumerate(keep):
        c = net[e].cost
        gain[i] = [c * (table[k + 1] - table[k]) for k in range(G)]
        total = n_on[i] + int(counts0[i].sum())
        cap[i] = c * best_partition(total, lam, sl, sf)
        cur0[i] = c * sum(table[int(k)] for k in counts0[i])

    def weight(v):
        return sum(net[e].cost * (len(on_edge[e]) - 1) for e in instance.vehicle(v).route if e in pos)

    order = sorted(ids, key=lambda v: (-weight(v), len(buckets.feasibility[v]), v))
    feas_ptr, feas_idx, route_ptr, route_idx = [0], [], [0], []
    for v in order:
        feas_idx += list(buckets.feasibility[v])
        feas_ptr.append(len(feas_idx))
        route_idx += [pos[e] for e in instance.vehicle(v).route if e in pos]
        route_ptr.append(len(route_idx))
    if not order:
        return EnumerationResult(float(cur0.sum()), {}, 1)
    best, choice, nodes = kern.enumerate_best(
        np.array(feas_ptr, dtype=np.int64), np.array(feas_idx, dtype=np.int64),
        np.array(route_ptr, dtype=np.int64), np.array(route_idx, dtype=np.int64),
        gain, cap, cur0, counts0, bool(prune))
    assignment = {v: int(choice[i]) for i, v in enumerate(order)}
    return EnumerationResult(float(best) + float(cur0.sum()), dict(sorted(assignment.items())), int(nodes))


def exact_enumerate(instance: Instance, buckets: BucketSet, limit: float = DEFAULT_LIMIT,
                    prune: bool = True) -> EnumerationResult:
    """Optimal bucket assignment by depth-first enumeration."""
    return best_assignment(instance, buckets, prune=prune, limit=limit)
