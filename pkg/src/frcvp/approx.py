"""Approximation algorithms and heuristics on tree instances.

Two greedy schemes (pairwise two-bucket and iterative best-bucket), an exact
rule for the case where every bucket holds a disjoint set of interacting
vehicles, an approximation scheme built on heavy-edge contraction and
sub-tree enumeration, and randomized rounding of a linear relaxation.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import CapacityNotSupported, SearchSpaceTooLarge
from .milp import build_lp_relax, x_name
from .model import Instance, Node, node_key
from .objective import evaluate_assignment, group_saving, set_saving
from .solvers.enumerate import DEFAULT_LIMIT, best_assignment
from .solvers.simplex import simplex_solve
from .timewin import BucketSet


class ApproxResult(NamedTuple):
    value: float
    assignment: dict


class PtasResult(NamedTuple):
    value: float
    assignment: dict
    guarantee: bool


class RoundingResult(NamedTuple):
    value: float  # best of the draws
    assignment: dict
    mean: float  # average over the draws
    lp_value: float
    expected: float  # exact expectation of a single draw


def _require_unbounded(instance: Instance, what: str) -> None:
    if instance.lam is not None:
        raise CapacityNotSupported(f"{what} assumes unbounded platoon size")


def _complete(instance: Instance, buckets: BucketSet, partial: Mapping[int, int]) -> dict:
    """Fill in unplaced vehicles with their first feasible bucket."""
    out = dict(partial)
    for v in instance.ids:
        if v not in out:
            out[v] = buckets.feasibility[v][0]
    return dict(sorted(out.items()))


def lower_bound_ratio(T: int, sigma_l: float, sigma_f: float) -> float:
    """Guaranteed fraction of the optimum reached by :func:`greedy_two_bucket`."""
    return (4 * sigma_l + 6 * sigma_f) / ((4 * sigma_l + 5 * sigma_f) * T)


# ------------------------------------------------------------- two buckets
def split_two_buckets(instance: Instance, buckets: BucketSet, t1: int, t2: int):
    """Greedy split of the vehicles feasible at ``t1`` or ``t2``.

    Returns (value, vehicles placed at t1, vehicles placed at t2).  Vehicles
    feasible at both go where their marginal saving, measured only on edges
    not shared by two such vehicles, is larger (ties go to ``t1``).
    """
    feas = {v: set(buckets.feasibility[v]) for v in instance.ids}
    V1 = [v for v in instance.ids if t1 in feas[v] and t2 not in feas[v]]
    V2 = [v for v in instance.ids if t2 in feas[v] and t1 not in feas[v]]
    V3 = [v for v in instance.ids if t1 in feas[v] and t2 in feas[v]]
    rs = instance.route_sets
    count = defaultdict(int)
    for v in V3:
        for e in rs[v]:
            count[e] += 1
    E0 = {e for e, n in count.items() if n >= 2}
    U1, U2 = [], []
    for v in V3:
        Ev = rs[v] - E0
        d1 = set_saving(instance, V1 + [v], Ev) - set_saving(instance, V1, Ev)
        d2 = set_saving(instance, V2 + [v], Ev) - set_saving(instance, V2, Ev)
        (U1 if d1 >= d2 else U2).append(v)
    A, B = V1 + U1, V2 + U2
    return set_saving(instance, A) + set_saving(instance, B), A, B


def greedy_two_bucket(instance: Instance, buckets: BucketSet) -> ApproxResult:
    """Best of all single-bucket groupings and all greedy two-bucket splits.

    The value is the grouping's own saving; vehicles it leaves out are put in
    their first feasible bucket, which can only add saving.
    """
    _require_unbounded(instance, "the two-bucket greedy")
    T = len(buckets)
    best_val, best = -math.inf, {}
    for t in range(T):
        W = buckets.vehicles_at(t)
        val = set_saving(instance, W)
        if val > best_val:
            best_val, best = val, {v: t for v in W}
    for t1, t2 in combinations(range(T), 2):
        val, A, B = split_two_buckets(instance, buckets, t1, t2)
        if val > best_val:
            best_val = val
            best = {**{v: t1 for v in A}, **{v: t2 for v in B}}
    return ApproxResult(max(best_val, 0.0), _complete(instance, buckets, best))


# --------------------------------------------------------------- iterative
def _iterative(instance: Instance, buckets: BucketSet, vehicles: Iterable[int],
               edges: Iterable[int] | None = None, fixed: Mapping[int, int] | None = None) -> dict:
    """Repeatedly commit the bucket whose feasible unplaced vehicles save the
    most, counted on ``edges`` and on top of ``fixed`` vehicles."""
    lam, sl, sf = instance.lam, instance.sigma_l, instance.sigma_f
    net = instance.network.edges
    keep = None if edges is None else set(edges)
    fixed = dict(fixed or {})
    base = defaultdict(int)
    for v, t in fixed.items():
        for e in instance.vehicle(v).route:
            if keep is None or e in keep:
                base[(e, t)] += 1
    left = set(vehicles)
    open_buckets = sorted({t for v in left for t in buckets.feasibility[v]})
    out = {}
    while left and open_buckets:
        best_q, best_t, best_vs = -math.inf, None, []
        for t in open_buckets:
            vs = [v for v in sorted(left) if t in buckets.feasibility[v]]
            cnt = defaultdict(int)
            for v in vs:
                for e in instance.vehicle(v).route:
                    if keep is None or e in keep:
                        cnt[e] += 1
            q = sum(net[e].cost * (group_saving(n + base[(e, t)], lam, sl, sf)
                                   - group_saving(base[(e, t)], lam, sl, sf)) for e, n in cnt.items())
            if q > best_q + 1e-12:
                best_q, best_t, best_vs = q, t, vs
        for v in best_vs:
            out[v] = best_t
        left -= set(best_vs)
        open_buckets.remove(best_t)
    return out


def greedy_iterative(instance: Instance, buckets: BucketSet) -> ApproxResult:
    """Iterative best-bucket greedy; ties go to the lowest bucket index."""
    a = _complete(instance, buckets, _iterative(instance, buckets, instance.ids))
    return ApproxResult(evaluate_assignment(instance, buckets, a).total, a)


# ------------------------------------------------------------ uniform case
def uniform_case_solve(instance: Instance, buckets: BucketSet, stats: dict | None = None) -> dict | None:
    """Optimal assignment when the interacting vehicles of different buckets
    are disjoint, else ``None``.

    For each bucket the interacting vehicles are those feasible there that
    share an edge with another vehicle feasible there.  ``stats['ops']``
    counts elementary steps (at most three per vehicle, bucket and edge).
    """
    _require_unbounded(instance, "the uniform-case rule")
    rs = instance.route_sets
    ops = 0
    owner: dict[int, int] = {}
    ok = True
    for t in range(len(buckets)):
        Vt = buckets.vehicles_at(t)
        cnt = defaultdict(int)
        for u in Vt:
            for e in rs[u]:
                cnt[e] += 1
                ops += 1
        for u in Vt:
            hit = False
            for e in rs[u]:
                ops += 1
                if cnt[e] >= 2:
                    hit = True
                    break
            if hit:
                ops += 1
                if u in owner:
                    ok = False
                owner[u] = t
    if stats is not None:
        stats["ops"] = ops
    if not ok:
        return None
    return _complete(instance, buckets, owner)


# ------------------------------------------------------------------- PTAS
@dataclass(frozen=True)
class Contraction:
    """Tree left after merging the endpoints of heavy edges."""

    edges: dict  # edge id -> (tail, head) in merged node labels
    removed: tuple[int, ...]
    merged: dict  # original node -> representative


def heavy_traffic_contract(instance: Instance, N0: int, edges: Iterable[int] | None = None) -> Contraction:
    """Contract every route edge used by at least ``N0`` vehicles."""
    on_edge = instance.vehicles_on_edge
    net = instance.network.edges
    ids = sorted(on_edge if edges is None else edges)
    parent: dict[Node, Node] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    removed = []
    for k in ids:
        find(net[k].tail), find(net[k].head)
        if len(on_edge[k]) >= N0:
            a, b = find(net[k].tail), find(net[k].head)
            lo, hi = sorted((a, b), key=node_key)
            parent[hi] = lo
            removed.append(k)
    gone = set(removed)
    kept = {k: (find(net[k].tail), find(net[k].head)) for k in ids if k not in gone}
    return Contraction(kept, tuple(removed), {n: find(n) for n in list(parent)})


def _adjacency(edges: Mapping[int, tuple]):
    out_e, in_e = defaultdict(list), defaultdict(list)
    for k in sorted(edges):
        u, w = edges[k]
        out_e[u].append(k)
        in_e[w].append(k)
    return out_e, in_e


def maximal_path(edges: Mapping[int, tuple], through: int | None = None) -> list[int]:
    """Longest directed path (lowest edge ids on ties), optionally forced
    through one edge.  The result cannot be extended at either end."""
    out_e, in_e = _adjacency(edges)
    fwd_memo, bwd_memo = {}, {}

    def fwd(n):
        if n not in fwd_memo:
            best = []
            for k in out_e[n]:
                cand = [k] + fwd(edges[k][1])
                if len(cand) > len(best):
                    best = cand
            fwd_memo[n] = best
        return fwd_memo[n]

    def bwd(n):
        if n not in bwd_memo:
            best = []
            for k in in_e[n]:
                cand = bwd(edges[k][0]) + [k]
                if len(cand) > len(best):
                    best = cand
            bwd_memo[n] = best
        return bwd_memo[n]

    pool = sorted(edges) if through is None else [through]
    best = []
    for k in pool:
        cand = bwd(edges[k][0]) + [k] + fwd(edges[k][1])
        if len(cand) > len(best):
            best = cand
    return best


def _component(edges: Mapping[int, tuple], start: Node, blocked_node=None, blocked_edge=None) -> set[int]:
    """Edges reachable from ``start`` without passing ``blocked_node`` or using ``blocked_edge``."""
    inc = defaultdict(list)
    for k, (u, w) in edges.items():
        if k == blocked_edge:
            continue
        inc[u].append((k, w))
        inc[w].append((k, u))
    seen_n, seen_e, stack = {start}, set(), [start]
    while stack:
        n = stack.pop()
        for k, m in inc[n]:
            if m == blocked_node or k in seen_e:
                continue
            seen_e.add(k)
            if m not in seen_n:
                seen_n.add(m)
                stack.append(m)
    return seen_e


class _Piece(frozenset):
    """Edge set of a sub-tree; ``by_size`` marks pieces cut by the size test on the path."""

    def __new__(cls, edges, by_size=False):
        obj = super().__new__(cls, edges)
        obj.by_size = by_size
        return obj


def _decompose(path: Sequence[int], edges: Mapping[int, tuple], N: int):
    tree = dict(edges)
    out: list[frozenset[int]] = []
    on_path = set(path)
    nodes = [tree[path[0]][0]] + [tree[k][1] for k in path]
    # branches hanging off the path are decomposed first
    for s in nodes:
        for k in sorted(tree):
            if k in on_path or s not in tree[k] or any(k in c for c in out):
                continue
            u, w = tree[k]
            ne = w if u == s else u
            branch = _component(tree, ne, blocked_node=s) | {k}
            sub = {j: tree[j] for j in branch}
            cuts, rest = _decompose(maximal_path(sub, through=k), sub, N)
            out += cuts
            if rest and not any(s in sub[j] for j in rest):
                out.append(_Piece(rest))
    for c in out:
        for k in c:
            tree.pop(k, None)
    r = tree[path[0]][0]
    for i, e in enumerate(path[:-1]):
        part = _component(tree, r, blocked_edge=e)
        if len(part) >= N:
            cut = _Piece(part | {e}, by_size=True)
            out.append(cut)
            for k in cut:
                tree.pop(k)
            r = edges[e][1]
    return out, frozenset(tree)


def tree_decompose(edges: Mapping[int, tuple], N1: int, path: Sequence[int] | None = None,
                   kinds: bool = False) -> list:
    """Cut a directed tree into sub-trees of roughly ``N1`` edges along a
    maximal path, after recursively cutting the branches off that path.

    Pieces left over in a branch stay attached to the path when they touch
    it; the final remainder is returned last.  With ``kinds`` every piece
    comes paired with True when the size test on a path cut it.
    """
    if not edges:
        return []
    P = list(path) if path is not None else maximal_path(edges)
    cuts, rest = _decompose(P, edges, N1)
    pieces = cuts + ([_Piece(rest)] if rest else [])
    if kinds:
        return [(frozenset(p), p.by_size) for p in pieces]
    return [frozenset(p) for p in pieces]


@dataclass(frozen=True)
class PtasParams:
    N0: int
    N1: int
    eps: float | None = None
    rho: float | None = None
    L: int | None = None
    d: int | None = None

    def guarantee(self, instance: Instance, T: int) -> bool:
        """True when the thresholds and regularity constants give the (1 - eps) bound."""
        if None in (self.eps, self.rho, self.L, self.d) or self.eps <= 0:
            return False
        net = instance.network.edges
        used = list(instance.vehicles_on_edge)
        costs = [net[k].cost for k in used]
        if not costs or min(costs) <= 0 or max(costs) / min(costs) > self.rho:
            return False
        if any(len(v.route) > self.L for v in instance.vehicles):
            return False
        deg_in, deg_out = defaultdict(int), defaultdict(int)
        for k in used:
            deg_out[net[k].tail] += 1
            deg_in[net[k].head] += 1
        if max(list(deg_in.values()) + list(deg_out.values())) > self.d:
            return False
        return (self.N0 >= (1 + 1 / self.eps) * T
                and self.N1 >= 5 * self.L ** 4 * self.N0 ** 3 * self.rho / self.eps)


def ptas(instance: Instance, buckets: BucketSet, params: PtasParams,
         limit: float = DEFAULT_LIMIT) -> PtasResult:
    """Contract heavy edges, cut the rest into sub-trees and enumerate each
    sub-tree's not-yet-fixed vehicles in turn.

    A sub-tree too large to enumerate is handled by the iterative greedy and
    clears the guarantee flag.
    """
    guarantee = params.guarantee(instance, len(buckets))
    con = heavy_traffic_contract(instance, params.N0)
    pieces: list[frozenset[int]] = []
    left = dict(con.edges)
    while left:
        comp = _component(left, left[min(left)][0])
        sub = {k: left.pop(k) for k in comp}
        pieces += tree_decompose(sub, params.N1)
    rs = instance.route_sets
    assignment: dict[int, int] = {}
    done: set[int] = set()
    for piece in pieces:
        touched = [v for v in instance.ids if rs[v] & piece]
        todo = [v for v in touched if v not in done]
        fixed = {v: assignment[v] for v in touched if v in assignment}
        try:
            res = best_assignment(instance, buckets, vehicles=todo, edges=piece, fixed=fixed, limit=limit)
            assignment.update(res.assignment)
        except SearchSpaceTooLarge:
            guarantee = False
            assignment.update(_iterative(instance, buckets, todo, piece, fixed))
        done |= set(touched)
    assignment = _complete(instance, buckets, assignment)
    return PtasResult(evaluate_assignment(instance, buckets, assignment).total, assignment, guarantee)


# --------------------------------------------------------- pairing bound
def pairing_assignment(instance: Instance, buckets: BucketSet):
    """Constructive pairing used to lower-bound the saving on a sub-tree.

    Pairs of vehicles that share an edge and a bucket and still cover a new
    edge are matched first; then single vehicles are attached to a matched
    vehicle.  Returns (assignment, matched vehicles, attached vehicles).
    """
    rs = instance.route_sets
    fs = {v: set(buckets.feasibility[v]) for v in instance.ids}
    covered: set[int] = set()
    matched: list[int] = []
    bucket_of: dict[int, int] = {}
    progress = True
    while progress:
        progress = False
        for a, b in combinations([v for v in instance.ids if v not in bucket_of], 2):
            common = fs[a] & fs[b]
            if (rs[a] | rs[b]) - covered and rs[a] & rs[b] and common:
                t = min(common)
                bucket_of[a] = bucket_of[b] = t
                matched += [a, b]
                covered |= rs[a] | rs[b]
                progress = True
                break
    attached: list[int] = []
    progress = True
    while progress:
        progress = False
        for u in instance.ids:
            if u in bucket_of:
                continue
            for v in matched:
                if rs[u] - covered and rs[u] & rs[v] and bucket_of[v] in fs[u]:
                    bucket_of[u] = bucket_of[v]
                    attached.append(u)
                    covered |= rs[u] | rs[v]
                    progress = True
                    break
            if progress:
                break
    return _complete(instance, buckets, bucket_of), matched, attached


def pairing_lower_bound(instance: Instance, N0: int, L: int) -> float:
    """Saving guaranteed by :func:`pairing_assignment` on an inseparable
    instance whose edges carry at most ``N0`` vehicles and routes at most ``L`` edges."""
    net = instance.network.edges
    cmin = min(net[k].cost for k in instance.vehicles_on_edge)
    n = len(instance.vehicles)
    return (instance.sigma_l + instance.sigma_f) * cmin * n / (2 * L * N0 * (L * N0 + 1))


# ------------------------------------------------------------- LP rounding
def rounding_expectation(instance: Instance, buckets: BucketSet, probs: Mapping[int, Mapping[int, float]]) -> float:
    """Expected saving when each vehicle independently picks bucket ``t``
    with probability ``probs[v][t]``.

    Per edge and bucket the head count is Poisson-binomial; its distribution
    is built one vehicle at a time.
    """
    _require_unbounded(instance, "the rounding expectation")
    net = instance.network.edges
    sl, sf = instance.sigma_l, instance.sigma_f
    total = 0.0
    for e, ve in instance.vehicles_on_edge.items():
        for t in range(len(buckets)):
            ps = [probs[v].get(t, 0.0) for v in ve]
            ps = [p for p in ps if p > 0]
            if len(ps) < 2:
                continue
            dist = np.zeros(len(ps) + 1)
            dist[0] = 1.0
            for p in ps:
                dist[1:] = dist[1:] * (1 - p) + dist[:-1] * p
                dist[0] *= 1 - p
            k = np.arange(len(ps) + 1)
            gain = np.where(k >= 2, sl + (k - 1) * sf, 0.0)
            total += net[e].cost * float(dist @ gain)
    return total


def lp_round(instance: Instance, buckets: BucketSet, reps: int = 50, seed=None) -> RoundingResult:
    """Sample each vehicle's bucket from the relaxation's x-values ``reps``
    times and keep the best draw."""
    _require_unbounded(instance, "LP rounding")
    model = build_lp_relax(instance, buckets)
    sol = simplex_solve(model)
    if sol.status != "optimal":
        raise CapacityNotSupported(f"relaxation is {sol.status}")
    vals = sol.values(model.dense)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    choices, probs = {}, {}
    for v in instance.ids:
        ks = list(buckets.feasibility[v])
        p = np.clip([vals[x_name(v, t)] for t in ks], 0.0, None)
        p = p / p.sum() if p.sum() > 0 else np.full(len(ks), 1.0 / len(ks))
        choices[v], probs[v] = ks, p
    expected = rounding_expectation(instance, buckets, {v: dict(zip(choices[v], probs[v])) for v in choices})
    best_val, best, total = -math.inf, None, 0.0
    for _ in range(max(1, reps)):
        a = {v: int(rng.choice(choices[v], p=probs[v])) for v in instance.ids}
        val = evaluate_assignment(instance, buckets, a).total
        total += val
        if val > best_val:
            best_val, best = val, a
    return RoundingResult(best_val, best, total / max(1, reps), sol.objective, expected)

