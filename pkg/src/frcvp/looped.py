"""Instances whose route graph has undirected loops.

Loops are broken by choosing a spanning tree, detaching the start node of
every off-tree path and cutting the routes that run through such a node into
virtual copies.  The copies of one vehicle must depart at the same offset
inside their windows; projecting bucket break points between copies (shift)
and across all windows (vertical) until nothing changes yields buckets on
which that coupling becomes a set of equalities between assignment variables.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable, Mapping

from .errors import LoopBreakIncomplete, NotATree, NotLoopy, QuantumViolated
from .milp import assignment_from_values, build_gva, build_va
from .model import EPS, Edge, Instance, RoadNetwork, RouteGraph, Vehicle, build_route_graph, node_key
from .objective import evaluate_schedule
from .timewin import RTW, BucketSet, adaptive_discretize, compute_rtws, discretize_intervals, feasible_indices


# ----------------------------------------------------------- tree and paths
def spanning_tree(graph: RouteGraph) -> frozenset[int]:
    """Depth-first spanning tree (edge ids) of every route-graph component.

    Each component starts at its lowest zero-in-degree node; neighbours are
    visited in edge-index order regardless of direction.
    """
    edges = graph.instance.network.edges
    inc = defaultdict(list)
    for k in graph.edges:
        inc[edges[k].tail].append((k, edges[k].head))
        inc[edges[k].head].append((k, edges[k].tail))
    for n in inc:
        inc[n].sort()
    heads = {edges[k].head for k in graph.edges}
    seen, tree = set(), set()
    starts = sorted(graph.nodes, key=lambda n: (n in heads, node_key(n)))
    for s in starts:
        if s in seen:
            continue
        seen.add(s)
        stack = [(s, iter(inc[s]))]
        while stack:
            node, it = stack[-1]
            for k, m in it:
                if m not in seen:
                    seen.add(m)
                    tree.add(k)
                    stack.append((m, iter(inc[m])))
                    break
            else:
                stack.pop()
    return frozenset(tree)


def maximal_deviated_paths(graph: RouteGraph, tree: Iterable[int] | None = None) -> list[tuple[int, ...]]:
    """Split the off-tree route edges into directed chains that start and end
    on tree nodes and pass only through nodes off the tree."""
    edges = graph.instance.network.edges
    tree = spanning_tree(graph) if tree is None else frozenset(tree)
    on_tree = {edges[k].tail for k in tree} | {edges[k].head for k in tree}
    if not tree:
        on_tree = set(graph.nodes)
    rest = sorted(set(graph.edges) - tree)
    out_edges = defaultdict(list)
    for k in rest:
        out_edges[edges[k].tail].append(k)
    used, paths = set(), []
    for k in rest:
        if k in used or edges[k].tail not in on_tree:
            continue
        path = [k]
        used.add(k)
        while edges[path[-1]].head not in on_tree:
            nxt = [j for j in out_edges[edges[path[-1]].head] if j not in used]
            if len(nxt) != 1:
                raise NotATree(f"off-tree edges at node {edges[path[-1]].head!r} do not form a simple chain")
            path.append(nxt[0])
            used.add(nxt[0])
        paths.append(tuple(path))
    if used != set(rest):
        raise NotATree("some off-tree edges are not reachable from the tree")
    return paths


# ----------------------------------------------------------- node splitting
@dataclass(frozen=True)
class LoopSplit:
    """Tree-shaped extended instance and how its vehicles map back."""

    instance: Instance
    ext_instance: Instance
    tree: frozenset[int]
    paths: tuple[tuple[int, ...], ...]
    split_nodes: dict  # path index -> new node label
    copies: dict  # parent vehicle -> ext ids, in route order (only vehicles that were cut)
    parent_of: dict  # ext id -> parent vehicle
    scope: dict  # ext id -> route edges it covers
    lead_time: dict  # ext id -> travel time from the parent's origin to the copy's origin

    @property
    def real(self) -> list[int]:
        return sorted(v for v in self.instance.ids if v not in self.copies)

    @property
    def virtual(self) -> list[int]:
        return sorted(self.copies)

    def members(self, v: int) -> list[int]:
        return list(self.copies.get(v, [v]))


def _split_label(node, k: int, taken: set):
    label = f"{node}/split{k}"
    while label in taken:
        label += "'"
    return label


def split_loops(instance: Instance, tree: Iterable[int] | None = None) -> LoopSplit:
    """Detach the start node of every deviated path and cut routes there."""
    graph = build_route_graph(instance)
    tree = spanning_tree(graph) if tree is None else frozenset(tree)
    paths = maximal_deviated_paths(graph, tree) if graph.kind == "has-loops" else []
    net = instance.network
    taken = set(net.nodes)
    new_tail = {}
    split_nodes = {}
    for i, p in enumerate(paths):
        label = _split_label(net.edges[p[0]].tail, i, taken)
        taken.add(label)
        split_nodes[i] = label
        new_tail[p[0]] = label
    edges = tuple(Edge(new_tail.get(k, e.tail), e.head, e.time, e.cost) for k, e in enumerate(net.edges))
    positions = None
    if net.positions:
        positions = dict(net.positions)
        for i, p in enumerate(paths):
            positions[split_nodes[i]] = net.positions.get(net.edges[p[0]].tail)
    ext_net = RoadNetwork(tuple(net.nodes) + tuple(split_nodes[i] for i in range(len(paths))), edges, positions)
    next_id = max(instance.ids) + 1
    vehicles, copies, parent_of, scope, lead = [], {}, {}, {}, {}
    for v in instance.vehicles:
        pieces, cur = [], [v.route[0]]
        for a, b in zip(v.route, v.route[1:]):
            if edges[a].head != edges[b].tail:
                pieces.append(cur)
                cur = []
            cur.append(b)
        pieces.append(cur)
        prefix = instance.prefix_time[v.id]
        total = instance.route_time(v.id)
        ids = [v.id] if len(pieces) == 1 else list(range(next_id, next_id + len(pieces)))
        if len(pieces) > 1:
            next_id += len(pieces)
            copies[v.id] = ids
        for cid, piece in zip(ids, pieces):
            start = prefix[net.edges[piece[0]].tail]
            end = prefix[net.edges[piece[-1]].head]
            vehicles.append(Vehicle(cid, edges[piece[0]].tail, edges[piece[-1]].head,
                                    v.t_depart_min + start, v.t_arrive_max - (total - end), tuple(piece)))
            parent_of[cid] = v.id
            scope[cid] = tuple(piece)
            lead[cid] = start
    ext = Instance(ext_net, tuple(vehicles), instance.lam, instance.sigma_l, instance.sigma_f,
                   f"{instance.name}-ext" if instance.name else "ext")
    if not build_route_graph(ext).is_tree_like():
        raise NotATree("splitting deviated-path start nodes did not remove every loop")
    return LoopSplit(instance, ext, tree, tuple(paths), split_nodes, copies, parent_of, scope, lead)


# --------------------------------------------------------- projection loop
@dataclass(frozen=True)
class VirtualVehicle:
    id: int
    parent: int
    index: int
    scope: tuple[int, ...]
    rtw: RTW


@dataclass(frozen=True)
class LoopBreakOutput:
    split: LoopSplit
    rtws: dict  # ext id -> RTW
    breakpoints: dict  # ext id -> sorted break points on its RTW
    bucket_set: BucketSet
    pairs: dict  # (parent, i, j) -> [(s, t)] bucket pairs at equal offsets
    status: str  # "converged" or "iteration-capped"
    iterations: int
    quantum: float | None

    @property
    def ext_instance(self) -> Instance:
        return self.split.ext_instance

    @property
    def copies(self) -> dict:
        return self.split.copies

    @property
    def V_real(self) -> list[int]:
        return self.split.real

    @property
    def V_vtl(self) -> list[int]:
        return self.split.virtual

    def virtual_vehicles(self, parent: int) -> list[VirtualVehicle]:
        return [VirtualVehicle(c, parent, i, self.split.scope[c], self.rtws[c])
                for i, c in enumerate(self.split.copies[parent])]

    def to_dict(self) -> dict:
        s = self.split
        return {
            "status": self.status,
            "iterations": self.iterations,
            "quantum": self.quantum,
            "spanning_tree": sorted(s.tree),
            "deviated_paths": [list(p) for p in s.paths],
            "split_nodes": {str(i): str(n) for i, n in s.split_nodes.items()},
            "copies": {str(v): ids for v, ids in s.copies.items()},
            "scopes": {str(u): list(p) for u, p in s.scope.items()},
            "rtws": {str(u): [w.lo, w.hi] for u, w in self.rtws.items()},
            "buckets": self.bucket_set.to_dict(),
            "pairs": [{"vehicle": v, "i": i, "j": j, "pairs": [list(p) for p in ps]}
                      for (v, i, j), ps in sorted(self.pairs.items())],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _on_lattice(x: float, q: float) -> bool:
    k = round(x / q)
    return abs(k * q - x) <= EPS * max(1.0, abs(x))


def loop_break(instance: Instance, quantum: float | None = 1.0, max_iter: int | None = None,
               check_quantum: bool = True, tree: Iterable[int] | None = None,
               point_buckets: bool = False) -> LoopBreakOutput:
    """Split loops, then refine buckets until every copy's break points are
    mirrored at the same offsets in its sibling copies and every break point
    is shared by all windows containing it.

    With ``quantum`` the window endpoints must be multiples of it (checked
    unless ``check_quantum`` is False) and the projection runs on integers,
    which bounds the number of break points and guarantees termination.

    ``point_buckets`` adds a singleton bucket at every break point, so a
    copy departing exactly on a bucket boundary can still platoon on both
    sides of a split; without it only touching windows get singletons.
    """
    if build_route_graph(instance).is_tree_like():
        raise NotLoopy("the route graph has no loops")
    split = split_loops(instance, tree)
    ext = split.ext_instance
    rtws = compute_rtws(ext, build_route_graph(ext))
    ends = [x for w in rtws.values() for x in (w.lo, w.hi)]
    lattice = quantum is not None and all(_on_lattice(x, quantum) for x in ends)
    if quantum is not None and check_quantum and not lattice:
        raise QuantumViolated(f"window endpoints are not multiples of {quantum}")
    if lattice:
        def key(x):
            return int(round(x / quantum))
        scale = quantum
    else:
        def key(x):
            return round(x, 9)
        scale = 1.0
    lo = {u: key(w.lo) for u, w in rtws.items()}
    hi = {u: key(w.hi) for u, w in rtws.items()}
    if max_iter is None:
        span = (max(ends) - min(ends)) / (quantum or 1.0)
        max_iter = max(10, int(math.ceil(10 * span)))
    initial = discretize_intervals([(w.lo, w.hi) for w in rtws.values()])
    cuts = sorted({key(x) for b in initial for x in b})
    points = {u: {x for x in cuts if lo[u] <= x <= hi[u]} | {lo[u], hi[u]} for u in rtws}
    ext_ids = sorted(rtws)
    mode, status, rounds = "shift", "iteration-capped", 0
    while rounds < max_iter:
        rounds += 1
        snap = {u: tuple(points[u]) for u in ext_ids}
        grew = False
        if mode == "shift":
            for v in split.virtual:
                members = split.copies[v]
                for ci in members:
                    for cj in members:
                        if ci == cj:
                            continue
                        shift = lo[ci] - lo[cj]
                        for a in snap[cj]:
                            p = a + shift if lattice else round(a + shift, 9)
                            if p not in points[ci]:
                                points[ci].add(p)
                                grew = True
        else:
            every = set().union(*snap.values())
            for u in ext_ids:
                inside = {a for a in every if lo[u] <= a <= hi[u]} - points[u]
                if inside:
                    points[u] |= inside
                    grew = True
        if not grew:
            status = "converged"
            break
        mode = "vertical" if mode == "shift" else "shift"
    pieces = []
    for u in ext_ids:
        pts = sorted(points[u])
        if len(pts) == 1:
            pieces.append((pts[0] * scale, pts[0] * scale))
        pieces += [(a * scale, b * scale) for a, b in zip(pts, pts[1:])]
    # singletons where one window ends and another starts (or a window is a
    # point), mirrored into sibling copies so the pairing stays one-to-one
    starts = set(lo.values())
    single = {x for x in hi.values() if x in starts} | {lo[u] for u in ext_ids if lo[u] == hi[u]}
    if point_buckets:
        single |= set().union(*points.values())
    grew = True
    while grew:
        size = len(single)
        for v in split.virtual:
            for ci, cj in permutations(split.copies[v], 2):
                single |= {x + lo[ci] - lo[cj] for x in single if lo[cj] <= x <= hi[cj]}
        grew = len(single) > size
    pieces += [(x * scale, x * scale) for x in sorted(single)]
    buckets = tuple((a, b) for a, b in discretize_intervals(pieces)
                    if b - a > 1e-9 or key(a / scale) in single)
    feas = {u: feasible_indices(buckets, w.lo, w.hi) for u, w in sorted(rtws.items())}
    bs = BucketSet(buckets, feas)
    pairs = {}
    for v in split.virtual:
        members = split.copies[v]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                ci, cj = members[i], members[j]
                by_offset = {}
                for t in feas[cj]:
                    a, b = buckets[t]
                    by_offset[(key(a) - lo[cj], key(b) - lo[cj])] = t
                found = []
                for s in feas[ci]:
                    a, b = buckets[s]
                    t = by_offset.get((key(a) - lo[ci], key(b) - lo[ci]))
                    if t is not None:
                        found.append((s, t))
                pairs[(v, i, j)] = found
    bp = {u: [p * scale for p in sorted(points[u])] for u in ext_ids}
    return LoopBreakOutput(split, rtws, bp, bs, pairs, status, rounds, quantum if lattice else None)


# ----------------------------------------------------------------- decode
def schedule_from_ext(split: LoopSplit, rtws: Mapping[int, RTW], buckets: BucketSet,
                      assignment: Mapping[int, int], chosen: Mapping[int, int] | None = None) -> dict:
    """Departure time of every original vehicle from bucket choices of its
    copies (the first copy, or ``chosen[v]``, decides)."""
    out = {}
    for v in split.instance.ids:
        c = (chosen or {}).get(v, split.members(v)[0])
        rel = buckets.midpoint(assignment[c])
        out[v] = rel - rtws[c].offset - split.lead_time[c]
    return out


def gva_schedule(lb: LoopBreakOutput, assignment: Mapping[int, int]) -> dict:
    return schedule_from_ext(lb.split, lb.rtws, lb.bucket_set, assignment)


@dataclass(frozen=True)
class LoopSolveResult:
    value: float
    schedule: dict
    status: str
    bound: float | None = None
    extra: dict = field(default_factory=dict)


def solve_gva(instance: Instance, quantum: float = 1.0, time_budget: float | None = None,
              point_buckets: bool = False) -> LoopSolveResult:
    """Bucket model for a loopy instance after loop breaking."""
    from .solvers.bnb import branch_and_bound

    lb = loop_break(instance, quantum, point_buckets=point_buckets)
    if lb.status != "converged":
        raise LoopBreakIncomplete("bucket projection did not converge")
    res = branch_and_bound(build_gva(lb), time_budget=time_budget)
    if res.values is None:
        return LoopSolveResult(float("nan"), {}, res.status, res.bound)
    a = assignment_from_values(res.values)
    sched = gva_schedule(lb, a)
    realized = evaluate_schedule(instance, sched).total
    return LoopSolveResult(realized, sched, res.status, res.bound,
                           {"model_value": res.objective, "buckets": len(lb.bucket_set)})


# -------------------------------------------------------------- heuristic
def copy_potential(split: LoopSplit, copy_id: int) -> float:
    """Saving available to a copy if every vehicle on its edges followed it."""
    inst = split.instance
    net = inst.network.edges
    on_edge = inst.vehicles_on_edge
    return sum(net[e].cost * inst.sigma_f * (len(on_edge[e]) - 1) for e in split.scope[copy_id])


def heuristic_single_copy(instance: Instance, method: str = "bnb", time_budget: float | None = None,
                          tree: Iterable[int] | None = None) -> LoopSolveResult:
    """Keep one copy per cut vehicle (largest potential, first on ties),
    solve the resulting tree instance and map the schedule back."""
    from .approx import greedy_iterative
    from .solvers.bnb import branch_and_bound

    split = split_loops(instance, tree)
    chosen = {}
    for v in split.virtual:
        members = split.copies[v]
        scores = [copy_potential(split, c) for c in members]
        chosen[v] = members[scores.index(max(scores))]
    keep = set(split.real) | set(chosen.values())
    sub = split.ext_instance.with_vehicles([u for u in split.ext_instance.vehicles if u.id in keep])
    rtws = compute_rtws(sub, build_route_graph(sub))
    bs = adaptive_discretize(rtws)
    status = "heuristic"
    if method == "greedy":
        assignment = greedy_iterative(sub, bs).assignment
    elif method == "bnb":
        res = branch_and_bound(build_va(sub, bs), time_budget=time_budget)
        status = res.status
        if res.values is None:
            return LoopSolveResult(float("nan"), {}, status)
        assignment = assignment_from_values(res.values)
    else:
        raise ValueError(f"unknown method {method!r}")
    sched = schedule_from_ext(split, rtws, bs, assignment, chosen)
    return LoopSolveResult(evaluate_schedule(instance, sched).total, sched, status,
                           extra={"chosen": chosen})
