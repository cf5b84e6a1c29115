"""Road networks, vehicles, instances and the route graph.

An instance is a directed road network, a set of vehicles that each follow a
fixed route (a directed path given as edge indices) inside a departure/arrival
window, a platoon size limit and the two fuel-saving rates.  The route graph
is the union of all routes; its undirected shape (tree, forest, or loopy)
decides which solvers apply.
"""
from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Hashable, Iterable, Mapping, Sequence

from .errors import DisconnectedRoute, InfeasibleVehicle, InvalidInstance, NotATree

EPS = 1e-9

Node = Hashable


def node_key(node: Node):
    """Total order on node ids that tolerates mixing ints and strings."""
    if isinstance(node, bool):
        return (1, str(node))
    if isinstance(node, (int, float)):
        return (0, node, "")
    if isinstance(node, str):
        return (1, node)
    # split nodes created by loop breaking are tuples; keep them last
    return (2, repr(node))


@dataclass(frozen=True)
class Edge:
    tail: Node
    head: Node
    time: float
    cost: float


@dataclass(frozen=True)
class RoadNetwork:
    nodes: tuple
    edges: tuple[Edge, ...]
    positions: Mapping[Node, tuple[float, float]] | None = None

    def __post_init__(self):
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            raise InvalidInstance("duplicate node ids")
        for k, e in enumerate(self.edges):
            if e.tail not in known or e.head not in known:
                raise InvalidInstance(f"edge {k} references an unknown node")
            if e.tail == e.head:
                raise InvalidInstance(f"edge {k} is a self-loop")
            if not (e.time > 0 and e.cost > 0):
                raise InvalidInstance(f"edge {k} needs a positive time and cost")


@dataclass(frozen=True)
class Vehicle:
    id: int
    origin: Node
    dest: Node
    t_depart_min: float
    t_arrive_max: float
    route: tuple[int, ...]


@dataclass(frozen=True)
class Instance:
    network: RoadNetwork
    vehicles: tuple[Vehicle, ...]
    lam: int | None = None
    sigma_l: float = 0.0
    sigma_f: float = 0.0
    name: str = ""

    def __post_init__(self):
        ordered = tuple(sorted(self.vehicles, key=lambda v: v.id))
        object.__setattr__(self, "vehicles", ordered)
        ids = [v.id for v in ordered]
        if len(set(ids)) != len(ids):
            raise InvalidInstance("duplicate vehicle ids")
        if any(i < 0 for i in ids):
            raise InvalidInstance("vehicle ids must be non-negative integers")
        if self.lam is not None and (int(self.lam) != self.lam or self.lam < 2):
            raise InvalidInstance("platoon size limit must be an integer >= 2 or unbounded")
        for s in (self.sigma_l, self.sigma_f):
            if not 0.0 <= s < 1.0:
                raise InvalidInstance("saving rates must lie in [0, 1)")
        for v in ordered:
            self._check_vehicle(v)

    def _check_vehicle(self, v: Vehicle) -> None:
        edges = self.network.edges
        if not v.route:
            raise DisconnectedRoute(f"vehicle {v.id} has an empty route")
        for k in v.route:
            if not 0 <= k < len(edges):
                raise DisconnectedRoute(f"vehicle {v.id} uses unknown edge {k}")
        if edges[v.route[0]].tail != v.origin or edges[v.route[-1]].head != v.dest:
            raise DisconnectedRoute(f"vehicle {v.id}: route does not join origin to destination")
        seen = {v.origin}
        for a, b in zip(v.route, v.route[1:]):
            if edges[a].head != edges[b].tail:
                raise DisconnectedRoute(f"vehicle {v.id}: edges {a} and {b} are not consecutive")
        for k in v.route:
            if edges[k].head in seen:
                raise DisconnectedRoute(f"vehicle {v.id}: route revisits node {edges[k].head!r}")
            seen.add(edges[k].head)
        total = sum(edges[k].time for k in v.route)
        if v.t_arrive_max - v.t_depart_min < total - EPS:
            raise InfeasibleVehicle(
                f"vehicle {v.id}: window {v.t_arrive_max - v.t_depart_min} shorter than route time {total}"
            )

    # ------------------------------------------------------------------ lookups
    @cached_property
    def by_id(self) -> dict[int, Vehicle]:
        return {v.id: v for v in self.vehicles}

    @property
    def ids(self) -> list[int]:
        return [v.id for v in self.vehicles]

    def vehicle(self, vid: int) -> Vehicle:
        return self.by_id[vid]

    @cached_property
    def route_nodes(self) -> dict[int, list[Node]]:
        edges = self.network.edges
        return {v.id: [v.origin] + [edges[k].head for k in v.route] for v in self.vehicles}

    @cached_property
    def route_sets(self) -> dict[int, frozenset[int]]:
        return {v.id: frozenset(v.route) for v in self.vehicles}

    @cached_property
    def prefix_time(self) -> dict[int, dict[Node, float]]:
        """Travel time from each vehicle's origin to every node on its route."""
        edges = self.network.edges
        out = {}
        for v in self.vehicles:
            acc, table = 0.0, {v.origin: 0.0}
            for k in v.route:
                acc += edges[k].time
                table[edges[k].head] = acc
            out[v.id] = table
        return out

    def route_time(self, vid: int) -> float:
        v = self.by_id[vid]
        return self.prefix_time[vid][v.dest]

    @cached_property
    def vehicles_on_edge(self) -> dict[int, frozenset[int]]:
        acc = defaultdict(set)
        for v in self.vehicles:
            for k in v.route:
                acc[k].add(v.id)
        return {k: frozenset(s) for k, s in sorted(acc.items())}

    def with_vehicles(self, vehicles: Iterable[Vehicle], **changes) -> "Instance":
        kw = dict(network=self.network, vehicles=tuple(vehicles), lam=self.lam,
                  sigma_l=self.sigma_l, sigma_f=self.sigma_f, name=self.name)
        kw.update(changes)
        return Instance(**kw)

    # ------------------------------------------------------------ serialization
    def to_dict(self) -> dict[str, Any]:
        net = self.network
        d: dict[str, Any] = {
            "nodes": list(net.nodes),
            "edges": [{"from": e.tail, "to": e.head, "time": e.time, "cost": e.cost} for e in net.edges],
            "vehicles": [
                {"id": v.id, "origin": v.origin, "dest": v.dest, "t_depart_min": v.t_depart_min,
                 "t_arrive_max": v.t_arrive_max, "route": list(v.route)}
                for v in self.vehicles
            ],
            "lambda": self.lam,
            "sigma_l": self.sigma_l,
            "sigma_f": self.sigma_f,
        }
        if net.positions is not None:
            d["positions"] = {str(n): list(p) for n, p in net.positions.items()}
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Instance":
        try:
            nodes = tuple(d["nodes"])
            edges = tuple(Edge(e["from"], e["to"], float(e["time"]), float(e["cost"])) for e in d["edges"])
            positions = None
            if d.get("positions") is not None:
                lookup = {str(n): n for n in nodes}
                positions = {lookup[k]: tuple(p) for k, p in d["positions"].items()}
            vehicles = tuple(
                Vehicle(int(v["id"]), v["origin"], v["dest"], float(v["t_depart_min"]),
                        float(v["t_arrive_max"]), tuple(int(k) for k in v["route"]))
                for v in d["vehicles"]
            )
            lam = d.get("lambda")
            return cls(RoadNetwork(nodes, edges, positions), vehicles,
                       None if lam is None else int(lam), float(d.get("sigma_l", 0.0)),
                       float(d.get("sigma_f", 0.0)), str(d.get("name", "")))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInstance(f"malformed instance: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))


def load_instance(path) -> Instance:
    with open(path) as fh:
        return Instance.from_json(fh.read())


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        fh.write(inst.to_json())


# ---------------------------------------------------------------- route graph
@dataclass(frozen=True)
class RouteGraph:
    """Union of all routes together with its undirected shape."""

    instance: Instance
    edges: tuple[int, ...]
    nodes: tuple
    kind: str  # "single-tree", "forest" or "has-loops"
    components: tuple[frozenset[int], ...] = field(default=())  # edge sets, one per component
    roots: tuple = field(default=())  # one root per component (trees and forests only)
    potential: Mapping[Node, float] = field(default_factory=dict)
    component_of: Mapping[Node, int] = field(default_factory=dict)

    @property
    def root(self) -> Node:
        if self.kind != "single-tree":
            raise NotATree("a single root exists only for single-tree route graphs")
        return self.roots[0]

    @property
    def vehicles_on_edge(self) -> dict[int, frozenset[int]]:
        return self.instance.vehicles_on_edge

    def is_tree_like(self) -> bool:
        return self.kind in ("single-tree", "forest")


def undirected_components(edge_ids: Iterable[int], edges: Sequence[Edge]):
    """Union-find over the given edges; returns (components, has_cycle)."""
    parent: dict[Node, Node] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    cycle = False
    ids = list(edge_ids)
    for k in ids:
        a, b = find(edges[k].tail), find(edges[k].head)
        if a == b:
            cycle = True
        else:
            parent[a] = b
    groups: dict[Node, set[int]] = defaultdict(set)
    for k in ids:
        groups[find(edges[k].tail)].add(k)
    return [frozenset(g) for g in groups.values()], cycle


def tree_root(edge_ids: Iterable[int], edges: Sequence[Edge]) -> Node:
    """Lowest node id with zero in-degree; falls back to the lowest node id."""
    ids = list(edge_ids)
    nodes = {edges[k].tail for k in ids} | {edges[k].head for k in ids}
    heads = {edges[k].head for k in ids}
    sources = [n for n in nodes if n not in heads] or list(nodes)
    return min(sources, key=node_key)


def tree_potentials(edge_ids: Iterable[int], edges: Sequence[Edge], root: Node) -> dict[Node, float]:
    """Relative time of every node with respect to ``root`` on a tree.

    The value at node ``n`` is the sum of forward edge times minus the sum of
    backward edge times along the tree path from ``n`` to ``root``; relative
    time between two nodes is then a difference of potentials.
    """
    adj: dict[Node, list[tuple[Node, float]]] = defaultdict(list)
    for k in edge_ids:
        e = edges[k]
        adj[e.tail].append((e.head, -e.time))
        adj[e.head].append((e.tail, e.time))
    pot = {root: 0.0}
    queue = deque([root])
    while queue:
        n = queue.popleft()
        for m, delta in adj[n]:
            if m not in pot:
                pot[m] = pot[n] + delta
                queue.append(m)
    return pot


def build_route_graph(instance: Instance) -> RouteGraph:
    """Union of routes, its classification, roots and node potentials."""
    edges = instance.network.edges
    used = tuple(sorted(instance.vehicles_on_edge))
    nodes = {edges[k].tail for k in used} | {edges[k].head for k in used}
    comps, cycle = undirected_components(used, edges)
    comps.sort(key=lambda c: min(c))
    if cycle:
        return RouteGraph(instance, used, tuple(sorted(nodes, key=node_key)), "has-loops", tuple(comps))
    roots, potential, component_of = [], {}, {}
    for ci, comp in enumerate(comps):
        r = tree_root(comp, edges)
        roots.append(r)
        pot = tree_potentials(comp, edges, r)
        potential.update(pot)
        for n in pot:
            component_of[n] = ci
    kind = "single-tree" if len(comps) == 1 else "forest"
    return RouteGraph(instance, used, tuple(sorted(nodes, key=node_key)), kind, tuple(comps),
                      tuple(roots), potential, component_of)


def split_components(instance: Instance) -> list[Instance]:
    """Split a forest instance into one sub-instance per tree."""
    edges = instance.network.edges
    comps, _ = undirected_components(instance.vehicles_on_edge, edges)
    comps.sort(key=lambda c: min(c))
    out = []
    for comp in comps:
        vs = [v for v in instance.vehicles if v.route[0] in comp]
        out.append(instance.with_vehicles(vs))
    return out


# ------------------------------------------------------------ shared structure
def maximal_ideal_paths(graph: RouteGraph) -> set[tuple[tuple[int, ...], frozenset[int]]]:
    """All maximal directed paths shared by at least two vehicles.

    A path is ideal when at least two vehicles traverse every edge of it, and
    maximal when no single-edge extension at either end keeps the same set of
    sharing vehicles.
    """
    inst = graph.instance
    edges = inst.network.edges
    on_edge = inst.vehicles_on_edge
    out_edges: dict[Node, list[int]] = defaultdict(list)
    in_edges: dict[Node, list[int]] = defaultdict(list)
    for k in graph.edges:
        out_edges[edges[k].tail].append(k)
        in_edges[edges[k].head].append(k)

    found = set()

    def extend(path: list[int], shared: frozenset[int], visited: set):
        last = edges[path[-1]].head
        first = edges[path[0]].tail
        grow_fwd = [k for k in out_edges[last] if shared <= on_edge[k]]
        grow_bwd = [k for k in in_edges[first] if shared <= on_edge[k]]
        if not grow_fwd and not grow_bwd:
            found.add((tuple(path), shared))
        for k in out_edges[last]:
            nxt = shared & on_edge[k]
            if len(nxt) >= 2 and edges[k].head not in visited:
                extend(path + [k], nxt, visited | {edges[k].head})

    for k in graph.edges:
        if len(on_edge[k]) >= 2:
            extend([k], on_edge[k], {edges[k].tail, edges[k].head})
    return found


def _components(vertices: Sequence[int], adjacent) -> list[list[int]]:
    seen, comps = set(), []
    for s in vertices:
        if s in seen:
            continue
        comp, stack = [], [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in vertices:
                if w not in seen and adjacent(u, w):
                    seen.add(w)
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def _bipartition(comps):
    if len(comps) < 2:
        return None
    first = frozenset(comps[0])
    rest = frozenset(v for c in comps[1:] for v in c)
    return first, rest


def is_decomposable(graph: RouteGraph):
    """Split vehicles into two groups whose routes never share an edge, if possible."""
    inst = graph.instance
    rs = inst.route_sets
    comps = _components(inst.ids, lambda u, w: bool(rs[u] & rs[w]))
    return _bipartition(comps)


def is_separable(instance: Instance, feasibility: Mapping[int, Iterable[int]]):
    """Split vehicles into two groups with no vehicle pair that both shares an
    edge and has a common feasible bucket, if such a split exists."""
    rs = instance.route_sets
    fs = {v: set(feasibility[v]) for v in instance.ids}
    comps = _components(instance.ids, lambda u, w: bool(rs[u] & rs[w]) and bool(fs[u] & fs[w]))
    return _bipartition(comps)
