"""Random instance generators.

All generators are pure functions of their arguments; randomness comes from
``numpy.random.default_rng(seed)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .errors import InvalidParams, NoPath
from .model import Edge, Instance, RoadNetwork, Vehicle, undirected_components

ANGLES = (0.0, math.pi / 6, -math.pi / 6, math.pi / 3, -math.pi / 3,
          2 * math.pi / 3, -2 * math.pi / 3, 5 * math.pi / 6, -5 * math.pi / 6, math.pi)
UPWARD = {math.pi / 6, math.pi / 3, 2 * math.pi / 3, 5 * math.pi / 6}
RIGHTWARD = {0.0, math.pi / 6, -math.pi / 6, math.pi / 3, -math.pi / 3}
MAX_ATTACH_DEGREE = 3


def _angle_weights(x: float, y: float) -> np.ndarray:
    favored = set()
    if y > 0:
        favored |= UPWARD
    if x > 0:
        favored |= RIGHTWARD
    w = np.array([2.0 if a in favored else 1.0 for a in ANGLES])
    return w / w.sum()


def gen_artifnet(edge_count: int, seed: int | None = None) -> RoadNetwork:
    """Tree grown from a node at the origin by random attachment.

    A node accepts a new edge while its degree is at most three.  Edges point
    from the end with the smaller x coordinate to the larger one, so routes
    run left to right.
    """
    if edge_count < 1:
        raise InvalidParams("edge_count must be at least 1")
    rng = np.random.default_rng(seed)
    pos = [(0.0, 0.0)]
    degree = [0]
    edges = []
    for _ in range(edge_count):
        active = [n for n, d in enumerate(degree) if d <= MAX_ATTACH_DEGREE]
        a = int(active[rng.integers(len(active))])
        x, y = pos[a]
        theta = ANGLES[int(rng.choice(len(ANGLES), p=_angle_weights(x, y)))]
        length = float(rng.uniform(1.0, 1.5))
        b = len(pos)
        pos.append((x + length * math.cos(theta), y + length * math.sin(theta)))
        degree.append(1)
        degree[a] += 1
        tail, head = (a, b) if pos[a][0] <= pos[b][0] else (b, a)
        edges.append(Edge(tail, head, length, length))
    return RoadNetwork(tuple(range(len(pos))), tuple(edges), {n: p for n, p in enumerate(pos)})


def _digraph(network: RoadNetwork) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(network.nodes)
    for k, e in enumerate(network.edges):
        if not g.has_edge(e.tail, e.head) or g[e.tail][e.head]["time"] > e.time:
            g.add_edge(e.tail, e.head, time=e.time, index=k)
    return g


def _route_edges(g: nx.DiGraph, nodes: Sequence) -> tuple[int, ...]:
    return tuple(g[a][b]["index"] for a, b in zip(nodes, nodes[1:]))


def _is_forest(edge_ids: Iterable[int], edges: Sequence[Edge]) -> bool:
    return not undirected_components(edge_ids, edges)[1]


def _tree_cast(g: nx.DiGraph, network: RoadNetwork, union: set, nodes: list) -> tuple[int, ...] | None:
    """Route along ``nodes`` or, when that closes a loop, the same route with
    its middle replaced by the union's path between the first and last nodes
    it shares with the union.  None when neither keeps the union a forest."""
    route = _route_edges(g, nodes)
    if _is_forest(union | set(route), network.edges):
        return route
    seen = {network.edges[k].tail for k in union} | {network.edges[k].head for k in union}
    touch = [i for i, n in enumerate(nodes) if n in seen]
    if len(touch) < 2:
        return None
    f, l = touch[0], touch[-1]
    sub = g.edge_subgraph([(network.edges[k].tail, network.edges[k].head) for k in union])
    try:
        middle = nx.shortest_path(sub, nodes[f], nodes[l], weight="time")
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        return None
    recast = list(nodes[:f]) + list(middle) + list(nodes[l + 1:])
    if len(set(recast)) != len(recast):
        return None
    route = _route_edges(g, recast)
    return route if _is_forest(union | set(route), network.edges) else None


def _side(network: RoadNetwork, sign: int) -> list:
    if not network.positions:
        raise InvalidParams("default regions need node positions")
    return [n for n in network.nodes if sign * network.positions[n][0] > 0]


def gen_vehicles(network: RoadNetwork, N: int, origin_region: Sequence | None = None,
                 dest_region: Sequence | None = None, seed: int | None = None,
                 max_attempts: int | None = None) -> list[Vehicle]:
    """``N`` vehicles on shortest paths whose union is a tree (or forest).

    Origins are drawn among region nodes that reach some destination node and
    each destination among those the origin reaches.  Routes are admitted one
    at a time and recast onto the existing union when they would close a loop;
    a pair whose route cannot be recast is redrawn.  Time windows are left
    open; see :func:`gen_time_windows`.
    """
    if N < 1:
        raise InvalidParams("need at least one vehicle")
    origins = list(origin_region) if origin_region is not None else _side(network, -1)
    dests = list(dest_region) if dest_region is not None else _side(network, 1)
    if not origins or not dests:
        raise InvalidParams("origin and destination regions must be non-empty")
    rng = np.random.default_rng(seed)
    g = _digraph(network)
    dest_set = set(dests)
    reach = {o: sorted((set(nx.descendants(g, o)) & dest_set) - {o}, key=str) for o in origins}
    starts = [o for o in origins if reach[o]]
    if not starts:
        raise NoPath("no destination node is reachable from any origin node")
    union: set = set()
    out = []
    attempts = 0
    limit = max_attempts or 50 * N
    while len(out) < N:
        attempts += 1
        if attempts > limit:
            raise NoPath(f"could not place {N} tree-compatible routes in {limit} draws")
        o = starts[int(rng.integers(len(starts)))]
        d = reach[o][int(rng.integers(len(reach[o])))]
        nodes = nx.shortest_path(g, o, d, weight="time")
        route = _tree_cast(g, network, union, nodes)
        if route is None:
            continue
        union |= set(route)
        out.append(Vehicle(len(out), network.edges[route[0]].tail, network.edges[route[-1]].head,
                           0.0, math.inf, route))
    return out


def gen_time_windows(network: RoadNetwork, vehicles: Sequence[Vehicle], gamma_full: float,
                     gamma_ext: float, seed: int | None = None) -> list[Vehicle]:
    """Departures uniform on ``[0, gamma_full * mean route time]`` and slack
    ``gamma_ext`` times each vehicle's own route time."""
    if gamma_ext < 0 or gamma_full < 0:
        raise InvalidParams("gamma parameters must be non-negative")
    rng = np.random.default_rng(seed)
    length = [sum(network.edges[k].time for k in v.route) for v in vehicles]
    horizon = gamma_full * float(np.mean(length))
    out = []
    for v, L in zip(vehicles, length):
        t0 = float(rng.uniform(0.0, horizon))
        out.append(Vehicle(v.id, v.origin, v.dest, t0, t0 + (1.0 + gamma_ext) * L, v.route))
    return out


@dataclass(frozen=True)
class GenParams:
    edge_count: int = 100
    N: int = 100
    gamma_full: float = 50.0
    gamma_ext: float = 2.0
    seed: int = 0
    lam: int | None = None
    sigma_l: float = 0.05
    sigma_f: float = 0.1
    network: str = "artifnet"  # or "custom"

    def __post_init__(self):
        if self.N < 1 or self.edge_count < 1:
            raise InvalidParams("N and edge_count must be positive")
        if not self.gamma_full > self.gamma_ext >= 0:
            raise InvalidParams("need gamma_full > gamma_ext >= 0")


def _streams(seed: int, k: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k)]


def generate(params: GenParams, network: RoadNetwork | None = None) -> Instance:
    """Network (unless given), vehicles and windows from one seed."""
    s_net, s_veh, s_tw = _streams(params.seed, 3)
    if network is None:
        if params.network != "artifnet":
            raise InvalidParams("a custom network kind needs a network")
        network = gen_artifnet(params.edge_count, s_net)
    vehicles = gen_vehicles(network, params.N, seed=s_veh)
    vehicles = gen_time_windows(network, vehicles, params.gamma_full, params.gamma_ext, s_tw)
    name = f"{params.network}-{params.edge_count}e-{params.N}v-s{params.seed}"
    return Instance(network, tuple(vehicles), params.lam, params.sigma_l, params.sigma_f, name)


def with_time_windows(instance: Instance, gamma_full: float, gamma_ext: float, seed: int | None = None) -> Instance:
    vs = gen_time_windows(instance.network, instance.vehicles, gamma_full, gamma_ext, seed)
    return instance.with_vehicles(vs)


def gen_from_uet(task_windows: Sequence[tuple[int, int]], cost: float = 1.0, sigma_f: float = 0.1) -> Instance:
    """All vehicles on one unit-time edge, one per unit task.

    Task ``(a, b)`` may run in any unit slot inside ``[a, b]``.  Its RTW is
    ``[a, b - 1/2]``, so two RTWs meet exactly when the tasks have a slot in
    common and windows that merely touch stay apart.  The optimum is
    ``cost * sigma_f * (n - m)`` where ``m`` is the fewest groups of tasks
    sharing a slot.
    """
    if not task_windows:
        raise InvalidParams("need at least one task")
    if any(not b > a for a, b in task_windows):
        raise InvalidParams("every task window needs at least one unit slot")
    net = RoadNetwork((0, 1), (Edge(0, 1, 1.0, cost),))
    vs = tuple(Vehicle(i, 0, 1, float(a), float(b) + 0.5, (0,)) for i, (a, b) in enumerate(task_windows))
    return Instance(net, vs, None, 0.0, sigma_f, "uet")


def random_tree_instance(n_vehicles: int, n_nodes: int, seed: int | None = None, horizon: int = 6,
                         max_slack: int = 3, lam: int | None = None, sigma_l: float = 0.05,
                         sigma_f: float = 0.1, integer_times: bool = True) -> Instance:
    """Small instance on a random in-tree (every edge points toward node 0).

    Each vehicle drives from a random node to one of its ancestors, so routes
    merge as they approach the root.  With ``integer_times`` off, travel
    times, departures and slacks are continuous, so no two RTWs share an
    endpoint (almost surely).
    """
    if n_nodes < 2:
        raise InvalidParams("need at least two nodes")
    rng = np.random.default_rng(seed)
    parent = {k: int(rng.integers(k)) for k in range(1, n_nodes)}
    times = {k: float(rng.integers(1, 3)) if integer_times else float(rng.uniform(0.5, 2.0))
             for k in parent}
    costs = {k: float(rng.integers(1, 4)) for k in parent}
    edges = tuple(Edge(k, parent[k], times[k], costs[k]) for k in range(1, n_nodes))
    net = RoadNetwork(tuple(range(n_nodes)), edges)
    vs = []
    for i in range(n_vehicles):
        o = int(rng.integers(1, n_nodes))
        chain = [o]
        while chain[-1] != 0:
            chain.append(parent[chain[-1]])
        d = chain[int(rng.integers(1, len(chain)))]
        route = tuple(n - 1 for n in chain[:chain.index(d)])
        L = sum(times[n] for n in chain[:chain.index(d)])
        if integer_times:
            t0 = float(rng.integers(0, horizon + 1))
            slack = float(rng.integers(0, max_slack + 1))
        else:
            t0 = float(rng.uniform(0, horizon))
            slack = float(rng.uniform(0, max_slack))
        vs.append(Vehicle(i, o, d, t0, t0 + L + slack, route))
    return Instance(net, tuple(vs), lam, sigma_l, sigma_f, f"tree-{n_nodes}n-{n_vehicles}v-s{seed}")
