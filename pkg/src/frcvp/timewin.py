"""Node time windows, relative time, relative time windows (RTWs) and the
adaptive time discretization that turns RTWs into shared time buckets."""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import EmptyInput, InvalidParams, NodeNotOnRoute, NotATree, NotConnected
from .model import EPS, Instance, Node, RouteGraph


@dataclass(frozen=True)
class NodeTimeWindow:
    vehicle: int
    node: Node
    lower: float
    upper: float


@dataclass(frozen=True)
class RTW:
    """Departure window of a vehicle measured in root-relative time.

    ``offset`` is the relative time of the vehicle's origin with respect to the
    root; absolute departure = relative instant - offset.
    """

    vehicle: int
    lo: float
    hi: float
    offset: float

    @property
    def width(self) -> float:
        return self.hi - self.lo


def node_time_window(instance: Instance, vid: int, node: Node) -> NodeTimeWindow:
    v = instance.vehicle(vid)
    prefix = instance.prefix_time[vid]
    if node not in prefix:
        raise NodeNotOnRoute(f"node {node!r} is not on the route of vehicle {vid}")
    total = prefix[v.dest]
    return NodeTimeWindow(vid, node, v.t_depart_min + prefix[node],
                          v.t_arrive_max - (total - prefix[node]))


def relative_time(graph: RouteGraph, s: Node, t: Node) -> float:
    """Forward minus backward edge time along the tree path from ``s`` to ``t``."""
    if not graph.is_tree_like():
        raise NotATree("relative time needs a tree-shaped route graph")
    comp = graph.component_of
    if s not in comp or t not in comp or comp[s] != comp[t]:
        raise NotConnected(f"{s!r} and {t!r} are not connected in the route graph")
    return graph.potential[s] - graph.potential[t]


def compute_rtws(instance: Instance, graph: RouteGraph) -> dict[int, RTW]:
    """One RTW per vehicle, relative to the root of its tree component."""
    if not graph.is_tree_like():
        raise NotATree("RTWs need a tree-shaped route graph; break loops first")
    out = {}
    for v in instance.vehicles:
        w = node_time_window(instance, v.id, v.origin)
        off = graph.potential[v.origin]
        out[v.id] = RTW(v.id, w.lower + off, w.upper + off, off)
    return out


def intervals_meet(a: RTW, b: RTW, eps: float = EPS) -> bool:
    return max(a.lo, b.lo) <= min(a.hi, b.hi) + eps


@dataclass(frozen=True)
class PseudoPlatoonGraph:
    """Interval graph on vehicles: adjacent iff their RTWs intersect."""

    vertices: tuple[int, ...]
    edges: frozenset[frozenset[int]]

    def adjacent(self, u: int, v: int) -> bool:
        return frozenset((u, v)) in self.edges

    def a(self, u: int, v: int) -> int:
        return int(self.adjacent(u, v))

    def is_clique(self, members: Iterable[int]) -> bool:
        return all(self.adjacent(u, v) for u, v in combinations(list(members), 2))


def pseudo_platoon_graph(rtws: Mapping[int, RTW]) -> PseudoPlatoonGraph:
    ids = sorted(rtws)
    edges = frozenset(frozenset((u, v)) for u, v in combinations(ids, 2)
                      if intervals_meet(rtws[u], rtws[v]))
    return PseudoPlatoonGraph(tuple(ids), edges)


def common_intersection(windows: Iterable[RTW]) -> tuple[float, float] | None:
    ws = list(windows)
    lo, hi = max(w.lo for w in ws), min(w.hi for w in ws)
    return (lo, hi) if lo <= hi + EPS else None


# ---------------------------------------------------------------- buckets
@dataclass(frozen=True)
class BucketSet:
    """Sorted time buckets with the indices feasible for each vehicle.

    A bucket is feasible for a vehicle when it lies inside the vehicle's RTW.
    """

    buckets: tuple[tuple[float, float], ...]
    feasibility: Mapping[int, tuple[int, ...]]

    def __len__(self) -> int:
        return len(self.buckets)

    def vehicles_at(self, t: int) -> list[int]:
        return [v for v, ks in self.feasibility.items() if t in ks]

    def midpoint(self, t: int) -> float:
        p, q = self.buckets[t]
        return 0.5 * (p + q)

    def to_dict(self) -> dict:
        return {"buckets": [list(b) for b in self.buckets],
                "feasibility": {str(v): list(ks) for v, ks in sorted(self.feasibility.items())}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BucketSet":
        return cls(tuple((float(p), float(q)) for p, q in d["buckets"]),
                   {int(v): tuple(int(k) for k in ks) for v, ks in d["feasibility"].items()})

    @classmethod
    def from_feasibility(cls, n_buckets: int, feasibility: Mapping[int, Iterable[int]],
                         width: float = 1.0) -> "BucketSet":
        """Uniform buckets of the given width with an explicit feasibility map."""
        buckets = tuple((k * width, (k + 1) * width) for k in range(n_buckets))
        return cls(buckets, {v: tuple(sorted(set(ks))) for v, ks in sorted(feasibility.items())})


def feasible_indices(buckets: Sequence[tuple[float, float]], lo: float, hi: float,
                     eps: float = EPS) -> tuple[int, ...]:
    starts = [p for p, _ in buckets]
    ends = [q for _, q in buckets]
    i = bisect_left(starts, lo - eps)
    j = bisect_right(ends, hi + eps)
    return tuple(range(i, j))


def discretize_intervals(intervals: Sequence[tuple[float, float]], eps: float = EPS):
    """Bucket endpoints produced for a list of intervals (sorted by start first)."""
    if not intervals:
        raise EmptyInput("no intervals to discretize")
    order = sorted(intervals, key=lambda ab: (ab[0], ab[1]))
    # one window ending where another starts: a platoon can only form at
    # that instant, so it needs its own singleton bucket
    ends = sorted(b for a, b in order if b - a > eps)
    touch = []
    for a, b in order:
        i = bisect_left(ends, a - eps)
        if b - a > eps and i < len(ends) and ends[i] <= a + eps and not (touch and abs(touch[-1][0] - a) <= eps):
            touch.append((a, a))
    if touch:
        order = sorted(order + touch, key=lambda ab: (ab[0], ab[1]))
    return _kernels.atd_buckets([a for a, _ in order], [b for _, b in order], eps)


def adaptive_discretize(rtws: Mapping[int, RTW], eps: float = EPS) -> BucketSet:
    """Time buckets from RTWs and the feasible bucket indices of every vehicle."""
    if not rtws:
        raise EmptyInput("no RTWs to discretize")
    buckets = tuple(discretize_intervals([(w.lo, w.hi) for w in rtws.values()], eps))
    feas = {v: feasible_indices(buckets, w.lo, w.hi, eps) for v, w in sorted(rtws.items())}
    return BucketSet(buckets, feas)


def uniform_bucket_set(rtws: Mapping[int, RTW], width: float, origin: float = 0.0,
                       eps: float = EPS) -> BucketSet:
    """Equal-width buckets on a common grid; a vehicle may use every grid bucket
    inside its RTW.  RTWs whose span contains no full bucket get none."""
    lo = min(w.lo for w in rtws.values())
    hi = max(w.hi for w in rtws.values())
    k0 = math.floor((lo - origin) / width + eps)
    k1 = math.ceil((hi - origin) / width - eps)
    buckets = tuple((origin + k * width, origin + (k + 1) * width) for k in range(k0, k1))
    feas = {v: feasible_indices(buckets, w.lo, w.hi, eps) for v, w in sorted(rtws.items())}
    return BucketSet(buckets, feas)


def covers_exactly(bs: BucketSet, w: RTW, eps: float = EPS) -> bool:
    """True when the vehicle's feasible buckets tile its RTW without gaps."""
    ks = bs.feasibility[w.vehicle]
    if not ks:
        return False
    pieces = [bs.buckets[k] for k in ks]
    if abs(pieces[0][0] - w.lo) > eps or abs(pieces[-1][1] - w.hi) > eps:
        return False
    return all(abs(pieces[i][1] - pieces[i + 1][0]) <= eps for i in range(len(pieces) - 1))


# ------------------------------------------------------------ bucket counts
def bucket_count_lower_bound(n: int, beta: float) -> float:
    return n + (beta / 2 - beta * beta / 6) * n


def bucket_count_upper_bound(n: int, ratio: float) -> float | None:
    q = math.e * (n + 1) * ratio / 2
    if q >= 1:
        return None
    return n + q * math.e * n / (2 * (1 - q))


@dataclass(frozen=True)
class BucketCountEstimate:
    mean: float
    std_err: float
    half_width: float
    lower_bound: float
    upper_bound: float | None
    trials: int


def simulate_bucket_count(n: int, horizon: float, max_width: float, trials: int,
                          seed: int | np.random.Generator | None = None) -> BucketCountEstimate:
    """Monte-Carlo mean of the bucket count for random RTWs.

    Starts are uniform on [0, horizon], widths uniform on [0, max_width].
    The half-width is a 95% normal confidence half-width.
    """
    if n < 1 or trials < 1 or not 0 < max_width < horizon:
        raise InvalidParams("need n >= 1, trials >= 1 and 0 < max_width < horizon")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = np.empty(trials)
    for i in range(trials):
        a = rng.uniform(0.0, horizon, n)
        b = a + rng.uniform(0.0, max_width, n)
        order = np.argsort(a, kind="stable")
        counts[i] = len(_kernels.atd_buckets(a[order], b[order], EPS))
    se = float(counts.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    ratio = max_width / horizon
    return BucketCountEstimate(float(counts.mean()), se, 1.96 * se,
                               bucket_count_lower_bound(n, (n - 1) * ratio),
                               bucket_count_upper_bound(n, ratio), trials)
