"""Mixed-integer models: a small solver-neutral container and the builders for
the bucket-assignment, two-index platoon, continuous-time and LP-relaxation
formulations (plus the loop-aware assignment model)."""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidParams, LoopBreakIncomplete
from .model import Instance
from .timewin import BucketSet, PseudoPlatoonGraph, node_time_window

INF = float("inf")


@dataclass(frozen=True)
class Var:
    name: str
    lb: float = 0.0
    ub: float = INF
    kind: str = "C"  # C continuous, I general integer, B binary


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[str, float], ...]
    sense: str  # "<=", ">=" or "="
    rhs: float


@dataclass(frozen=True)
class LinearForm:
    """Dense arrays of a model: maximize c.x subject to A x (sense) b."""

    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    names: tuple[str, ...]


@dataclass(frozen=True)
class MilpModel:
    name: str
    variables: tuple[Var, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[str, float], ...]

    @cached_property
    def index(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    def var(self, name: str) -> Var:
        return self.variables[self.index[name]]

    def family(self, name: str) -> str:
        return name.split("_", 1)[0]

    def stats(self) -> dict:
        kinds = Counter(v.kind for v in self.variables)
        fams = Counter(self.family(c.name) for c in self.constraints)
        var_fams = Counter(self.family(v.name) for v in self.variables)
        return {
            "name": self.name,
            "variables": len(self.variables),
            "binary": kinds.get("B", 0),
            "integer": kinds.get("I", 0),
            "continuous": kinds.get("C", 0),
            "constraints": len(self.constraints),
            "nonzeros": sum(len(c.terms) for c in self.constraints),
            "variable_families": dict(sorted(var_fams.items())),
            "constraint_families": dict(sorted(fams.items())),
        }

    def stats_json(self) -> str:
        return json.dumps(self.stats(), indent=1, sort_keys=True)

    @cached_property
    def dense(self) -> LinearForm:
        idx = self.index
        n, m = len(self.variables), len(self.constraints)
        c = np.zeros(n)
        for name, coef in self.objective:
            c[idx[name]] += coef
        A = np.zeros((m, n))
        b = np.zeros(m)
        for i, con in enumerate(self.constraints):
            for name, coef in con.terms:
                A[i, idx[name]] += coef
            b[i] = con.rhs
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        integer = np.array([v.kind in "BI" for v in self.variables], dtype=bool)
        return LinearForm(c, A, tuple(con.sense for con in self.constraints), b, lb, ub, integer,
                          tuple(v.name for v in self.variables))

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(coef * values.get(name, 0.0) for name, coef in self.objective)

    def max_violation(self, values: Mapping[str, float]) -> float:
        worst = 0.0
        for con in self.constraints:
            lhs = sum(coef * values.get(name, 0.0) for name, coef in con.terms)
            if con.sense == "<=":
                worst = max(worst, lhs - con.rhs)
            elif con.sense == ">=":
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        for v in self.variables:
            x = values.get(v.name, 0.0)
            worst = max(worst, v.lb - x, x - v.ub)
        return worst

    def canonical(self):
        """Order-insensitive view used to compare models for equality."""
        vs = tuple(sorted((v.name, v.lb, v.ub, v.kind) for v in self.variables))
        obj = tuple(sorted(self.objective))
        cons = tuple((c.name, tuple(sorted(c.terms)), c.sense, c.rhs) for c in self.constraints)
        return vs, obj, cons


class ModelBuilder:
    def __init__(self, name: str):
        self.name = name
        self._vars: dict[str, Var] = {}
        self._cons: list[Constraint] = []
        self._con_names: set[str] = set()
        self._obj: dict[str, float] = {}

    def var(self, name: str, lb: float = 0.0, ub: float = INF, kind: str = "C") -> str:
        if kind == "B":
            lb, ub = 0.0, 1.0
        if name in self._vars:
            raise InvalidParams(f"duplicate variable {name}")
        self._vars[name] = Var(name, float(lb), float(ub), kind)
        return name

    def constrain(self, name: str, terms: Iterable[tuple[str, float]], sense: str, rhs: float) -> None:
        if name in self._con_names:
            raise InvalidParams(f"duplicate constraint {name}")
        merged: dict[str, float] = {}
        for v, c in terms:
            if v not in self._vars:
                raise InvalidParams(f"constraint {name} uses undeclared variable {v}")
            merged[v] = merged.get(v, 0.0) + float(c)
        self._con_names.add(name)
        self._cons.append(Constraint(name, tuple((v, c) for v, c in merged.items() if c != 0.0),
                                     sense, float(rhs)))

    def maximize(self, name: str, coef: float) -> None:
        if coef:
            self._obj[name] = self._obj.get(name, 0.0) + float(coef)

    def build(self) -> MilpModel:
        return MilpModel(self.name, tuple(self._vars.values()), tuple(self._cons),
                         tuple(self._obj.items()))


# ---------------------------------------------------------------- helpers
def _edge_limit(instance: Instance, e: int) -> int:
    """Platoon size limit on an edge; unbounded limits become the edge's
    vehicle count (at least 2, so a lone vehicle never counts as a platoon)."""
    if instance.lam is not None:
        return instance.lam
    return max(2, len(instance.vehicles_on_edge[e]))


def bucket_blocks(instance: Instance, buckets: BucketSet):
    """(edge, bucket, vehicles on the edge that may use the bucket), non-empty only."""
    for e, ve in instance.vehicles_on_edge.items():
        per_t: dict[int, list[int]] = defaultdict(list)
        for v in sorted(ve):
            for t in buckets.feasibility[v]:
                per_t[t].append(v)
        for t in sorted(per_t):
            yield e, t, per_t[t]


def x_name(v: int, t: int) -> str:
    return f"x_{v}_{t}"


def parse_x_name(name: str) -> tuple[int, int] | None:
    parts = name.split("_")
    if len(parts) == 3 and parts[0] == "x":
        return int(parts[1]), int(parts[2])
    return None


def assignment_from_values(values: Mapping[str, float]) -> dict[int, int]:
    """Bucket choice from the x-variables of an assignment model."""
    best: dict[int, tuple[float, int]] = {}
    for name, val in values.items():
        key = parse_x_name(name)
        if key is None:
            continue
        v, t = key
        if v not in best or val > best[v][0]:
            best[v] = (val, t)
    return {v: t for v, (_, t) in sorted(best.items())}


# ----------------------------------------------------------- formulations
def _assignment_core(mb: ModelBuilder, instance: Instance, buckets: BucketSet) -> None:
    cost = instance.network.edges
    sl, sf = instance.sigma_l, instance.sigma_f
    for v in instance.ids:
        for t in buckets.feasibility[v]:
            mb.var(x_name(v, t), kind="B")
    for v in instance.ids:
        mb.constrain(f"VA2_{v}", [(x_name(v, t), 1) for t in buckets.feasibility[v]], "=", 1)
    for e, t, vs in bucket_blocks(instance, buckets):
        lam = _edge_limit(instance, e)
        key = f"{e}_{t}"
        z, q, w = mb.var(f"z_{key}", kind="I"), mb.var(f"q_{key}", kind="I"), mb.var(f"w_{key}", kind="I")
        y, yp = mb.var(f"y_{key}", kind="B"), mb.var(f"yp_{key}", kind="B")
        xs = [(x_name(v, t), -1) for v in vs]
        mb.constrain(f"VA3_{key}", [(z, lam)] + xs, "<=", 0)
        mb.constrain(f"VA4_{key}", [(z, lam)] + xs, ">=", 1 - lam)
        mb.constrain(f"VA5_{key}", [(w, 1)] + xs + [(z, 1), (y, 1)], "=", 0)
        mb.constrain(f"VA6_{key}", [(q, 1)] + xs + [(z, lam)], "=", 0)
        mb.constrain(f"VA7a_{key}", [(y, 1), (q, -1)], "<=", 0)
        mb.constrain(f"VA7b_{key}", [(y, lam), (q, -1)], ">=", 0)
        mb.constrain(f"VA8_{key}", [(q, 1), (yp, -2)], ">=", 0)
        mb.constrain(f"VA9_{key}", [(yp, 1), (y, -1)], "<=", 0)
        c = cost[e].cost
        mb.maximize(z, sl * c)
        mb.maximize(yp, sl * c)
        mb.maximize(w, sf * c)


def build_va(instance: Instance, buckets: BucketSet, name: str = "va") -> MilpModel:
    """Bucket-assignment model: one bucket per vehicle, greedy platoon packing
    per (edge, bucket) encoded with integer counters."""
    mb = ModelBuilder(name)
    _assignment_core(mb, instance, buckets)
    return mb.build()


def _leader_rows(mb: ModelBuilder, prefix: tuple[str, str, str], instance: Instance,
                 e: int, ve: Sequence[int]) -> None:
    """Leader/follower bookkeeping on one edge: each leader has at most
    (limit - 1) followers and at least one, a follower follows one leader and
    is not a leader itself."""
    cap_name, one_name, min_name = prefix
    lam = _edge_limit(instance, e)
    for v in ve:
        lead = f"l_{v}_{e}"
        followers = [(f"f_{u}_{v}_{e}", 1) for u in ve if u > v]
        leaders = [(f"f_{v}_{w}_{e}", 1) for w in ve if w < v]
        mb.constrain(f"{cap_name}_{v}_{e}", followers + [(lead, -(lam - 1))], "<=", 0)
        mb.constrain(f"{one_name}_{v}_{e}", leaders + [(lead, 1)], "<=", 1)
        mb.constrain(f"{min_name}_{v}_{e}", followers + [(lead, -1)], ">=", 0)


def _pair_vars(mb: ModelBuilder, instance: Instance) -> None:
    cost = instance.network.edges
    for e, ve in instance.vehicles_on_edge.items():
        vs = sorted(ve)
        for v in vs:
            mb.var(f"l_{v}_{e}", kind="B")
            mb.maximize(f"l_{v}_{e}", instance.sigma_l * cost[e].cost)
        for v, u in combinations(vs, 2):
            mb.var(f"f_{u}_{v}_{e}", kind="B")
            mb.maximize(f"f_{u}_{v}_{e}", instance.sigma_f * cost[e].cost)


def _f(u: int, v: int, e: int) -> str:
    return f"f_{max(u, v)}_{min(u, v)}_{e}"


def build_twof(instance: Instance, graph: PseudoPlatoonGraph, name: str = "twof") -> MilpModel:
    """Two-index platoon model on the pseudo-platooning graph.

    Rows linking two pairs that share a vehicle are generated only for edge
    pairs the vehicles actually traverse, and only when the two outer
    vehicles' windows are disjoint (otherwise the row is vacuous).
    """
    mb = ModelBuilder(name)
    _pair_vars(mb, instance)
    on_edge = instance.vehicles_on_edge
    rs = instance.route_sets
    for e, ve in on_edge.items():
        _leader_rows(mb, ("TWOF2", "TWOF3", "TWOF4"), instance, e, sorted(ve))
    for e, ve in on_edge.items():
        for v, u in combinations(sorted(ve), 2):
            mb.constrain(f"TWOF5_{u}_{v}_{e}", [(f"f_{u}_{v}_{e}", 1)], "<=", graph.a(u, v))
    ids = instance.ids
    for u, v in combinations(ids, 2):
        if graph.adjacent(u, v):
            continue
        for w in ids:
            if w in (u, v):
                continue
            e_uw = sorted(rs[u] & rs[w])
            e_vw = sorted(rs[v] & rs[w])
            for e in e_uw:
                for e2 in e_vw:
                    mb.constrain(f"TWOF6_{u}_{v}_{w}_{e}_{e2}",
                                 [(_f(u, w, e), 1), (_f(v, w, e2), 1)], "<=", 1 + graph.a(u, v))
    for e, ve in on_edge.items():
        top = max(ve)
        mb.constrain(f"TWOF7_{e}", [(f"l_{top}_{e}", 1)], "=", 0)
    return mb.build()


def build_ct(instance: Instance, name: str = "ct") -> MilpModel:
    """Continuous-time model with arrival-time variables and big-M coupling."""
    mb = ModelBuilder(name)
    net = instance.network
    node_pos = {n: i for i, n in enumerate(net.nodes)}

    def tname(v, node):
        return f"t_{v}_{node_pos[node]}"

    windows = {}
    for v in instance.vehicles:
        for node in instance.route_nodes[v.id]:
            w = node_time_window(instance, v.id, node)
            windows[(v.id, node)] = w
            mb.var(tname(v.id, node), w.lower, w.upper, "C")
    _pair_vars(mb, instance)
    for v in instance.vehicles:
        mb.constrain(f"CT2_{v.id}", [(tname(v.id, v.origin), 1)], ">=", v.t_depart_min)
        mb.constrain(f"CT3_{v.id}", [(tname(v.id, v.dest), 1)], "<=", v.t_arrive_max)
        for k in v.route:
            e = net.edges[k]
            mb.constrain(f"CT4_{v.id}_{k}", [(tname(v.id, e.head), 1), (tname(v.id, e.tail), -1)],
                         "=", e.time)
    for k, ve in instance.vehicles_on_edge.items():
        i = net.edges[k].tail
        for v, u in combinations(sorted(ve), 2):
            wu, wv = windows[(u, i)], windows[(v, i)]
            big = max(wu.upper - wv.lower, wv.upper - wu.lower)
            f = f"f_{u}_{v}_{k}"
            mb.constrain(f"CT5_{u}_{v}_{k}", [(tname(u, i), 1), (tname(v, i), -1), (f, big)], "<=", big)
            mb.constrain(f"CT6_{u}_{v}_{k}", [(tname(u, i), 1), (tname(v, i), -1), (f, -big)], ">=", -big)
    for k, ve in instance.vehicles_on_edge.items():
        _leader_rows(mb, ("CT8", "CT7", "CT9"), instance, k, sorted(ve))
    return mb.build()


def build_lp_relax(instance: Instance, buckets: BucketSet, name: str = "lp") -> MilpModel:
    """Linear relaxation used for randomized rounding (unbounded platoon size)."""
    mb = ModelBuilder(name)
    cost = instance.network.edges
    for v in instance.ids:
        for t in buckets.feasibility[v]:
            mb.var(x_name(v, t), 0.0, 1.0, "C")
    for v in instance.ids:
        mb.constrain(f"LP1_{v}", [(x_name(v, t), 1) for t in buckets.feasibility[v]], "=", 1)
    for e, t, vs in bucket_blocks(instance, buckets):
        key = f"{e}_{t}"
        y = mb.var(f"y_{key}", 0.0, 1.0)
        yp = mb.var(f"yp_{key}", 0.0, 1.0)
        w = mb.var(f"w_{key}", 0.0, INF)
        xs = [(x_name(v, t), -1) for v in vs]
        for a, b in combinations(vs, 2):
            mb.constrain(f"LP2_{key}_{a}_{b}", [(yp, 1), (x_name(a, t), -1), (x_name(b, t), -1)], ">=", -1)
        mb.constrain(f"LP3_{key}", [(yp, 2)] + xs, "<=", 0)
        mb.constrain(f"LP4_{key}", [(w, 1)] + xs + [(y, 1)], "=", 0)
        for a in vs:
            mb.constrain(f"LP5_{key}_{a}", [(y, 1), (x_name(a, t), -1)], ">=", 0)
        mb.maximize(yp, instance.sigma_l * cost[e].cost)
        mb.maximize(w, instance.sigma_f * cost[e].cost)
    return mb.build()


def build_gva(loopbreak, name: str = "gva") -> MilpModel:
    """Assignment model over real and virtual vehicles, with equalities that
    force all copies of a vehicle to use buckets at the same offset."""
    if loopbreak.status != "converged":
        raise LoopBreakIncomplete("bucket projection did not converge; assignment model is not exact")
    mb = ModelBuilder(name)
    _assignment_core(mb, loopbreak.ext_instance, loopbreak.bucket_set)
    for (parent, i, j), pairs in sorted(loopbreak.pairs.items()):
        ci, cj = loopbreak.copies[parent][i], loopbreak.copies[parent][j]
        for s, t in pairs:
            mb.constrain(f"GVA_{parent}_{i}_{j}_{s}_{t}", [(x_name(ci, s), 1), (x_name(cj, t), -1)], "=", 0)
    return mb.build()
