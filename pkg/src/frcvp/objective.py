"""Fuel saving of platoons, bucket assignments and departure schedules."""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import CapacityNotSupported, InfeasibleAssignment, InfeasibleSchedule
from .model import EPS, Instance
from .timewin import RTW, BucketSet

Assignment = dict  # vehicle id -> bucket index
Schedule = dict  # vehicle id -> absolute departure time


def phi(n: int, sigma_l: float, sigma_f: float) -> float:
    """Saving rate of a single platoon of ``n`` vehicles (no size limit)."""
    return 0.0 if n <= 1 else sigma_l + (n - 1) * sigma_f


@dataclass(frozen=True)
class Packing:
    """Greedy packing of ``n`` vehicles into platoons of at most ``lam``.

    ``full`` saturated platoons, a remainder ``rest`` that forms one more
    platoon when non-empty, ``has_rest``/``rest_led`` flag that platoon and
    whether it has a follower, and ``followers`` counts all followers.
    """

    n: int
    full: int
    rest: int
    has_rest: int
    rest_led: int
    followers: int

    def saving(self, sigma_l: float, sigma_f: float) -> float:
        return sigma_l * (self.full + self.rest_led) + sigma_f * self.followers


def packing(n: int, lam: int | None) -> Packing:
    if lam is None:
        # one unrestricted platoon; matches the limited formula with lam > n
        lam = max(n + 1, 2)
    full = n // lam
    rest = n - lam * full
    has_rest = int(rest >= 1)
    rest_led = int(rest >= 2)
    return Packing(n, full, rest, has_rest, rest_led, n - full - has_rest)


def group_saving(n: int, lam: int | None, sigma_l: float, sigma_f: float) -> float:
    """Saving rate (per unit edge cost) of ``n`` simultaneous vehicles on one edge."""
    return packing(n, lam).saving(sigma_l, sigma_f)


def set_saving(instance: Instance, vehicles: Iterable[int], edges: Iterable[int] | None = None) -> float:
    """Saving when all given vehicles depart together, summed over ``edges``."""
    if instance.lam is not None:
        raise CapacityNotSupported("the set objective assumes unbounded platoon size")
    members = set(vehicles)
    net = instance.network.edges
    on_edge = instance.vehicles_on_edge
    keys = on_edge.keys() if edges is None else edges
    total = 0.0
    for e in keys:
        n = len(on_edge.get(e, frozenset()) & members)
        if n >= 2:
            total += net[e].cost * phi(n, instance.sigma_l, instance.sigma_f)
    return total


# ------------------------------------------------------------------ reports
@dataclass(frozen=True)
class PlatoonRow:
    edge: int
    slot: object  # bucket index, or an entry-time label for schedules
    n: int
    full: int
    rest: int
    followers: int
    saving: float


@dataclass(frozen=True)
class PlatoonReport:
    total: float
    rows: tuple[PlatoonRow, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["edge", "bucket", "n", "z", "q", "w", "saving"])
        for r in self.rows:
            w.writerow([r.edge, r.slot, r.n, r.full, r.rest, r.followers, repr(r.saving)])
        return buf.getvalue()


def _report(instance: Instance, groups: Mapping[tuple[int, object], int]) -> PlatoonReport:
    net = instance.network.edges
    rows, total = [], 0.0
    for (e, slot), n in sorted(groups.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        p = packing(n, instance.lam)
        s = net[e].cost * p.saving(instance.sigma_l, instance.sigma_f)
        total += s
        rows.append(PlatoonRow(e, slot, n, p.full, p.rest, p.followers, s))
    return PlatoonReport(total, tuple(rows))


def check_assignment(instance: Instance, buckets: BucketSet, assignment: Mapping[int, int]) -> None:
    for v in instance.ids:
        if v not in assignment:
            raise InfeasibleAssignment(f"vehicle {v} has no bucket")
        if assignment[v] not in buckets.feasibility.get(v, ()):
            raise InfeasibleAssignment(f"bucket {assignment[v]} is not feasible for vehicle {v}")


def evaluate_assignment(instance: Instance, buckets: BucketSet, assignment: Mapping[int, int]) -> PlatoonReport:
    """Saving when vehicles in the same bucket travel together on shared edges."""
    check_assignment(instance, buckets, assignment)
    groups: dict[tuple[int, int], int] = defaultdict(int)
    for v in instance.vehicles:
        for e in v.route:
            groups[(e, assignment[v.id])] += 1
    return _report(instance, groups)


def decode_schedule(instance: Instance, buckets: BucketSet, rtws: Mapping[int, RTW],
                    assignment: Mapping[int, int]) -> Schedule:
    """Departure times placing each vehicle at the midpoint of its bucket."""
    check_assignment(instance, buckets, assignment)
    return {v: buckets.midpoint(assignment[v]) - rtws[v].offset for v in instance.ids}


def encode_schedule(instance: Instance, buckets: BucketSet, rtws: Mapping[int, RTW],
                    schedule: Mapping[int, float], eps: float = EPS) -> Assignment:
    """Bucket holding each vehicle's relative departure instant.

    At a bucket boundary a singleton bucket wins, otherwise the earliest
    feasible bucket containing the instant.
    """
    out = {}
    for v in instance.ids:
        x = schedule[v] + rtws[v].offset
        hits = [k for k in buckets.feasibility[v]
                if buckets.buckets[k][0] - eps <= x <= buckets.buckets[k][1] + eps]
        if not hits:
            raise InfeasibleSchedule(f"vehicle {v} departs outside its window")
        single = [k for k in hits if buckets.buckets[k][1] - buckets.buckets[k][0] <= eps]
        out[v] = single[0] if single else hits[0]
    return out


def check_schedule(instance: Instance, schedule: Mapping[int, float], eps: float = EPS) -> None:
    for v in instance.vehicles:
        if v.id not in schedule:
            raise InfeasibleSchedule(f"vehicle {v.id} has no departure time")
        s = schedule[v.id]
        if s < v.t_depart_min - eps or s + instance.route_time(v.id) > v.t_arrive_max + eps:
            raise InfeasibleSchedule(f"vehicle {v.id} cannot depart at {s}")


def evaluate_schedule(instance: Instance, schedule: Mapping[int, float], eps: float = EPS) -> PlatoonReport:
    """Saving of a departure schedule; vehicles platoon on an edge when they
    enter it at the same instant (times within ``eps`` are chained together).

    Works for any route graph since it looks only at per-edge entry times.
    """
    check_schedule(instance, schedule, eps)
    entries: dict[int, list[float]] = defaultdict(list)
    net = instance.network.edges
    for v in instance.vehicles:
        prefix = instance.prefix_time[v.id]
        for e in v.route:
            entries[e].append(schedule[v.id] + prefix[net[e].tail])
    groups: dict[tuple[int, object], int] = {}
    for e, times in entries.items():
        times.sort()
        start, n = times[0], 1
        for prev, cur in zip(times, times[1:]):
            if cur - prev <= eps:
                n += 1
            else:
                groups[(e, round(start, 9))] = n
                start, n = cur, 1
        groups[(e, round(start, 9))] = n
    return _report(instance, groups)
