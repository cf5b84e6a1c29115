import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _instances import seven_vehicle_tree, setup, small_tree_family
from oracles import assignment_value, platoon_value, set_partitions
from frcvp.errors import CapacityNotSupported, InfeasibleAssignment, InfeasibleSchedule
from frcvp.model import Edge, Instance, RoadNetwork, Vehicle
from frcvp.objective import (decode_schedule, encode_schedule, evaluate_assignment, evaluate_schedule,
                             group_saving, packing, phi, set_saving)
from frcvp.timewin import adaptive_discretize, RTW


def one_edge(n, cost=1.0, lam=None, sl=0.05, sf=0.1, window=(0.0, 5.0)):
    net = RoadNetwork(("A", "B"), (Edge("A", "B", 1.0, cost),))
    vs = tuple(Vehicle(i, "A", "B", window[0], window[1], (0,)) for i in range(n))
    return Instance(net, vs, lam, sl, sf)


def test_phi():
    assert phi(0, 0.05, 0.1) == phi(1, 0.05, 0.1) == 0
    assert phi(2, 0.05, 0.1) == pytest.approx(0.15)
    assert phi(5, 0.05, 0.1) == pytest.approx(0.45)


def test_set_saving():
    inst = seven_vehicle_tree()
    assert set_saving(inst, []) == 0
    cd = [k for k, e in enumerate(inst.network.edges) if (e.tail, e.head) == ("C", "D")]
    assert set_saving(inst, [1, 2, 3, 4, 5], cd) == pytest.approx(0.05 + 4 * 0.1)
    assert set_saving(one_edge(2, sl=0.1, sf=0.1), [0, 1]) == pytest.approx(0.2)
    with pytest.raises(CapacityNotSupported):
        set_saving(one_edge(2, lam=2), [0, 1])


def test_packing_seven_in_threes():
    p = packing(7, 3)
    assert (p.full, p.rest, p.has_rest, p.rest_led, p.followers) == (2, 1, 1, 0, 4)
    inst = one_edge(7, cost=2.0, lam=3)
    bs = adaptive_discretize({v: RTW(v, 0.0, 4.0, 0.0) for v in range(7)})
    rep = evaluate_assignment(inst, bs, {v: 0 for v in range(7)})
    assert rep.total == pytest.approx(2.0 * (2 * 0.05 + 4 * 0.1))


def test_seven_in_threes_best_split_beats_quotient_scheme():
    # the quotient/remainder scheme leaves one vehicle alone; 3+2+2 does not
    best = max(sum(0.05 + (len(g) - 1) * 0.1 for g in part if len(g) >= 2)
               for part in set_partitions(range(7)) if all(len(g) <= 3 for g in part))
    assert best == pytest.approx(3 * 0.05 + 4 * 0.1)
    assert group_saving(7, 3, 0.05, 0.1) == pytest.approx(2 * 0.05 + 4 * 0.1)
    assert platoon_value(7, 3, 0.05, 0.1) == pytest.approx(best)


def test_greedy_packing_not_always_optimal():
    # four vehicles in threes: greedy gives 3+1, two pairs are better when
    # the leader rate is high enough
    assert group_saving(4, 3, 0.3, 0.1) < platoon_value(4, 3, 0.3, 0.1)


def test_unbounded_packing():
    assert group_saving(4, None, 0.05, 0.1) == pytest.approx(0.35)
    assert group_saving(1, None, 0.05, 0.1) == 0
    assert group_saving(1, 3, 0.05, 0.1) == 0


@given(st.integers(0, 40), st.integers(2, 10), st.floats(0, 0.5), st.floats(0, 0.5))
def test_packing_invariants(n, lam, sl, sf):
    p = packing(n, lam)
    assert p.full == n // lam
    assert p.rest == n - lam * p.full
    assert p.has_rest == int(p.rest >= 1) and p.rest_led == int(p.rest >= 2)
    assert p.followers == n - p.full - p.has_rest
    assert p.saving(sl, sf) == pytest.approx(sl * (p.full + p.rest_led) + sf * p.followers)
    assert p.saving(sl, sf) <= platoon_value(n, lam, sl, sf) + 1e-12
    if sl <= sf and (p.rest != 1 or p.full == 0 or lam == 2 or sl == 0):
        assert p.saving(sl, sf) == pytest.approx(platoon_value(n, lam, sl, sf))


def test_infeasible_assignment():
    inst = one_edge(2)
    bs = adaptive_discretize({0: RTW(0, 0.0, 1.0, 0.0), 1: RTW(1, 2.0, 3.0, 0.0)})
    with pytest.raises(InfeasibleAssignment):
        evaluate_assignment(inst, bs, {0: 0, 1: 0})
    with pytest.raises(InfeasibleAssignment):
        evaluate_assignment(inst, bs, {0: 0})


def test_decode_singleton_and_midpoint():
    inst = one_edge(2, window=(0.0, 3.0))
    bs = adaptive_discretize({0: RTW(0, 0.0, 1.0, 0.0), 1: RTW(1, 1.0, 2.0, 0.0)})
    k = bs.buckets.index((1.0, 1.0))
    assert decode_schedule(inst, bs, {0: RTW(0, 0.0, 1.0, 0.0), 1: RTW(1, 1.0, 2.0, 0.0)}, {0: k, 1: k}) == {0: 1.0, 1: 1.0}
    bs = adaptive_discretize({v: RTW(v, a, b, 0.0) for v, (a, b) in enumerate([(0, 8), (3, 11), (5, 10), (9, 14)])})
    assert bs.midpoint(1) == 4.0


def test_report_csv():
    inst = seven_vehicle_tree()
    _, rt, bs = setup(inst)
    sched = {v: 5.0 - rt[v].offset for v in (1, 2, 3, 4)} | {v: 10.5 - rt[v].offset for v in (5, 6)}
    rep = evaluate_schedule(inst, sched | {7: 12.5 - rt[7].offset})
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert {"edge", "bucket", "n", "z", "q", "w", "saving"} <= set(rows[0])
    assert sum(float(r["saving"]) for r in rows) == pytest.approx(rep.total)


def test_schedule_with_four_together():
    inst = seven_vehicle_tree()
    _, rt, _ = setup(inst)
    sched = {v: 5.0 - rt[v].offset for v in (1, 2, 3, 4)}
    sched |= {5: 9.0, 6: 11.0, 7: 13.0}
    # reference: with unit costs, sum phi over shared edges of v1..v4
    onto = {}
    for v in (1, 2, 3, 4):
        for e in inst.vehicle(v).route:
            onto[e] = onto.get(e, 0) + 1
    expect = sum(phi(n, 0.05, 0.1) for n in onto.values())
    assert evaluate_schedule(inst, sched).total == pytest.approx(expect)


def test_distinct_departures_give_nothing():
    inst = one_edge(3)
    assert evaluate_schedule(inst, {0: 0.0, 1: 1.0, 2: 2.0}).total == 0


def test_perturbation_breaks_only_that_platoon():
    inst = one_edge(3)
    assert evaluate_schedule(inst, {0: 1.0, 1: 1.0, 2: 1.0}).total == pytest.approx(0.25)
    assert evaluate_schedule(inst, {0: 1.0, 1: 1.0, 2: 1.0 + 2e-9}).total == pytest.approx(0.15)


def test_infeasible_schedule():
    inst = one_edge(1, window=(1.0, 3.0))
    with pytest.raises(InfeasibleSchedule):
        evaluate_schedule(inst, {0: 0.5})
    with pytest.raises(InfeasibleSchedule):
        evaluate_schedule(inst, {0: 2.5})
    with pytest.raises(InfeasibleSchedule):
        evaluate_schedule(inst, {})


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 30))
def test_decode_encode_round_trip_and_equal_saving(seed, family_index):
    inst = small_tree_family(1, start=family_index)[0]
    _, rt, bs = setup(inst)
    rng = np.random.default_rng(seed)
    a = {v: int(rng.choice(bs.feasibility[v])) for v in inst.ids}
    sched = decode_schedule(inst, bs, rt, a)
    assert encode_schedule(inst, bs, rt, sched) == a
    got = evaluate_assignment(inst, bs, a).total
    assert evaluate_schedule(inst, sched).total == pytest.approx(got, abs=1e-12)
    assert got == pytest.approx(assignment_value(inst, a))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 30))
def test_moving_into_a_bucket_never_hurts_it(seed, family_index):
    inst = small_tree_family(1, start=family_index)[0]
    _, _, bs = setup(inst)
    rng = np.random.default_rng(seed)
    a = {v: int(rng.choice(bs.feasibility[v])) for v in inst.ids}
    v = int(rng.choice(inst.ids))
    rest = [u for u in inst.ids if u != v]
    for t in bs.feasibility[v]:
        members = [u for u in rest if a[u] == t]
        assert set_saving(inst, members + [v]) >= set_saving(inst, members) - 1e-12


def test_set_saving_additive_on_private_edges():
    inst = seven_vehicle_tree()
    E = inst.network.edges
    shared = {k for k, e in enumerate(E) if (e.tail, e.head) in {("C", "D"), ("D", "E")}}
    base = [1, 2, 3]
    # vehicle 4 meets the others only on C-D and D-E
    gain = set_saving(inst, base + [4]) - set_saving(inst, base)
    assert gain == pytest.approx(set_saving(inst, base + [4], shared) - set_saving(inst, base, shared))
