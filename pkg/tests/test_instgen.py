import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _instances import setup
from oracles import min_clique_partition
from frcvp.errors import InvalidParams, NoPath
from frcvp.instgen import (GenParams, gen_artifnet, gen_from_uet, gen_time_windows, gen_vehicles, generate,
                           random_tree_instance, with_time_windows)
from frcvp.model import Edge, Instance, RoadNetwork, build_route_graph, undirected_components
from frcvp.solvers.enumerate import exact_enumerate
from frcvp.timewin import compute_rtws


def test_single_edge_network():
    net = gen_artifnet(1, seed=0)
    assert len(net.nodes) == 2 and len(net.edges) == 1
    e = net.edges[0]
    assert 1.0 <= e.time <= 1.5 and e.cost == e.time


@pytest.mark.parametrize("seed", range(5))
def test_hundred_edge_tree(seed):
    net = gen_artifnet(100, seed=seed)
    assert len(net.nodes) == 101
    _, loops = undirected_components(range(100), net.edges)
    assert not loops
    deg = {}
    for e in net.edges:
        deg[e.tail] = deg.get(e.tail, 0) + 1
        deg[e.head] = deg.get(e.head, 0) + 1
        assert net.positions[e.tail][0] <= net.positions[e.head][0]
    assert max(deg.values()) <= 4


def test_network_deterministic():
    assert gen_artifnet(30, seed=4) == gen_artifnet(30, seed=4)
    assert gen_artifnet(30, seed=4) != gen_artifnet(30, seed=5)


def test_edge_count_validated():
    with pytest.raises(InvalidParams):
        gen_artifnet(0)


def test_single_vehicle_is_shortest_path():
    import networkx as nx

    net = gen_artifnet(40, seed=2)
    v = gen_vehicles(net, 1, seed=3)[0]
    g = nx.DiGraph((e.tail, e.head, {"w": e.time}) for e in net.edges)
    L = sum(net.edges[k].time for k in v.route)
    assert L == pytest.approx(nx.shortest_path_length(g, v.origin, v.dest, weight="w"))


@pytest.mark.parametrize("seed", range(3))
def test_hundred_vehicles_form_a_tree(seed):
    inst = generate(GenParams(edge_count=100, N=100, seed=seed))
    assert len(inst.vehicles) == 100
    assert build_route_graph(inst).is_tree_like()
    pos = inst.network.positions
    for v in inst.vehicles:
        assert pos[v.origin][0] < 0 < pos[v.dest][0]


def loop_grid():
    # 2x3 grid with two routes between the corners: a loop unless recast
    nodes = tuple(range(6))
    E = [(0, 1, 1), (1, 2, 1), (3, 4, 1), (4, 5, 1), (0, 3, 1), (1, 4, 1), (2, 5, 1)]
    return RoadNetwork(nodes, tuple(Edge(a, b, float(t), 1.0) for a, b, t in E))


def test_tree_casting_on_loopy_network():
    net = loop_grid()
    for seed in range(20):
        vs = gen_vehicles(net, 6, origin_region=[0, 3], dest_region=[2, 5], seed=seed)
        union = {k for v in vs for k in v.route}
        assert not undirected_components(union, net.edges)[1]
        for v in vs:
            assert all(net.edges[a].head == net.edges[b].tail for a, b in zip(v.route, v.route[1:]))
            assert net.edges[v.route[0]].tail == v.origin and net.edges[v.route[-1]].head == v.dest


def test_no_path():
    net = RoadNetwork((0, 1, 2), (Edge(0, 1, 1, 1), Edge(2, 1, 1, 1)))
    with pytest.raises(NoPath):
        gen_vehicles(net, 1, origin_region=[1], dest_region=[2])
    with pytest.raises(InvalidParams):
        gen_vehicles(net, 1, origin_region=[], dest_region=[2])


def test_zero_extension_gives_point_windows():
    inst = generate(GenParams(edge_count=30, N=10, gamma_full=5, gamma_ext=0, seed=1))
    rt = compute_rtws(inst, build_route_graph(inst))
    assert all(w.width == pytest.approx(0, abs=1e-9) for w in rt.values())


def test_window_protocol():
    inst = generate(GenParams(edge_count=60, N=40, gamma_full=50, gamma_ext=2, seed=7))
    L = [inst.route_time(v.id) for v in inst.vehicles]
    horizon = 50 * np.mean(L)
    for v, l in zip(inst.vehicles, L):
        assert 0 <= v.t_depart_min <= horizon
        assert v.t_arrive_max - v.t_depart_min == pytest.approx(3 * l)


def test_extension_ratio_identity():
    inst = generate(GenParams(edge_count=60, N=40, seed=3))
    L = np.array([inst.route_time(v.id) for v in inst.vehicles])
    for gf, ge in [(50, 2), (20, 1), (10, 0.5)]:
        slack = np.mean([v.t_arrive_max - v.t_depart_min - l for v, l in
                         zip(with_time_windows(inst, gf, ge, seed=1).vehicles, L)])
        assert slack / (gf * L.mean()) == pytest.approx(ge / gf)


def test_default_regime():
    p = GenParams()
    assert (p.gamma_full, p.gamma_ext, p.edge_count, p.N) == (50.0, 2.0, 100, 100)


def test_generator_deterministic():
    a = generate(GenParams(edge_count=40, N=15, seed=9))
    assert a == generate(GenParams(edge_count=40, N=15, seed=9))
    assert a.vehicles != generate(GenParams(edge_count=40, N=15, seed=10)).vehicles


@pytest.mark.parametrize("kw", [dict(N=0), dict(edge_count=0), dict(gamma_full=2, gamma_ext=2),
                                dict(gamma_ext=-1)])
def test_params_validated(kw):
    with pytest.raises(InvalidParams):
        GenParams(**kw)


def test_custom_kind_needs_network():
    with pytest.raises(InvalidParams):
        generate(GenParams(network="custom"))
    net = gen_artifnet(30, seed=0)
    assert generate(GenParams(N=5, network="custom"), network=net).network == net


def uet_value(windows, sigma_f=0.1):
    inst = gen_from_uet(windows, sigma_f=sigma_f)
    _, _, bs = setup(inst)
    return exact_enumerate(inst, bs).value


def test_uet_examples():
    assert uet_value([(0, 2)] * 4) == pytest.approx(0.1 * 3)
    assert uet_value([(0, 1), (2, 3), (4, 5)]) == 0
    assert uet_value([(0, 1), (1, 2), (0, 2)]) == pytest.approx(0.1 * (3 - 2))


def test_uet_needs_a_slot():
    with pytest.raises(InvalidParams):
        gen_from_uet([(1, 1)])
    with pytest.raises(InvalidParams):
        gen_from_uet([])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(1, 3)).map(lambda t: (t[0], t[0] + t[1])),
                min_size=1, max_size=7))
def test_uet_reduction_matches_clique_partition(windows):
    m = min_clique_partition(windows)
    assert uet_value(windows) == pytest.approx(0.1 * (len(windows) - m))


def test_random_tree_instance_is_an_in_tree():
    inst = random_tree_instance(6, 8, seed=4)
    assert all(e.head < e.tail for e in inst.network.edges)
    assert build_route_graph(inst).is_tree_like()
    assert inst == random_tree_instance(6, 8, seed=4)


def test_continuous_random_instances_avoid_shared_endpoints():
    inst = random_tree_instance(7, 8, seed=1, integer_times=False)
    rt = compute_rtws(inst, build_route_graph(inst))
    ends = [x for w in rt.values() for x in (w.lo, w.hi)]
    assert len(set(np.round(ends, 9))) == len(ends)
