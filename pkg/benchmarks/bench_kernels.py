"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from frcvp import _kernels
from frcvp.instgen import random_tree_instance
from frcvp.model import build_route_graph
from frcvp.solvers.enumerate import best_assignment
from frcvp.timewin import adaptive_discretize, compute_rtws


def atd_case(n, seed=0):
    rng = np.random.default_rng(seed)
    a = np.sort(rng.uniform(0, 100, n))
    return a, a + rng.uniform(0, 5, n)


def enum_case(seed=7):
    inst = random_tree_instance(9, 8, seed=seed, horizon=4, max_slack=2, integer_times=False)
    bs = adaptive_discretize(compute_rtws(inst, build_route_graph(inst)))
    return inst, bs


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels.compiled is None:
        print("compiled kernels not built; only the Python timings are shown")
    backends = [("python", _kernels.python)] + ([("compiled", _kernels.compiled)] if _kernels.compiled else [])

    rows = []
    for n in (200, 1000, 3000):
        a, b = atd_case(n)
        times = {name: best_of(lambda k=k: k.atd_buckets(a, b), args.repeat) for name, k in backends}
        rows.append((f"atd_buckets n={n}", times))

    inst, bs = enum_case()
    times = {}
    for name, k in backends:
        times[name] = best_of(lambda k=k: best_assignment(inst, bs, kernels=k), args.repeat)
    rows.append((f"best_assignment |V|={len(inst.vehicles)} |S|={len(bs)}", times))

    rng = np.random.default_rng(3)
    T = rng.random((4000, 8000))
    r_idx = np.sort(rng.choice(4000, 1500, replace=False))
    c_idx = np.sort(rng.choice(8000, 300, replace=False))
    u, v = rng.random(r_idx.size), rng.random(c_idx.size)
    times = {name: best_of(lambda k=k: k.rank_one_update(T, r_idx, c_idx, u, v), args.repeat)
             for name, k in backends}
    rows.append(("rank_one_update 1500x300 block", times))

    print(f"{'kernel':<40}{'python s':>12}{'compiled s':>12}{'speedup':>10}")
    for label, t in rows:
        c = t.get("compiled")
        speed = f"{t['python'] / c:.1f}x" if c else "-"
        print(f"{label:<40}{t['python']:>12.4f}{(c if c else float('nan')):>12.4f}{speed:>10}")


if __name__ == "__main__":
    main()
