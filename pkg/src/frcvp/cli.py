"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 invalid or infeasible instance,
3 time budget exhausted.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import FrcvpError, InvalidParams
from .instgen import GenParams, generate, with_time_windows
from .lpformat import export_lp
from .milp import assignment_from_values, build_ct, build_gva, build_lp_relax, build_twof, build_va
from .model import Instance, build_route_graph, load_instance
from .objective import decode_schedule, evaluate_schedule
from .timewin import adaptive_discretize, compute_rtws, pseudo_platoon_graph

METHODS = ("exact", "bnb", "greedy", "greedy2", "ptas", "lp-round", "heuristic-loop")
FORMULATIONS = ("va", "twof", "ct", "gva", "lp")
RESULT_FIELDS = ("instance", "method", "status", "objective", "bound", "gap", "wall_time", "seed", "buckets", "note")
SWEEP_FIELDS = ("ratio", "gamma_ext", "trials", "objective_mean", "objective_std",
                "buckets_mean", "buckets_std", "buckets_within_bounds")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ solving
def _tree_setup(instance: Instance):
    graph = build_route_graph(instance)
    rtws = compute_rtws(instance, graph)
    return graph, rtws, adaptive_discretize(rtws)


def run_method(instance: Instance, method: str, budget: float | None = None, seed: int = 0,
               formulation: str = "va", ptas_n0: int = 3, ptas_n1: int = 6,
               point_buckets: bool = False) -> dict:
    """Solve with ``method``; returns objective, bound, status and schedule."""
    from . import approx, looped
    from .solvers.bnb import branch_and_bound
    from .solvers.enumerate import exact_enumerate

    out = {"bound": None, "gap": None, "status": "ok", "buckets": None, "note": ""}
    loopy = not build_route_graph(instance).is_tree_like()
    if method == "heuristic-loop":
        res = looped.heuristic_single_copy(instance, "bnb", time_budget=budget)
        out.update(objective=res.value, schedule=res.schedule,
                   status="budget_exceeded" if res.status == "budget_exceeded" else "ok")
        return out
    if loopy:
        if method != "bnb":
            raise InvalidParams(f"method {method!r} needs a tree-shaped route graph; use bnb or heuristic-loop")
        res = looped.solve_gva(instance, time_budget=budget, point_buckets=point_buckets)
        out.update(objective=res.value, schedule=res.schedule, bound=res.bound,
                   status="budget_exceeded" if res.status == "budget_exceeded" else "ok",
                   buckets=res.extra.get("buckets"), note="gva")
        return out
    graph, rtws, bs = _tree_setup(instance)
    out["buckets"] = len(bs)
    if method == "exact":
        a = exact_enumerate(instance, bs).assignment
        out["gap"] = 0.0
    elif method == "bnb":
        if formulation == "va":
            model = build_va(instance, bs)
        elif formulation == "twof":
            model = build_twof(instance, pseudo_platoon_graph(rtws))
        elif formulation == "ct":
            model = build_ct(instance)
        else:
            raise InvalidParams(f"bnb cannot solve formulation {formulation!r}")
        res = branch_and_bound(model, time_budget=budget)
        out.update(bound=res.bound, gap=res.gap, status="ok" if res.status == "optimal" else res.status,
                   note=formulation)
        if res.values is None:
            out.update(objective=float("nan"), schedule={})
            return out
        if formulation == "va":
            a = assignment_from_values(res.values)
        else:
            out.update(objective=res.objective, schedule={}, note=f"{formulation}; no schedule decoded")
            return out
    elif method == "greedy":
        a = approx.greedy_iterative(instance, bs).assignment
    elif method == "greedy2":
        a = approx.greedy_two_bucket(instance, bs).assignment
    elif method == "ptas":
        r = approx.ptas(instance, bs, approx.PtasParams(ptas_n0, ptas_n1))
        a = r.assignment
        out["note"] = f"guarantee={str(r.guarantee).lower()}"
    elif method == "lp-round":
        r = approx.lp_round(instance, bs, seed=seed)
        a = r.assignment
        out["bound"] = r.lp_value
        out["note"] = f"mean={r.mean!r}"
    else:
        raise InvalidParams(f"unknown method {method!r}")
    sched = decode_schedule(instance, bs, rtws, a)
    out.update(objective=evaluate_schedule(instance, sched).total, schedule=sched)
    return out


def _csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands
def cmd_generate(args) -> int:
    params = GenParams(edge_count=args.edges, N=args.vehicles, gamma_full=args.gamma_full,
                       gamma_ext=args.gamma_ext, seed=args.seed, lam=args.lam,
                       sigma_l=args.sigma_l, sigma_f=args.sigma_f,
                       network="custom" if args.network_file else "artifnet")
    network = None
    if args.network_file:
        d = json.loads(Path(args.network_file).read_text())
        network = Instance.from_dict({**d, "vehicles": []}).network
    inst = generate(params, network)
    text = inst.to_json()
    _emit(text + "\n", args.out)
    kind = build_route_graph(inst).kind
    print(f"vehicles={len(inst.vehicles)} edges={len(inst.network.edges)} route_graph={kind}",
          file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_discretize(args) -> int:
    inst = load_instance(args.instance)
    graph = build_route_graph(inst)
    if not graph.is_tree_like():
        from .looped import loop_break
        lb = loop_break(inst, args.quantum)
        _emit(lb.to_json() + "\n", args.out)
        return EXIT_OK
    rtws = compute_rtws(inst, graph)
    bs = adaptive_discretize(rtws)
    distinct = len({(round(w.lo, 9), round(w.hi, 9)) for w in rtws.values()})
    doc = {"rtws": {str(v): [w.lo, w.hi] for v, w in rtws.items()}, **bs.to_dict(),
           "summary": {"buckets": len(bs), "distinct_rtws": distinct,
                       "within_bounds": distinct <= len(bs) <= 2 * distinct - 1}}
    _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    t0 = time.perf_counter()
    res = run_method(inst, args.method, args.budget_sec, args.seed, args.formulation,
                     point_buckets=args.point_buckets)
    row = {"instance": inst.name or Path(args.instance).stem, "method": args.method,
           "wall_time": f"{time.perf_counter() - t0:.4f}", "seed": args.seed, **res}
    _emit(_csv([row], RESULT_FIELDS), args.out)
    if args.schedule_out or args.out:
        path = args.schedule_out or str(Path(args.out).with_suffix(".schedule.json"))
        Path(path).write_text(json.dumps({str(k): v for k, v in res["schedule"].items()}, indent=1) + "\n")
    return EXIT_BUDGET if res["status"] == "budget_exceeded" else EXIT_OK


def cmd_export(args) -> int:
    inst = load_instance(args.instance)
    graph = build_route_graph(inst)
    form = args.formulation
    if form == "gva":
        if graph.is_tree_like():
            print("notice: route graph has no loops; exporting va instead of gva", file=sys.stderr)
            form = "va"
        else:
            from .looped import loop_break
            model = build_gva(loop_break(inst, args.quantum, point_buckets=args.point_buckets))
    if form != "gva":
        rtws = compute_rtws(inst, graph)
        if form == "va":
            model = build_va(inst, adaptive_discretize(rtws))
        elif form == "twof":
            model = build_twof(inst, pseudo_platoon_graph(rtws))
        elif form == "ct":
            model = build_ct(inst)
        else:
            model = build_lp_relax(inst, adaptive_discretize(rtws))
    _emit(export_lp(model), args.out)
    print(model.stats_json(), file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def _distinct(rtws) -> int:
    return len({(round(w.lo, 9), round(w.hi, 9)) for w in rtws.values()})


def cmd_sweep(args) -> int:
    base = load_instance(args.instance)
    ratios = [float(r) for r in args.ratios.split(",")] if args.ratios else \
        [round(0.01 * k, 2) for k in range(1, 16)]
    # one stream per trial, shared by all ratios so trends are not masked by noise
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(args.trials)]
    rows = []
    for ratio in ratios:
        gamma_ext = ratio * args.gamma_full
        objs, sizes, ok = [], [], True
        for s in seeds:
            inst = with_time_windows(base, args.gamma_full, gamma_ext, s)
            res = run_method(inst, args.method, args.budget_sec, s)
            objs.append(res["objective"])
            rtws = compute_rtws(inst, build_route_graph(inst))
            n = len(adaptive_discretize(rtws))
            sizes.append(n)
            ok &= _distinct(rtws) <= n <= 2 * _distinct(rtws) - 1
        rows.append({"ratio": ratio, "gamma_ext": gamma_ext, "trials": len(seeds),
                     "objective_mean": float(np.mean(objs)), "objective_std": float(np.std(objs)),
                     "buckets_mean": float(np.mean(sizes)), "buckets_std": float(np.std(sizes)),
                     "buckets_within_bounds": ok})
    _emit(_csv(rows, SWEEP_FIELDS), args.out)
    return EXIT_OK


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="frcvp", description="Departure-time coordination for platooning vehicles.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="random ArtifNet instance (or vehicles on a given network)")
    g.add_argument("--edges", type=int, default=100)
    g.add_argument("--vehicles", type=int, default=100)
    g.add_argument("--gamma-full", type=float, default=50.0)
    g.add_argument("--gamma-ext", type=float, default=2.0)
    g.add_argument("--lam", type=int, default=None, help="platoon size limit (default: none)")
    g.add_argument("--sigma-l", type=float, default=0.05)
    g.add_argument("--sigma-f", type=float, default=0.1)
    g.add_argument("--network-file", help="instance JSON whose network is reused")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("discretize", help="RTWs and time buckets as JSON")
    d.add_argument("--instance", required=True)
    d.add_argument("--quantum", type=float, default=1.0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_discretize)

    s = sub.add_parser("solve", help="solve and write one CSV result row")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", choices=METHODS, default="bnb")
    s.add_argument("--formulation", choices=("va", "twof", "ct"), default="va")
    s.add_argument("--budget-sec", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--schedule-out")
    s.add_argument("--point-buckets", action="store_true",
                   help="loopy instances: singleton bucket at every break point")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("export", help="write a model in LP format")
    e.add_argument("--instance", required=True)
    e.add_argument("--formulation", choices=FORMULATIONS, default="va")
    e.add_argument("--quantum", type=float, default=1.0)
    e.add_argument("--point-buckets", action="store_true",
                   help="gva: singleton bucket at every break point")
    e.add_argument("--out")
    e.set_defaults(func=cmd_export)

    w = sub.add_parser("sweep", help="objective and bucket count versus extension ratio")
    w.add_argument("--instance", required=True)
    w.add_argument("--ratios", help="comma separated extension ratios (default 0.01..0.15)")
    w.add_argument("--trials", type=int, default=20)
    w.add_argument("--gamma-full", type=float, default=50.0)
    w.add_argument("--method", choices=METHODS, default="greedy")
    w.add_argument("--budget-sec", type=float, default=None)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FrcvpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
