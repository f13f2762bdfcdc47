"""Command-line front end.

Subcommands: generate, solve, frontier, compare, evaluate. Exit codes: 0 on
success, 2 for usage or I/O problems, 3 when the model is infeasible, 4 when
a supplied solution fails validation. Human-readable summaries go to stdout;
machine artifacts only to --out paths.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from typing import Optional

from . import evaluate as ev
from . import exact, gen, heuristic, io
from .model import Infeasible, Instance, SolveOptions, validate_instance

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_INVALID_SOLUTION = 4


def _load_checked_instance(path: str, q_override: Optional[int]) -> io.InstanceFile:
    loaded = io.load_instance(path)
    inst = loaded.instance
    if q_override is not None:
        inst = dataclasses.replace(inst, q=q_override)
        loaded = dataclasses.replace(loaded, instance=inst)
    diags = validate_instance(inst)
    if diags:
        raise ValueError("invalid instance: " + "; ".join(diags))
    return loaded


def _print_criteria(report: ev.CriteriaReport) -> None:
    print(f"boxes: {report.num_boxes}")
    print(f"total cost: {report.total_cost:.2f} "
          f"(fixed {report.fixed_cost:.2f} + operational {report.operational_cost:.2f})")
    print(f"covered >=1: {report.frac_covered_1:.3f}  covered >=q: {report.frac_covered_q:.3f}")
    print(f"min access: {report.min_access:.4f}  avg access: {report.avg_access:.4f}")
    for name in ("max_dist_closest", "max_dist_third_closest",
                 "avg_dist_closest", "avg_dist_closest3", "frac_no_car_covered"):
        value = getattr(report, name)
        if value is not None:
            print(f"{name}: {value:.4f}")


def _options_from_args(args) -> SolveOptions:
    return SolveOptions(
        r=args.r,
        objective_mode="max_coverage" if args.max_coverage else "min_cost",
        budget=args.budget,
        tour_cost_cap=args.cmax,
        fixed_count=args.count,
        dominance_filter=args.dominance_filter,
        base_coverage=args.base_coverage,
    )


def cmd_generate(args) -> int:
    cfg = gen.GenConfig(
        num_populations=args.populations,
        num_locations=args.locations,
        seed=args.seed,
    )
    inst = gen.generate(cfg)
    io.save_instance(inst, args.out, metadata=gen.generator_metadata(cfg))
    print(f"wrote {args.out}: {args.locations} locations, "
          f"{args.populations} populations, seed {args.seed}")
    return EXIT_OK


def cmd_solve(args) -> int:
    loaded = _load_checked_instance(args.instance, args.q)
    inst = loaded.instance
    options = _options_from_args(args)
    solution = exact.solve_exact(inst, options)
    diags = exact.validate_solution(inst, options, solution)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return EXIT_INVALID_SOLUTION
    _print_criteria(ev.criteria(inst, solution, durations=loaded.durations))
    print("tour: " + " -> ".join(solution.tour))
    if args.out:
        io.save_solution(solution, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _exact_sweep(inst: Instance, front: heuristic.Frontier) -> list[heuristic.FrontierEntry]:
    warm = {e.solution.min_access: e.solution for e in front}
    pairs = exact.solve_exact_sweep(
        inst, list(warm), warm_by_bound=warm)
    return [heuristic.FrontierEntry(solution=sol, r_satisfied=bound)
            for bound, sol in pairs]


def cmd_frontier(args) -> int:
    loaded = _load_checked_instance(args.instance, None)
    inst = loaded.instance
    front = heuristic.frontier(inst, epsilon=args.epsilon)
    if args.method == "heuristic":
        io.write_frontier_csv(front, args.out)
        print(f"frontier: {len(front)} entries -> {args.out}")
        return EXIT_OK
    swept = _exact_sweep(inst, front)
    kept_pairs = set(heuristic.nondominated(
        [(e.solution.total_cost, e.solution.min_access) for e in swept]))
    unique: dict[tuple[float, float], heuristic.FrontierEntry] = {}
    for entry in swept:
        pair = (entry.solution.total_cost, entry.solution.min_access)
        if pair in kept_pairs and pair not in unique:
            unique[pair] = entry
    rows = sorted(unique.values(),
                  key=lambda e: (e.solution.min_access, e.solution.total_cost))
    io.write_frontier_csv(rows, args.out)
    print(f"exact sweep: {len(rows)} entries over {len(front)} bounds -> {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    loaded = _load_checked_instance(args.instance, None)
    inst = loaded.instance
    if len(inst.ids) > args.max_size and not args.force:
        print(f"instance has {len(inst.ids)} locations  (> {args.max_size}); "
              "pass --force to run the exact sweep anyway", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    front = heuristic.frontier(inst)
    heur_seconds = time.perf_counter() - t0
    t0 = time.perf_counter()
    swept = heuristic.Frontier(tuple(_exact_sweep(inst, front)))
    exact_seconds = time.perf_counter() - t0
    report = ev.cost_deviation(swept, front, heuristic_seconds=heur_seconds,
                               exact_seconds=exact_seconds)
    io.write_compare_csv(report, args.out)
    mean = (f"{report.mean_percent_deviation:.2f}%"
            if report.mean_percent_deviation is not None else "undefined (no overlap)")
    print(f"mean cost deviation: {mean} over {len(report.pairs)} matched bounds")
    print(f"heuristic: {heur_seconds:.2f}s for {report.solution_counts['heuristic']} "
          f"entries; exact sweep: {exact_seconds:.2f}s")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    loaded = _load_checked_instance(args.instance, None)
    inst = loaded.instance
    solution = io.load_solution(args.solution)
    known = set(inst.ids)
    strays = (set(solution.selected) | set(solution.tour)) - known
    if strays:
        print(f"solution references unknown locations: {sorted(strays)}",
              file=sys.stderr)
        return EXIT_USAGE
    unknown_pops = set(solution.access_by_population) - {p.id for p in inst.populations}
    if unknown_pops:
        print(f"solution references unknown populations: {sorted(unknown_pops)}",
              file=sys.stderr)
        return EXIT_USAGE
    distances = io.read_distances_csv(args.distances) if args.distances else None
    if distances is not None:
        missing = [p.id for p in inst.populations if p.id not in distances]
        if missing:
            print(f"distance matrix missing populations: {missing}", file=sys.stderr)
            return EXIT_USAGE
    diags = exact.validate_solution(inst, SolveOptions(), solution)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return EXIT_INVALID_SOLUTION
    report = ev.criteria(inst, solution, distances=distances,
                         durations=loaded.durations)
    _print_criteria(report)
    if args.out:
        io.write_criteria_csv(report, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boxtour",
        description="Drop box siting and collection-tour planning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random instance file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--populations", type=int, required=True)
    p.add_argument("--locations", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve one instance exactly")
    p.add_argument("--instance", required=True)
    p.add_argument("--r", type=float, default=0.0, help="minimum access bound")
    p.add_argument("--q", type=int, default=None, help="override coverage multiplicity")
    p.add_argument("--budget", type=float, default=None)
    p.add_argument("--cmax", type=float, default=None, help="tour cost cap")
    p.add_argument("--count", type=int, default=None, help="exact number of boxes")
    p.add_argument("--max-coverage", action="store_true",
                   help="maximize covered voters instead of minimizing cost")
    p.add_argument("--base-coverage", type=int, default=0,
                   help="coverage multiplicity still enforced under --max-coverage")
    p.add_argument("--dominance-filter", action="store_true",
                   help="drop provably redundant access rows before solving")
    p.add_argument("--out", default=None, help="write the solution JSON here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("frontier", help="trace the cost/access frontier")
    p.add_argument("--instance", required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--method", choices=["heuristic", "exact-sweep"],
                   default="heuristic")
    p.add_argument("--out", required=True, help="frontier CSV path")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("compare", help="heuristic vs exact sweep on one instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True, help="pairs CSV path")
    p.add_argument("--max-size", type=int, default=60,
                   help="refuse instances with more locations than this")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("evaluate", help="report criteria for a solution file")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--distances", default=None,
                   help="population-by-location road distance CSV")
    p.add_argument("--out", default=None, help="criteria CSV path")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as exc:
        suffix = f" (population {exc.population_id})" if exc.population_id else ""
        print(f"infeasible: {exc}{suffix}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
