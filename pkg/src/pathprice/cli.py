"""Command-line entry point.

Verbs: list the catalog, run an experiment (by id or spec file), validate a
saved instance, solve the pricing ODE for one (capacity, p_bar), and export a
theoretical bound curve as CSV.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bounds as bounds_mod
from .arrivals import from_jsonl, validate_instance
from .cost import min_gamma
from .harness import ExperimentSpec, catalog, run_experiment
from .topology import Network


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )
    return args.func(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathprice")
    sub = parser.add_subparsers(required=True)

    p_list = sub.add_parser("list", help="show the experiment catalog")
    p_list.set_defaults(func=cmd_list)

    p_run = sub.add_parser("run", help="run a catalog experiment or a spec JSON file")
    p_run.add_argument("spec", help="catalog id (E2..E8) or path to a spec JSON document")
    p_run.add_argument("--out", default="results", help="output directory")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--seeds", type=int, default=None, help="override seed count")
    p_run.add_argument("--requests", type=int, default=None, help="override requests per instance")
    p_run.add_argument("--time-limit", type=float, default=None, help="override the optimum solver budget")
    p_run.add_argument(
        "--save-instances", action="store_true", help="save every cell's arrivals as JSONL"
    )
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="validate a saved instance against a network")
    p_val.add_argument("instance", help="instance JSONL file")
    p_val.add_argument("--network", required=True, help="network JSON file")
    p_val.set_defaults(func=cmd_validate)

    p_bvp = sub.add_parser("bvp", help="minimal pricing aggressiveness for one capacity / p_bar")
    p_bvp.add_argument("capacity", type=float)
    p_bvp.add_argument("p_bar", type=float)
    p_bvp.add_argument("--tol", type=float, default=1e-3)
    p_bvp.set_defaults(func=cmd_bvp)

    p_b = sub.add_parser("bounds", help="evaluate a bound curve over a gamma grid as CSV")
    p_b.add_argument(
        "family",
        choices=["line_uniform", "line_hetero", "tree_sr", "tree_el"],
    )
    p_b.add_argument("--M", type=int, required=True)
    p_b.add_argument("--m", type=int, default=1)
    p_b.add_argument("--p-bar", type=float, default=6.0)
    p_b.add_argument("--beta", type=float, default=1.0)
    p_b.add_argument("--profile", default="uniform", choices=["uniform", "exp_decay"])
    p_b.add_argument("--gamma-min", type=float, default=0.25)
    p_b.add_argument("--gamma-max", type=float, default=16.0)
    p_b.add_argument("--points", type=int, default=64)
    p_b.set_defaults(func=cmd_bounds)
    return parser


def cmd_list(args) -> int:
    for spec in catalog().values():
        print(f"{spec.id}  ({spec.figure})  {spec.description}")
        print(f"    pattern={spec.pattern} sweep={spec.sweep_name} "
              f"gammas={spec.gammas} seeds={spec.n_seeds}")
    return 0


def cmd_run(args) -> int:
    specs = catalog()
    if args.spec in specs:
        spec = specs[args.spec]
    else:
        spec = ExperimentSpec.from_json(Path(args.spec).read_text())
    # command-line flags take precedence over the spec document
    if args.seeds is not None:
        spec.n_seeds = args.seeds
    if args.requests is not None:
        spec.n_requests = args.requests
    if args.time_limit is not None:
        spec.opt_time_limit = args.time_limit
    if args.save_instances:
        spec.save_instances = True
    out = run_experiment(spec, args.out, workers=args.workers)
    print(out)
    return 0


def cmd_validate(args) -> int:
    net = Network.from_json(Path(args.network).read_text())
    inst = from_jsonl(Path(args.instance).read_text(), net)
    violations = validate_instance(inst, net)
    if not violations:
        print(f"OK: {len(inst.requests)} requests, no violations")
        return 0
    for rid, rule in violations:
        print(f"request {rid}: violates {rule}")
    return 1


def cmd_bvp(args) -> int:
    res = min_gamma(args.capacity, args.p_bar, tol=args.tol)
    print(
        json.dumps(
            {
                "capacity": args.capacity,
                "p_bar": args.p_bar,
                "min_gamma": res.gamma,
                "bracket": [res.bracket_lo, res.bracket_hi],
                "delta_sensitivity": res.delta_sensitivity,
                "residual_max": res.solution.residual_max,
                "converged": res.solution.converged,
                "boundary_excess": res.boundary_excess,
            }
        )
    )
    return 0


def cmd_bounds(args) -> int:
    grid = [
        args.gamma_min + i * (args.gamma_max - args.gamma_min) / (args.points - 1)
        for i in range(args.points)
    ]
    print("family,gamma,m,M,p_bar,beta,profile,bound")
    for g in grid:
        if args.family == "line_uniform":
            v = bounds_mod.cr_line_uniform(g, args.M, args.m, args.p_bar)
        elif args.family == "line_hetero":
            v = bounds_mod.cr_line_hetero(g, args.M, args.m, args.p_bar, args.beta)
        elif args.family == "tree_sr":
            v = bounds_mod.cr_tree_sr(g, args.M, args.m, args.p_bar, args.profile)
        else:
            v = bounds_mod.cr_tree_el(g, args.M, args.m, args.p_bar, args.profile)
        print(f"{args.family},{g!r},{args.m},{args.M},{args.p_bar!r},{args.beta!r},{args.profile},{v!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
