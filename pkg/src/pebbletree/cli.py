"""Command line interface.

Exit codes: 0 success, 1 infeasible instance or failed validation, 2 usage
or input-format error, 3 oracle budget exceeded.  Machine-readable output
goes to stdout, human summaries to stderr.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
from typing import List, Optional

from . import experiments, mapf, oracle, tree_core, upmt, validate
from ._jit import backend
from .errors import (
    BudgetExceededError,
    InfeasibleInstanceError,
    InstanceFormatError,
    InvalidTreeError,
)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)


def _cmd_solve(args) -> int:
    inst = tree_core.parse_instance(_read(args.infile))
    if args.mode == "upmt":
        plan = upmt.solve_upmt(inst, root=args.root)
        _write(args.out, upmt.format_plan(plan))
        print(f"n={inst.n} k={inst.k} moves={len(plan)}", file=sys.stderr)
    else:
        plan = mapf.solve_mapf(inst, root=args.root)
        _write(args.out, mapf.format_timed_plan(plan, inst))
        soc = mapf.sum_of_costs(plan, inst)
        print(
            f"n={inst.n} k={inst.k} moves={len(plan)}"
            f" makespan={plan.makespan} soc={soc}",
            file=sys.stderr,
        )
    return 0


def _cmd_validate(args) -> int:
    inst = tree_core.parse_instance(_read(args.infile))
    plan_text = _read(args.plan)
    if args.mode == "upmt":
        report = validate.validate_upmt(inst, upmt.parse_plan(plan_text))
    else:
        report = validate.validate_mapf(inst, mapf.parse_timed_plan(plan_text))
    print(report.as_text(), file=sys.stderr)
    print(report.as_kv())
    return 0 if report.feasible else 1


def _cmd_oracle(args) -> int:
    inst = tree_core.parse_instance(_read(args.infile))
    if args.mode == "bfs":
        budget = args.budget if args.budget else oracle.DEFAULT_BFS_CONFIGS
        value = oracle.oracle_opt_bfs(inst, max_configs=budget)
    elif args.mode == "matching":
        value = oracle.oracle_opt_matching(inst)
    else:
        objective = "makespan" if args.mode == "mapf-makespan" else "soc"
        budget = args.budget if args.budget else oracle.DEFAULT_MAPF_EXPANSIONS
        value = oracle.oracle_mapf_optimal(
            inst,
            objective,
            allow_bidirectional=not args.unidirectional,
            max_expansions=budget,
        )
    print(value)
    return 0


def _cmd_gen(args) -> int:
    inst = tree_core.random_instance(args.n, args.k, args.seed, dist=args.dist)
    _write(args.out, tree_core.format_instance(inst))
    return 0


def _cmd_experiment(args) -> int:
    cfg = experiments.ExperimentConfig.from_file(args.config)
    if args.out is None or args.out == "-":
        experiments.run_opt_experiment(cfg, sys.stdout)
    else:
        experiments.run_opt_experiment(cfg, args.out)
        print(f"wrote {args.out}", file=sys.stderr)
    if args.check:
        result = experiments.check_expected_bound(cfg)
        print(result.as_text(), file=sys.stderr)
        return 0 if result.passed else 1
    return 0


def _bench_rows(args) -> List[experiments.BenchRow]:
    n_list = [int(tok) for tok in args.n_list.split(",") if tok]
    return experiments.bench_solve(
        n_list, k_frac=args.k_frac, base_seed=args.seed, repeats=args.repeats
    )


def _cmd_bench(args) -> int:
    rows = _bench_rows(args)
    print(f"backend={backend()}")
    for r in rows:
        print(f"n={r.n} k={r.k} moves={r.moves} seconds={r.seconds:.4f}")
    for prev, cur in zip(rows, rows[1:]):
        if prev.seconds > 0:
            print(
                f"runtime ratio n={cur.n} vs n={prev.n}:"
                f" {cur.seconds / prev.seconds:.2f}"
            )
    if args.compare_backends:
        env = dict(os.environ)
        flip = "0" if backend() == "numba" else "1"
        env["PEBBLETREE_JIT"] = flip
        cmd = [
            sys.executable, "-m", "pebbletree", "bench",
            "--n-list", args.n_list,
            "--k-frac", str(args.k_frac),
            "--seed", str(args.seed),
            "--repeats", str(args.repeats),
        ]
        print("--- other backend ---")
        sys.stdout.flush()
        return subprocess.call(cmd, env=env)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pebbletree",
        description="Optimal pebble motion and anonymous MAPF on trees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an instance and print the plan")
    p.add_argument("--mode", choices=["upmt", "mapf"], default="upmt")
    p.add_argument("--in", dest="infile", required=True, help="instance file, - for stdin")
    p.add_argument("--root", type=int, default=0, help="processing root (default 0)")
    p.add_argument("--out", default=None, help="plan file (default stdout)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("validate", help="replay a plan against an instance")
    p.add_argument("--mode", choices=["upmt", "mapf"], default="upmt")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--plan", required=True, help="plan file, - for stdin")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("oracle", help="compute an independent optimum")
    p.add_argument(
        "--mode",
        choices=["bfs", "matching", "mapf-makespan", "mapf-soc"],
        default="bfs",
    )
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument(
        "--budget",
        type=int,
        default=0,
        help="configuration / expansion budget (0 = per-mode default)",
    )
    p.add_argument(
        "--unidirectional",
        action="store_true",
        help="mapf modes: each edge may be used in one direction only",
    )
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--dist", choices=["uniform", "path"], default="uniform")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("experiment", help="run a bound experiment from a JSON config")
    p.add_argument("--config", required=True, help="JSON file of ExperimentConfig fields")
    p.add_argument("--out", default=None, help="CSV file (default stdout)")
    p.add_argument(
        "--check",
        action="store_true",
        help="also check the average-case bound (exit 1 on violation)",
    )
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("bench", help="time solve + plan emission across sizes")
    p.add_argument("--n-list", default="100000,200000", help="comma-separated sizes")
    p.add_argument("--k-frac", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument(
        "--compare-backends",
        action="store_true",
        help="rerun in a subprocess with the other kernel backend",
    )
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InfeasibleInstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InstanceFormatError, InvalidTreeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
