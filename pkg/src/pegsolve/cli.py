"""Operator surface: generate graphs, solve tables, evaluate pairings,
validate tables against the independent oracle, serve policies.

Result payloads go to stdout or ``--out`` and are byte-stable given the same
flags and seeds; wall-time and other environment-dependent diagnostics go to
stderr only.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from time import perf_counter

import numpy as np

from . import dp as dp_mod
from .dp import bellman_residual_check, load_table, save_table, solve_dp, value_iteration_oracle
from .errors import PegError
from .game import load_spec, state_unindex
from .graph import gen_grid, gen_scale_free, graph_to_text
from .policies import parse_policy_arg
from .server import serve_stdio, serve_tcp
from .sim import evaluate


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen_graph(args) -> int:
    if args.kind == "grid":
        graph = gen_grid(args.width, args.height)
    else:
        graph = gen_scale_free(args.nodes, args.attach, args.seed)
    exits: tuple[int, ...] = ()
    if args.exits:
        rng = np.random.Generator(np.random.PCG64(args.seed))
        exits = tuple(
            sorted(int(x) for x in rng.choice(graph.node_count, size=args.exits, replace=False))
        )
    _emit(graph_to_text(graph, exits), args.out)
    print(
        f"{graph.node_count} nodes, {graph.edge_count} edges, {len(exits)} exits",
        file=sys.stderr,
    )
    return 0


def cmd_solve(args) -> int:
    spec = load_spec(args.spec)
    start = perf_counter()
    table = solve_dp(spec, state_cap=args.state_cap)
    wall = perf_counter() - start
    if args.out:
        save_table(table, args.out)
    stats = table.stats
    lines = [
        f"states {stats.states}",
        f"finite_fraction {table.finite_fraction!r}",
        f"max_finite_steps {stats.max_finite}",
        f"pushes {stats.pushes}",
    ]
    sys.stdout.write("\n".join(lines) + "\n")
    print(f"wall_time {wall:.3f}s backend={stats.backend}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    spec = load_spec(args.spec)
    table = load_table(args.table, spec) if args.table else None
    pursuer = parse_policy_arg("pursuer", args.pursuer, table=table)
    evader = parse_policy_arg("evader", args.evader, table=table)
    if args.state_cap:
        pursuer.state_cap = args.state_cap
        evader.state_cap = args.state_cap
    report = evaluate(
        spec, pursuer, evader, args.episodes, args.seed, threads=args.threads
    )
    if args.format == "csv":
        text = report.CSV_HEADER + "\n" + report.to_csv_row() + "\n"
    else:
        text = report.to_json_line() + "\n"
    _emit(text, args.out)
    return 0


def cmd_validate(args) -> int:
    spec = load_spec(args.spec)
    if args.table:
        table = load_table(args.table, spec)
    else:
        table = solve_dp(spec, state_cap=args.state_cap or dp_mod.DEFAULT_STATE_CAP)
    oracle = value_iteration_oracle(spec, tol=args.vi_tol, state_guard=args.state_cap or dp_mod.VI_STATE_GUARD)
    induced = np.where(
        table.steps == dp_mod.STEPS_INF,
        0.0,
        spec.discount ** table.steps.astype(np.float64),
    )
    deviation = float(np.abs(induced - oracle).max())
    violations = bellman_residual_check(
        table, spec, state_guard=args.state_cap or dp_mod.CHECK_STATE_GUARD
    )
    worst = int(np.argmax(np.abs(induced - oracle)))
    ok = deviation < args.tolerance and violations == 0
    lines = [
        f"max_value_deviation {deviation!r}",
        f"worst_state {state_unindex(spec.n, spec.m, worst)}",
        f"bellman_violations {violations}",
        f"verdict {'pass' if ok else 'fail'}",
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if ok else 1


def cmd_serve(args) -> int:
    spec = load_spec(args.spec)
    table = load_table(args.table, spec) if args.table else None
    if args.tcp is not None:
        serve_tcp(spec, args.kind, args.tcp, table=table, seed=args.seed)
    else:
        serve_stdio(spec, args.kind, table=table, seed=args.seed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pegsolve",
        description="Solve, simulate, and validate graph pursuit-evasion games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="write a graph file")
    p.add_argument("kind", choices=["grid", "scale-free"])
    p.add_argument("--width", type=int, default=10)
    p.add_argument("--height", type=int, default=10)
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--attach", type=int, default=2)
    p.add_argument("--exits", type=int, default=0, help="sample this many exit nodes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("solve", help="build and persist a pursuit table")
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    p.add_argument("--state-cap", type=int, default=dp_mod.DEFAULT_STATE_CAP)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="run seeded episodes for a policy pairing")
    p.add_argument("--spec", required=True)
    p.add_argument("--pursuer", required=True)
    p.add_argument("--evader", required=True)
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table", help="persisted table for dp policies")
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "jsonl"], default="jsonl")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--state-cap", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("validate", help="check a table against the value-iteration oracle")
    p.add_argument("--spec", required=True)
    p.add_argument("--table")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--vi-tol", type=float, default=1e-12)
    p.add_argument("--state-cap", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="serve a built-in policy over the exchange protocol")
    p.add_argument("--spec", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tcp", type=int, help="listen on this port instead of stdio")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PegError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error[argument]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
