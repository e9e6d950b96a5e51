"""Command line interface.

Subcommands::

    solve     run one algorithm on a model, write assignment and trace
    generate  write a seeded synthetic grid instance
    compare   run several algorithms on one model, write a merged trace
    verify    exhaustive and rank-oracle checks on a small model

Exit codes: 0 success, 1 solver truncation or failed verification, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import diagram as dg
from . import oracle
from .engine import SolverParams, run
from .factor_graph import energy, random_grid, validate
from .io import emit_trace, load_model, merge_traces, save_model
from .pursuit import run_with_pursuit
from .relaxations import (
    all_subsets_spec,
    cycle_spec,
    dd_spec,
    gmplp_spec,
    max_intersection_spec,
    pi_system_spec,
    powerset_spec,
)

ALGORITHMS = {
    "gmplp": gmplp_spec,
    "dd": dd_spec,
    "cycle": cycle_spec,
    "ps": powerset_spec,
    "pi-s": pi_system_spec,
    "mi": max_intersection_spec,
}


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("beliefs", "messages"), default="beliefs")
    p.add_argument("--pursuit", choices=("none", "stealth"), default="none")
    p.add_argument("--tg", type=float, default=1e-8, help="inner-loop tolerance")
    p.add_argument("--ta", type=float, default=1e-6, help="outer gap tolerance")
    p.add_argument("--k1", type=int, default=1000, help="sweeps in the first round")
    p.add_argument("--k2", type=int, default=20, help="sweeps per pursuit round")
    p.add_argument("--n", type=int, default=20, help="clusters added per pursuit round")
    p.add_argument("--time-limit", type=float, default=3600.0)
    p.add_argument("--trace", type=Path, help="trace output path (.csv or .json)")


def _params(args: argparse.Namespace) -> SolverParams:
    return SolverParams(
        inner_tol=args.tg,
        outer_tol=args.ta,
        max_sweeps=args.k1,
        pursuit_sweeps=args.k2,
        clusters_per_round=args.n,
        time_limit=args.time_limit,
    )


def _trace_fmt(path: Path) -> str:
    return "json" if path.suffix.lower() == ".json" else "csv"


def _run_one(graph, alg: str, args: argparse.Namespace):
    spec = ALGORITHMS[alg](graph)
    params = _params(args)
    if args.pursuit == "stealth":
        result = run_with_pursuit(graph, spec, params, args.mode, label=alg)
        truncated = result.truncated
    else:
        result = run(graph, spec, params, args.mode, label=alg)
        truncated = result.truncated
    return result, truncated


def _cmd_solve(args: argparse.Namespace) -> int:
    graph = load_model(args.model)
    result, truncated = _run_one(graph, args.alg, args)
    if args.trace:
        emit_trace(result.trace, args.trace, _trace_fmt(args.trace))
    payload = {
        "algorithm": args.alg,
        "assignment": list(result.assignment),
        "energy": energy(graph, result.assignment),
        "dual": result.dual,
        "gap": result.gap,
        "truncated": truncated,
    }
    if args.out:
        Path(args.out).write_text(json.dumps(payload) + "\n")
    else:
        print(json.dumps(payload))
    return 1 if truncated else 0


def _cmd_generate(args: argparse.Namespace) -> int:
    dims = args.grid.lower().split("x")
    if len(dims) != 2:
        print("--grid expects WxH, e.g. 16x16", file=sys.stderr)
        return 2
    width, height = int(dims[0]), int(dims[1])
    graph = random_grid(width, height, args.states, args.seed)
    save_model(graph, args.out)
    print(f"wrote {width}x{height} grid with {len(graph.clusters)} clusters to {args.out}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    graph = load_model(args.model)
    algs = [a.strip() for a in args.alg.split(",") if a.strip()]
    unknown = [a for a in algs if a not in ALGORITHMS]
    if unknown:
        print(f"unknown algorithms: {', '.join(unknown)}", file=sys.stderr)
        return 2
    traces = []
    any_truncated = False
    for alg in algs:
        result, truncated = _run_one(graph, alg, args)
        any_truncated = any_truncated or truncated
        traces.append(result.trace)
        print(f"{alg}: dual={result.dual:.6f} primal={result.primal:.6f} "
              f"gap={result.gap:.2e}")
    if args.trace:
        emit_trace(merge_traces(traces), args.trace, _trace_fmt(args.trace))
    return 1 if any_truncated else 0


def _cmd_verify(args: argparse.Namespace) -> int:
    graph = load_model(args.model)
    checks: list[tuple[str, bool, str]] = []

    problems = validate(graph)
    checks.append(("model invariants", not problems, "; ".join(problems)))

    try:
        exact = oracle.brute_force_map(graph, cap=args.cap)
    except Exception as exc:  # cap exceeded or invalid model
        print(f"verify: cannot enumerate model: {exc}", file=sys.stderr)
        return 1

    params = SolverParams(max_sweeps=args.k1)
    for alg in ("dd", "mi"):
        spec = ALGORITHMS[alg](graph)
        result = run(graph, spec, params, label=alg)
        ok = result.dual >= exact.value - 1e-9
        detail = f"dual={result.dual:.6f} optimum={exact.value:.6f}"
        checks.append((f"{alg} weak duality", ok, detail))
        if result.gap <= 1e-6:
            checks.append((
                f"{alg} exact decoding",
                energy(graph, result.assignment) == exact.value,
                detail,
            ))

    anchors = graph.clusters
    base = dg.diagram_from_relaxation(all_subsets_spec(graph), anchors)
    base_sys = oracle.constraint_system(base, graph.cardinalities)
    for alg in ("ps", "pi-s", "mi"):
        d = dg.diagram_from_relaxation(ALGORITHMS[alg](graph), anchors)
        sys_d = oracle.constraint_system(d, graph.cardinalities)
        checks.append((
            f"{alg} diagram equivalent to unreduced baseline",
            oracle.affine_system_equal(base_sys, sys_d),
            "",
        ))

    failed = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail and not ok else ""
        print(f"{status}: {name}{suffix}")
        failed += 0 if ok else 1
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maplp")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one algorithm on a model")
    p_solve.add_argument("--model", type=Path, required=True)
    p_solve.add_argument("--alg", choices=sorted(ALGORITHMS), required=True)
    p_solve.add_argument("--out", type=Path, help="assignment output path (JSON)")
    _add_solver_flags(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_gen = sub.add_parser("generate", help="write a seeded grid instance")
    p_gen.add_argument("--grid", required=True, help="WxH, e.g. 16x16")
    p_gen.add_argument("--states", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", type=Path, required=True)
    p_gen.set_defaults(func=_cmd_generate)

    p_cmp = sub.add_parser("compare", help="run several algorithms on one model")
    p_cmp.add_argument("--model", type=Path, required=True)
    p_cmp.add_argument("--alg", required=True,
                       help="comma-separated algorithm names")
    _add_solver_flags(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_ver = sub.add_parser("verify", help="oracle checks on a small model")
    p_ver.add_argument("--model", type=Path, required=True)
    p_ver.add_argument("--cap", type=int, default=1_000_000,
                       help="state-space cap for enumeration")
    p_ver.add_argument("--k1", type=int, default=500)
    p_ver.set_defaults(func=_cmd_verify)
    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; pass both through
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"maplp: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"maplp: {exc}", file=sys.stderr)
        return 2


def main() -> None:  # console entry point
    sys.exit(cli_main())
