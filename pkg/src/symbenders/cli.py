"""Command-line entry point: ``symbenders gen | solve | bench``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .bench import (
    ALL_SETTINGS,
    InstanceError,
    ObjectiveMismatch,
    Setting,
    aggregate,
    build_model,
    format_table,
    load_dir,
    load_instance,
    records_csv,
    run_matrix,
    timing_csv,
)
from .binpack import BinPackInstance, build_sdg_binpack
from .instgen import Family, GenSpec, generate
from .mip import MipStatus, Mode, SolveSettings, solve_bnc
from .scheduling import build_sdg_scheduling
from .sdg import to_dot

EXIT_OK, EXIT_FAILURE, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_INPUT = 0, 1, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symbenders", description="Symmetry-aware logic-based Benders decomposition.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded instance")
    g.add_argument("--family", required=True, choices=[f.value for f in Family])
    g.add_argument("--seed", required=True, type=int)
    g.add_argument("--batches", required=True, type=int)
    g.add_argument("--batch-size", required=True, type=int)
    g.add_argument("--slots", type=int, default=None, help="bins or machines (family default if omitted)")
    g.add_argument("--out", required=True, type=Path)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--instance", required=True, type=Path)
    s.add_argument("--mode", default="plain", choices=[m.value for m in Mode])
    s.add_argument("--symbreak", default="off", choices=["on", "off"])
    s.add_argument("--time-limit", type=float, default=60.0)
    s.add_argument("--node-limit", type=int, default=10_000_000)
    s.add_argument("--json-out", type=Path)
    s.add_argument("--pool-out", type=Path, help="write the abstract cut pool as JSON")
    s.add_argument("--dot-out", type=Path, help="write the symmetry detection graph in DOT format")

    b = sub.add_parser("bench", help="run a setting matrix over a directory of instances")
    b.add_argument("--dir", required=True, type=Path)
    b.add_argument("--settings", nargs="*", default=None, help="mode or mode:on|off (default: all 8)")
    b.add_argument("--time-limit", type=float, default=60.0)
    b.add_argument("--node-limit", type=int, default=10_000_000)
    b.add_argument("--csv", type=Path, help="per-run CSV without wall-clock columns")
    b.add_argument("--timing-csv", type=Path)
    return ap


def _cmd_gen(args) -> int:
    try:
        spec = GenSpec(args.seed, Family(args.family), args.batches, args.batch_size, args.slots)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    inst, labels = generate(spec)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(inst.to_json(), indent=1) + "\n")
    args.out.with_name(args.out.stem + ".labels.json").write_text(json.dumps(labels) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    try:
        inst = load_instance(args.instance)
        model = build_model(inst)
    except (InstanceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    settings = SolveSettings(
        mode=Mode(args.mode), symbreak=args.symbreak == "on",
        time_limit_sec=args.time_limit, node_limit=args.node_limit,
    )
    if args.dot_out:
        graph = build_sdg_binpack(inst, model) if isinstance(inst, BinPackInstance) else build_sdg_scheduling(inst, model)
        args.dot_out.write_text(to_dot(graph))
    r = solve_bnc(model, settings)
    summary = {
        "status": r.status.value,
        "objective": r.objective if math.isfinite(r.objective) else None,
        "nodes": r.nodes,
        "separated_solutions": r.separated_solutions,
        "oracle_calls": r.oracle_calls,
        "pool_hits": r.pool_hits,
        "cuts_added": r.cuts_added,
        "time_sec": r.time_sec,
        "cut_time_sec": r.cut_time_sec,
        "oracle_time_sec": r.oracle_time_sec,
        "solution": None if r.incumbent is None else [round(float(v), 9) for v in r.incumbent],
    }
    print(f"status {summary['status']}  objective {r.objective:g}  nodes {r.nodes}  #sepa {r.separated_solutions}  "
          f"oracle calls {r.oracle_calls}  time {r.time_sec:.3f}s")
    if args.json_out:
        args.json_out.write_text(json.dumps(summary, indent=1) + "\n")
    if args.pool_out:
        args.pool_out.write_text((r.pool.to_json() if r.pool is not None else "[]") + "\n")
    if r.status is MipStatus.OPTIMAL:
        return EXIT_OK
    if r.status is MipStatus.INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_LIMIT


def _cmd_bench(args) -> int:
    try:
        instances = load_dir(args.dir)
        settings = ALL_SETTINGS if not args.settings else tuple(Setting.parse(t) for t in args.settings)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        records = run_matrix(instances, settings, args.time_limit, args.node_limit)
    except ObjectiveMismatch as exc:
        print(f"objective mismatch: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if args.csv:
        args.csv.write_text(records_csv(records))
    if args.timing_csv:
        args.timing_csv.write_text(timing_csv(records))
    sys.stdout.write(format_table(aggregate(records)))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    handler = {"gen": _cmd_gen, "solve": _cmd_solve, "bench": _cmd_bench}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
