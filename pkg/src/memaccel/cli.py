"""Command-line front end.

Thin shell over the library: every number in an output file is produced by
the workload/cost/mapper/engine modules.  Output files are byte-stable
across reruns (fixed float formatting, no timestamps).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .config import ConfigError, load_cost_table, load_hardware, load_model, load_sweep
from .cost import cost_op, roofline_point
from .engine import (CSV_COLUMNS, SweepSpec, compare_rows, result_row,
                     run_end_to_end, sweep)
from .hardware import CostTable, Engine, HardwareSpec, peak_bandwidth, peak_compute, validate
from .mapper import STRATEGIES, assign, format_plan, get_strategy
from .workload import (MATMUL_KINDS, ModelSpec, OpKind, Operator, Phase,
                       PhaseRequest, arithmetic_intensity,
                       build_decode_step_graph, build_prefill_graph, matmul_bytes,
                       op_flops)


def _fmt(value) -> str:
    # repr round-trips floats exactly, so CSV and JSON encode identical
    # numbers and reruns are byte-identical.
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, columns: list[str], rows: list[dict]):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c, "")) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def _result_payload(row: dict, res, table: CostTable) -> dict:
    payload = {
        "summary": {k: row[k] for k in ("model", "strategy", "l_in", "l_out", "batch",
                                        "ttft_s", "tpot_mean_s", "e2e_s",
                                        "prefill_J", "decode_J", "total_J")},
        "per_class": {k: row[k] for k in row if k.endswith(("_s", "_J"))
                      and any(k.startswith(p) for p in ("prefill_", "decode_"))},
        "tpot_series_s": res.tpot_series,
        "bound_fractions": {"prefill": row["prefill_membound_frac"],
                            "decode": row["decode_membound_frac"]},
        "fingerprint": row["fingerprint"],
        "cost_table": asdict(table),
    }
    return payload


def _json_dump(path: str, payload: dict):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2,
                                     default=_fmt) + "\n")


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    hw = load_hardware(args.hw)
    table = load_cost_table(args.cost) if args.cost else CostTable()
    strategy = get_strategy(args.strategy)
    res = run_end_to_end(model, hw, strategy, args.l_in, args.l_out, args.batch, table)
    from .engine import SweepPoint
    row = result_row(SweepPoint(model, strategy.name, args.l_in, args.l_out,
                                args.batch), res)
    if args.output:
        if args.format == "csv":
            write_csv(args.output, CSV_COLUMNS, [row])
        else:
            _json_dump(args.output, _result_payload(row, res, table))
    print(f"{model.name} {strategy.name} l_in={args.l_in} l_out={args.l_out} "
          f"batch={args.batch}: TTFT={res.ttft:.6e} s  "
          f"TPOT={res.tpot_mean:.6e} s  E2E={res.end_to_end:.6e} s  "
          f"E={res.prefill.energy + res.decode.energy:.6e} J")
    return 0


def cmd_sweep(args) -> int:
    spec = load_sweep(args.spec)
    hw = load_hardware(args.hw)
    table = load_cost_table(args.cost) if args.cost else CostTable()
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    rows = sweep(spec, hw, table, jobs=jobs)
    write_csv(args.output, CSV_COLUMNS, rows)
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"wrote {len(rows)} rows to {args.output} ({failed} failed)")
    return 0


def cmd_compare(args) -> int:
    spec = load_sweep(args.spec)
    hw = load_hardware(args.hw)
    table = load_cost_table(args.cost) if args.cost else CostTable()
    name_a = get_strategy(args.strategy_a).name
    name_b = get_strategy(args.strategy_b).name
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    sub = SweepSpec(spec.models, [name_a, name_b], spec.l_in, spec.l_out, spec.batch)
    rows = sweep(sub, hw, table, jobs=jobs)
    rows_a = [r for r in rows if r["strategy"] == name_a]
    rows_b = [r for r in rows if r["strategy"] == name_b]
    ratios, gm = compare_rows(rows_a, rows_b, metric=args.metric)
    for ra, ratio in ratios:
        print(f"{ra['model']} l_in={ra['l_in']} l_out={ra['l_out']} "
              f"batch={ra['batch']}: {args.strategy_a} is {ratio:.4f}x vs "
              f"{args.strategy_b} on {args.metric}")
    print(f"geomean speedup of {args.strategy_a} over {args.strategy_b} "
          f"({args.metric}): {gm:.4f}x")
    return 0


ROOFLINE_COLUMNS = ["op", "phase", "batch", "kind", "engine", "intensity",
                    "achieved", "attainable", "compute_ceiling", "bandwidth_ceiling",
                    "bound"]


def roofline_rows(model: ModelSpec, hw: HardwareSpec, table: CostTable,
                  strategy_name: str, l_in: int, batches: list[int]) -> list[dict]:
    strategy = get_strategy(strategy_name)
    rows = []
    for batch in batches:
        for phase in (Phase.PREFILL, Phase.DECODE):
            if phase == Phase.PREFILL:
                req = PhaseRequest(phase, l_in, 0, batch)
                graph = build_prefill_graph(model, req)
            else:
                req = PhaseRequest(phase, l_in, 1, batch, decode_step=0)
                graph = build_decode_step_graph(model, req)
            plan = assign(graph, strategy, hw, weight_bits=model.weight_bits,
                          act_bits=model.activation_bits)
            seen = set()
            for op in graph.ops:
                if op.kind not in MATMUL_KINDS:
                    continue
                engine = plan.assignment[op.op_id]
                key = (op.kind, op.m, op.n, op.k, op.weight_resident, op.role, engine)
                if key in seen:
                    continue
                seen.add(key)
                intensity, attainable, achieved = roofline_point(
                    op, engine, hw, table, weight_bits=model.weight_bits,
                    act_bits=model.activation_bits,
                    wordlines=strategy.wordlines_active)
                cost = cost_op(op, engine, hw, table,
                               weight_bits=model.weight_bits,
                               act_bits=model.activation_bits,
                               wordlines=strategy.wordlines_active)
                rows.append({
                    "op": op.op_id, "phase": phase.value, "batch": batch,
                    "kind": op.kind.value, "engine": engine.value,
                    "intensity": intensity, "achieved": achieved,
                    "attainable": attainable,
                    "compute_ceiling": peak_compute(engine, hw),
                    "bandwidth_ceiling": peak_bandwidth(engine, hw),
                    "bound": cost.bound,
                })
    return rows


def cmd_roofline(args) -> int:
    model = load_model(args.model)
    hw = load_hardware(args.hw)
    table = load_cost_table(args.cost) if args.cost else CostTable()
    batches = [int(b) for b in args.batch.split(",")]
    rows = roofline_rows(model, hw, table, args.strategy, args.l_in, batches)
    write_csv(args.output, ROOFLINE_COLUMNS, rows)
    print(f"wrote {len(rows)} roofline points to {args.output}")
    return 0


def cmd_map(args) -> int:
    model = load_model(args.model)
    hw = load_hardware(args.hw)
    strategy = get_strategy(args.strategy)
    if args.phase == "prefill":
        req = PhaseRequest(Phase.PREFILL, args.l_in, 0, args.batch)
        graph = build_prefill_graph(model, req)
    else:
        req = PhaseRequest(Phase.DECODE, args.l_in, max(args.l_out, 1), args.batch,
                           decode_step=args.decode_step)
        graph = build_decode_step_graph(model, req)
    plan = assign(graph, strategy, hw, weight_bits=model.weight_bits,
                  act_bits=model.activation_bits)
    sys.stdout.write(format_plan(plan))
    return 0


def cmd_cost_explain(args) -> int:
    hw = load_hardware(args.hw)
    table = load_cost_table(args.cost) if args.cost else CostTable()
    kind = OpKind.GEMV if args.kind == "gemv" else OpKind.GEMM
    stored_bits = args.weight_bits if args.weight_resident else args.act_bits
    read, written = matmul_bytes(args.m, args.n, args.k, stored_bits, args.act_bits)
    op = Operator("explain", kind, args.m, args.n, args.k, args.weight_resident,
                  read, written, 0, "explain")
    engine = Engine(args.engine)
    cost = cost_op(op, engine, hw, table, weight_bits=args.weight_bits,
                   act_bits=args.act_bits, wordlines=args.wordlines)
    print(f"op kind={kind.value} m={args.m} n={args.n} k={args.k} "
          f"weight_resident={args.weight_resident} engine={engine.value}")
    print(f"flops={op_flops(op)} bytes={read + written} "
          f"intensity={arithmetic_intensity(op):.6f}")
    for stage in sorted(cost.breakdown):
        t, e = cost.breakdown[stage]
        print(f"  {stage:<10} time={t:.6e} s  energy={e:.6e} J")
    print(f"latency={cost.latency:.6e} s  energy={cost.energy:.6e} J  bound={cost.bound}")
    if cost.adc_conversions:
        print(f"adc_conversions={cost.adc_conversions}")
    return 0


def cmd_validate(args) -> int:
    hw = load_hardware(args.hw)
    report = validate(hw)
    print(f"area_overhead={report.area_overhead:.4f}")
    if report.ok:
        print("ok: no violations")
        return 0
    for violation in report.violations:
        print(f"violation: {violation}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memaccel",
        description="Analytical latency/energy simulator for heterogeneous "
                    "memory-centric LLM inference accelerators.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cost=True):
        p.add_argument("--hw", required=True, help="hardware spec YAML")
        if cost:
            p.add_argument("--cost", help="cost table YAML (defaults built in)")

    p = sub.add_parser("simulate", help="run one end-to-end point")
    p.add_argument("--model", required=True)
    common(p)
    p.add_argument("--strategy", required=True,
                   help=f"one of {', '.join(sorted(STRATEGIES))} (alias: cent)")
    p.add_argument("--l-in", type=int, required=True, dest="l_in")
    p.add_argument("--l-out", type=int, required=True, dest="l_out")
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--output", help="result file path")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a grid of points to CSV")
    p.add_argument("--spec", required=True, help="sweep spec YAML")
    common(p)
    p.add_argument("--output", required=True)
    p.add_argument("--jobs", type=int, default=0, help="parallel workers (default: cores)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="geomean speedup of strategy A over B")
    p.add_argument("--spec", required=True)
    common(p)
    p.add_argument("strategy_a")
    p.add_argument("strategy_b")
    p.add_argument("--metric", default="e2e_s",
                   choices=("e2e_s", "ttft_s", "tpot_mean_s", "total_J",
                            "prefill_s", "decode_s", "prefill_J", "decode_J"))
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("roofline", help="per-op roofline points to CSV")
    p.add_argument("--model", required=True)
    common(p)
    p.add_argument("--strategy", default="fully_cim")
    p.add_argument("--l-in", type=int, default=512, dest="l_in")
    p.add_argument("--batch", default="1,16", help="comma list of batch sizes")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_roofline)

    p = sub.add_parser("map", help="print the mapping plan for inspection")
    p.add_argument("--model", required=True)
    p.add_argument("--hw", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--phase", choices=("prefill", "decode"), default="prefill")
    p.add_argument("--l-in", type=int, default=512, dest="l_in")
    p.add_argument("--l-out", type=int, default=128, dest="l_out")
    p.add_argument("--decode-step", type=int, default=0)
    p.add_argument("--batch", type=int, default=1)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("cost-explain", help="print one op's cost breakdown")
    common(p)
    p.add_argument("--engine", required=True, choices=[e.value for e in Engine
                                                       if e != Engine.VECTOR])
    p.add_argument("--kind", choices=("gemm", "gemv"), default="gemm")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--weight-resident", action="store_true")
    p.add_argument("--weight-bits", type=int, default=8)
    p.add_argument("--act-bits", type=int, default=8)
    p.add_argument("--wordlines", type=int, default=None)
    p.set_defaults(func=cmd_cost_explain)

    p = sub.add_parser("validate", help="check a hardware spec; nonzero exit on violations")
    p.add_argument("--hw", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
