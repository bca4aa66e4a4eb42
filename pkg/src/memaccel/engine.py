"""Phase scheduling: runs mapped graphs through prefill and decode,
accumulating first-token latency, the per-token latency series, end-to-end
time and energy split by phase / engine / operator class.

Execution is serial per request (single-request latency is the metric);
overlap exists only inside an operator's tile pipeline, which the cost
models capture.  Decode steps reuse cached costs for every operator whose
shape does not depend on the cache length, so long generations stay cheap
to simulate.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

from .cost import OpCost, cost_op, transfer_cost
from .hardware import CostTable, Engine, HardwareSpec
from .mapper import (MappingPlan, MappingStrategy, Residency, TilePlan, assign,
                     get_strategy)
from .workload import (MATMUL_KINDS, ModelSpec, Operator, OperatorGraph, OpKind,
                       Phase, PhaseRequest, build_decode_step_graph,
                       build_prefill_graph, matmul_bytes)

OP_CLASSES = ("gemm", "gemv", "attention", "non_gemm", "transfer")


class CapacityError(RuntimeError):
    pass


def op_class(op: Operator) -> str:
    if op.kind not in MATMUL_KINDS:
        return "non_gemm"
    if op.role in ("attn_score", "attn_value"):
        return "attention"
    return "gemv" if op.kind == OpKind.GEMV else "gemm"


@dataclass
class PhaseResult:
    phase: Phase
    latency: float = 0.0
    energy: float = 0.0
    per_op_class: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {c: (0.0, 0.0) for c in OP_CLASSES})
    bound_fraction: float = 0.0


@dataclass
class SimResult:
    ttft: float
    tpot_series: list[float]
    tpot_mean: float
    end_to_end: float
    prefill: PhaseResult
    decode: PhaseResult
    config_fingerprint: str


class _Accumulator:
    def __init__(self):
        self.cls_time = {c: 0.0 for c in OP_CLASSES}
        self.cls_energy = {c: 0.0 for c in OP_CLASSES}
        self.membound_time = 0.0

    def add(self, cls: str, cost: OpCost, count: int = 1):
        self.cls_time[cls] += cost.latency * count
        self.cls_energy[cls] += cost.energy * count
        if cost.bound == "memory_bound" or cls == "transfer":
            self.membound_time += cost.latency * count

    def result(self, phase: Phase) -> PhaseResult:
        latency = sum(self.cls_time.values())
        energy = sum(self.cls_energy.values())
        classes = {c: (self.cls_time[c], self.cls_energy[c]) for c in OP_CLASSES}
        frac = self.membound_time / latency if latency > 0 else 0.0
        return PhaseResult(phase, latency, energy, classes, frac)


class _CostContext:
    """Memoized operator costing for one (hw, table, strategy) context."""

    def __init__(self, model: ModelSpec, hw: HardwareSpec, table: CostTable,
                 strategy: MappingStrategy):
        self.model = model
        self.hw = hw
        self.table = table
        self.strategy = strategy
        self._memo: dict[tuple, OpCost] = {}

    def cost(self, op: Operator, engine: Engine, stationary: bool) -> OpCost:
        key = (op.kind, op.m, op.n, op.k, op.weight_resident, op.group_count,
               op.bytes_read, op.bytes_written, op.exp_count, engine, stationary)
        hit = self._memo.get(key)
        if hit is None:
            hit = cost_op(op, engine, self.hw, self.table,
                          weight_bits=self.model.weight_bits,
                          act_bits=self.model.activation_bits,
                          wordlines=self.strategy.wordlines_active,
                          stationary=stationary)
            self._memo[key] = hit
        return hit


def _check_capacity(model: ModelSpec, hw: HardwareSpec, l_in: int, l_out: int, batch: int):
    need = model.weight_bytes() + model.kv_cache_bytes(l_in + l_out, batch)
    if need > hw.cid.capacity_bytes:
        raise CapacityError(
            f"model weights + KV cache need {need / 2**30:.1f} GiB, DRAM capacity "
            f"is {hw.cid.capacity_bytes / 2**30:.1f} GiB")


def _run_graph(graph: OperatorGraph, plan: MappingPlan, ctx: _CostContext,
               acc: _Accumulator):
    for op in graph.ops:
        engine = plan.assignment[op.op_id]
        tile = plan.tiling.get(op.op_id)
        stationary = isinstance(tile, TilePlan) and tile.residency == Residency.STATIONARY
        acc.add(op_class(op), ctx.cost(op, engine, stationary))
    _add_transfer_costs(graph, plan, ctx, acc)
    _add_stationary_setup(graph, plan, ctx, acc)


def _add_transfer_costs(graph: OperatorGraph, plan: MappingPlan, ctx: _CostContext,
                        acc: _Accumulator):
    # Operand bytes already ride inside the operator stage models; transfer
    # records contribute the per-hop pipeline startup latency.
    for _src, _dst, _bytes, link in plan.transfers:
        lk = ctx.hw.interposer if link == "interposer" else ctx.hw.internal_link
        acc.add("transfer", transfer_cost(0, lk))


def _add_stationary_setup(graph: OperatorGraph, plan: MappingPlan, ctx: _CostContext,
                          acc: _Accumulator):
    # Pre-loading weights that stay resident across the phase (small models only).
    for op in graph.ops:
        tile = plan.tiling.get(op.op_id)
        if not (isinstance(tile, TilePlan) and tile.residency == Residency.STATIONARY
                and plan.assignment[op.op_id] == Engine.CIM):
            continue
        stored = op.group_count * op.n * op.k * ctx.model.weight_bits // 8
        setup = transfer_cost(stored, ctx.hw.interposer, ctx.table.e_dram_bit_offchip)
        write_t = tile.waves * min(ctx.strategy.wordlines_active, op.k) \
            * ctx.table.t_crossbar_write
        write_e = op.group_count * op.n * op.k * ctx.model.weight_bits \
            / ctx.hw.cim.bits_per_cell * ctx.table.e_crossbar_write
        acc.cls_time["transfer"] += setup.latency + write_t
        acc.cls_energy["transfer"] += setup.energy + write_e
        acc.membound_time += setup.latency + write_t


def _sampling_op(model: ModelSpec, batch: int) -> Operator:
    # Greedy next-token selection over the logits, on the logic die.
    abyte = model.activation_bits // 8
    return Operator("sample", OpKind.ELEMENTWISE, batch, model.vocab_size, 0, False,
                    batch * model.vocab_size * abyte, batch * abyte, 0, "sampling")


def run_prefill(model: ModelSpec, hw: HardwareSpec, strategy: MappingStrategy,
                l_in: int, batch: int = 1, table: CostTable | None = None, *,
                include_embeddings: bool = True, l_out_reserved: int = 0) -> PhaseResult:
    table = table or CostTable()
    _check_capacity(model, hw, l_in, l_out_reserved, batch)
    req = PhaseRequest(Phase.PREFILL, l_in, l_out_reserved, batch)
    graph = build_prefill_graph(model, req, include_embeddings)
    plan = assign(graph, strategy, hw, weight_bits=model.weight_bits,
                  act_bits=model.activation_bits)
    ctx = _CostContext(model, hw, table, strategy)
    acc = _Accumulator()
    _run_graph(graph, plan, ctx, acc)
    if include_embeddings:
        acc.add("non_gemm", cost_op(_sampling_op(model, batch), Engine.VECTOR, hw, table))
    return acc.result(Phase.PREFILL)


def _kv_dependent_template(op: Operator) -> bool:
    return op.kv_len > 0


def _retarget_kv(op: Operator, kv: int, act_bits: int) -> Operator:
    """Rebuild an attention-family op for a new cache length."""
    abyte = act_bits // 8
    if op.role == "attn_score":
        read, written = matmul_bytes(op.m, kv, op.k, act_bits, act_bits)
        return dataclasses.replace(op, n=kv, kv_len=kv, bytes_read=read,
                                   bytes_written=written)
    if op.role == "attn_value":
        read, written = matmul_bytes(op.m, op.n, kv, act_bits, act_bits)
        return dataclasses.replace(op, k=kv, kv_len=kv, bytes_read=read,
                                   bytes_written=written)
    if op.kind == OpKind.SOFTMAX:
        elems = op.m * kv
        return dataclasses.replace(op, n=kv, kv_len=kv, bytes_read=elems * abyte,
                                   bytes_written=elems * abyte, exp_count=elems)
    raise ValueError(f"op {op.op_id} ({op.role}) does not depend on the KV length")


def run_decode(model: ModelSpec, hw: HardwareSpec, strategy: MappingStrategy,
               l_in: int, l_out: int, batch: int = 1,
               table: CostTable | None = None, *,
               include_embeddings: bool = True) -> tuple[PhaseResult, list[float]]:
    table = table or CostTable()
    if l_out == 0:
        return PhaseResult(Phase.DECODE), []
    _check_capacity(model, hw, l_in, l_out, batch)
    req = PhaseRequest(Phase.DECODE, l_in, l_out, batch, decode_step=0)
    graph = build_decode_step_graph(model, req, include_embeddings)
    plan = assign(graph, strategy, hw, weight_bits=model.weight_bits,
                  act_bits=model.activation_bits)
    ctx = _CostContext(model, hw, table, strategy)

    # Split the step into a cache-length-independent part (costed once) and
    # the attention-family ops that grow with kv_len.  Identical per-layer
    # templates collapse into (template, count) pairs.
    const_acc = _Accumulator()
    templates: dict[tuple, list] = {}
    for op in graph.ops:
        engine = plan.assignment[op.op_id]
        if _kv_dependent_template(op):
            key = (op.kind, op.role, op.m, op.n, op.k, op.group_count, engine)
            entry = templates.setdefault(key, [op, engine, op_class(op), 0])
            entry[3] += 1
        else:
            tile = plan.tiling.get(op.op_id)
            stationary = isinstance(tile, TilePlan) and tile.residency == Residency.STATIONARY
            const_acc.add(op_class(op), ctx.cost(op, engine, stationary))
    _add_transfer_costs(graph, plan, ctx, const_acc)
    if include_embeddings:
        const_acc.add("non_gemm", cost_op(_sampling_op(model, batch), Engine.VECTOR,
                                          hw, table))
    const = const_acc.result(Phase.DECODE)
    const_mem = const_acc.membound_time

    acc = _Accumulator()
    series: list[float] = []
    for step in range(l_out):
        kv = l_in + step
        step_latency = const.latency
        for tmpl, engine, cls, count in templates.values():
            cost = ctx.cost(_retarget_kv(tmpl, kv, model.activation_bits), engine, False)
            acc.add(cls, cost, count)
            step_latency += cost.latency * count
        for cls in OP_CLASSES:
            acc.cls_time[cls] += const.per_op_class[cls][0]
            acc.cls_energy[cls] += const.per_op_class[cls][1]
        acc.membound_time += const_mem
        series.append(step_latency)
    return acc.result(Phase.DECODE), series


def _fingerprint(model: ModelSpec, hw: HardwareSpec, strategy: MappingStrategy,
                 table: CostTable) -> str:
    blob = json.dumps({
        "model": asdict(model),
        "hw": asdict(hw),
        "strategy": asdict(strategy),
        "cost": asdict(table),
    }, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_end_to_end(model: ModelSpec, hw: HardwareSpec, strategy: MappingStrategy | str,
                   l_in: int, l_out: int, batch: int = 1,
                   table: CostTable | None = None, *,
                   include_embeddings: bool = True) -> SimResult:
    if isinstance(strategy, str):
        strategy = get_strategy(strategy)
    table = table or CostTable()
    prefill = run_prefill(model, hw, strategy, l_in, batch, table,
                          include_embeddings=include_embeddings, l_out_reserved=l_out)
    decode, series = run_decode(model, hw, strategy, l_in, l_out, batch, table,
                                include_embeddings=include_embeddings)
    ttft = prefill.latency
    e2e = ttft + sum(series)
    tpot_mean = sum(series) / len(series) if series else 0.0
    return SimResult(ttft, series, tpot_mean, e2e, prefill, decode,
                     _fingerprint(model, hw, strategy, table))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepPoint:
    model: ModelSpec
    strategy: str
    l_in: int
    l_out: int
    batch: int


@dataclass
class SweepSpec:
    models: list[ModelSpec]
    strategies: list[str]
    l_in: list[int]
    l_out: list[int]
    batch: list[int] = field(default_factory=lambda: [1])

    def points(self) -> list[SweepPoint]:
        return [SweepPoint(m, s, li, lo, b)
                for m in self.models for s in self.strategies
                for li in self.l_in for lo in self.l_out for b in self.batch]


CSV_COLUMNS = (
    ["model", "strategy", "l_in", "l_out", "batch", "status",
     "ttft_s", "tpot_mean_s", "e2e_s", "prefill_s", "decode_s",
     "prefill_J", "decode_J", "total_J",
     "prefill_membound_frac", "decode_membound_frac"]
    + [f"{phase}_{cls}_{unit}"
       for phase in ("prefill", "decode")
       for cls in OP_CLASSES
       for unit in ("s", "J")]
    + ["fingerprint"]
)


def result_row(point: SweepPoint, res: SimResult) -> dict:
    row = {
        "model": point.model.name, "strategy": point.strategy,
        "l_in": point.l_in, "l_out": point.l_out, "batch": point.batch,
        "status": "ok",
        "ttft_s": res.ttft, "tpot_mean_s": res.tpot_mean, "e2e_s": res.end_to_end,
        "prefill_s": res.prefill.latency, "decode_s": res.decode.latency,
        "prefill_J": res.prefill.energy, "decode_J": res.decode.energy,
        "total_J": res.prefill.energy + res.decode.energy,
        "prefill_membound_frac": res.prefill.bound_fraction,
        "decode_membound_frac": res.decode.bound_fraction,
        "fingerprint": res.config_fingerprint,
    }
    for phase_name, phase in (("prefill", res.prefill), ("decode", res.decode)):
        for cls in OP_CLASSES:
            t, e = phase.per_op_class[cls]
            row[f"{phase_name}_{cls}_s"] = t
            row[f"{phase_name}_{cls}_J"] = e
    return row


def _eval_point(args) -> dict:
    point, hw, table, include_embeddings = args
    try:
        res = run_end_to_end(point.model, hw, point.strategy, point.l_in, point.l_out,
                             point.batch, table, include_embeddings=include_embeddings)
        return result_row(point, res)
    except Exception as exc:  # failed points become rows, the sweep continues
        row = {c: "" for c in CSV_COLUMNS}
        row.update({"model": point.model.name, "strategy": point.strategy,
                    "l_in": point.l_in, "l_out": point.l_out, "batch": point.batch,
                    "status": f"error: {exc}"})
        return row


def sweep(spec: SweepSpec, hw: HardwareSpec, table: CostTable | None = None, *,
          jobs: int = 1, include_embeddings: bool = True) -> list[dict]:
    table = table or CostTable()
    points = spec.points()
    args = [(p, hw, table, include_embeddings) for p in points]
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_eval_point, args))
    return [_eval_point(a) for a in args]


def geomean(values: list[float]) -> float:
    if not values:
        raise ValueError("geomean of empty sequence")
    return math.exp(sum(math.log(v) for v in values) / len(values))


def compare_rows(rows_a: list[dict], rows_b: list[dict],
                 metric: str = "e2e_s") -> tuple[list[tuple[dict, float]], float]:
    """Per-point speedup of A over B (time_B / time_A) and the geometric mean.
    Failed points are excluded pairwise."""
    key = lambda r: (r["model"], r["l_in"], r["l_out"], r["batch"])
    b_index = {key(r): r for r in rows_b}
    ratios = []
    for ra in rows_a:
        rb = b_index.get(key(ra))
        if rb is None or ra["status"] != "ok" or rb["status"] != "ok":
            continue
        ratios.append((ra, float(rb[metric]) / float(ra[metric])))
    if not ratios:
        raise ValueError("no comparable points between the two strategies")
    return ratios, geomean([r for _, r in ratios])
