"""Operator-to-engine assignment and tiling/residency planning.

Strategies follow the established mapping baselines: the phase-aware mappings
run prefill matmuls on the crossbar die (at full or half wordline
activation) and all decode matmuls in-DRAM; the attention-offload baselines
keep decode attention in-DRAM but stream everything else through the
crossbar die; the fully-in-DRAM baseline runs both phases at the banks.
Non-matmul operators always execute on the logic-die vector/scalar units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .hardware import CiDSpec, CiMSpec, Engine, HardwareSpec, ceil_div
from .workload import MATMUL_KINDS, Operator, OperatorGraph, Phase


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class MappingStrategy:
    name: str
    prefill_engine: Engine
    decode_attention_engine: Engine
    decode_other_engine: Engine
    wordlines_active: int = 128


STRATEGIES: dict[str, MappingStrategy] = {
    # Phase-aware: prefill on crossbars, decode fully in-DRAM.
    "halo1": MappingStrategy("halo1", Engine.CIM, Engine.CID, Engine.CID, 128),
    "halo2": MappingStrategy("halo2", Engine.CIM, Engine.CID, Engine.CID, 64),
    # Everything in-DRAM, both phases.
    "fully_cid": MappingStrategy("fully_cid", Engine.CID, Engine.CID, Engine.CID, 128),
    # Everything on the crossbar die, both phases.
    "fully_cim": MappingStrategy("fully_cim", Engine.CIM, Engine.CIM, Engine.CIM, 128),
    # Attention-offload baselines: only decode attention runs in-DRAM.
    "attacc1": MappingStrategy("attacc1", Engine.CIM, Engine.CID, Engine.CIM, 128),
    "attacc2": MappingStrategy("attacc2", Engine.CIM, Engine.CID, Engine.CIM, 64),
    # Phase-aware with the digital systolic variant in place of the crossbars.
    "halo_sa": MappingStrategy("halo_sa", Engine.SA, Engine.CID, Engine.CID, 128),
}

STRATEGY_ALIASES = {"cent": "fully_cid"}

ATTENTION_ROLES = ("attn_score", "attn_value")


def get_strategy(name: str) -> MappingStrategy:
    key = name.lower().replace("-", "_")
    key = STRATEGY_ALIASES.get(key, key)
    if key not in STRATEGIES:
        known = ", ".join(sorted(STRATEGIES))
        raise MappingError(f"unknown strategy {name!r}; known: {known} (alias: cent)")
    return STRATEGIES[key]


class Residency:
    STATIONARY = "stationary"
    RELOADED = "reloaded"


@dataclass(frozen=True)
class TilePlan:
    """Crossbar occupancy of one operator's stored operand."""
    row_tiles: int
    col_tiles: int
    crossbars: int          # total crossbar-tiles incl. group replication
    waves: int
    residency: str
    reload_bytes: int


@dataclass(frozen=True)
class PartitionPlan:
    """Bank striping of one operator's stored operand."""
    banks_used: int
    cols_per_bank: int      # critical bank
    rows_per_bank: int
    buffer_loads: int


@dataclass
class MappingPlan:
    strategy: MappingStrategy
    phase: Phase
    assignment: dict[str, Engine] = field(default_factory=dict)
    tiling: dict[str, TilePlan | PartitionPlan | None] = field(default_factory=dict)
    transfers: list[tuple[str, str, int, str]] = field(default_factory=list)


def engine_for(op: Operator, phase: Phase, strategy: MappingStrategy) -> Engine:
    if op.kind not in MATMUL_KINDS:
        return Engine.VECTOR
    if phase == Phase.PREFILL:
        return strategy.prefill_engine
    if op.role in ATTENTION_ROLES:
        return strategy.decode_attention_engine
    return strategy.decode_other_engine


def plan_cim_tiling(op: Operator, cim: CiMSpec, *, weight_bits: int = 8,
                    act_bits: int = 8, wordlines: int | None = None,
                    resident_budget_crossbars: int | None = None,
                    stored_bits: int | None = None) -> TilePlan:
    wl = wordlines if wordlines is not None else cim.wordlines_active
    if stored_bits is None:
        stored_bits = weight_bits if op.weight_resident else act_bits
    slice_cols = stored_bits // cim.bits_per_cell
    row_tiles = ceil_div(op.k, wl)
    col_tiles = ceil_div(op.n * slice_cols, cim.crossbar_cols)
    crossbars = row_tiles * col_tiles * op.group_count
    waves = ceil_div(crossbars, cim.total_crossbars)
    budget = cim.total_crossbars if resident_budget_crossbars is None else resident_budget_crossbars
    if op.weight_resident and crossbars <= budget:
        residency = Residency.STATIONARY
        reload_bytes = 0
    else:
        residency = Residency.RELOADED
        reload_bytes = op.group_count * op.n * op.k * stored_bits // 8
    return TilePlan(row_tiles, col_tiles, crossbars, waves, residency, reload_bytes)


def plan_sa_tiling(op: Operator, hw: HardwareSpec, *, weight_bits: int = 8,
                   act_bits: int = 8) -> TilePlan:
    sa = hw.systolic
    stored_bits = weight_bits if op.weight_resident else act_bits
    row_tiles = ceil_div(op.m, sa.array_rows)
    col_tiles = ceil_div(op.n, sa.array_cols)
    tiles = row_tiles * col_tiles * op.group_count
    arrays = hw.cim.num_cores * sa.arrays_per_core
    # Output-stationary arrays re-stream the stored operand per output-row tile.
    reload_bytes = op.group_count * row_tiles * op.n * op.k * stored_bits // 8
    return TilePlan(row_tiles, col_tiles, tiles, ceil_div(tiles, arrays),
                    Residency.RELOADED, reload_bytes)


def plan_cid_partition(op: Operator, cid: CiDSpec, *, weight_bits: int = 8,
                       act_bits: int = 8) -> PartitionPlan:
    stored_bits = weight_bits if op.weight_resident else act_bits
    n_total = op.n * op.group_count
    cols = ceil_div(n_total, cid.total_banks)
    banks_used = min(n_total, cid.total_banks)
    rows = ceil_div(cols * op.k * stored_bits, cid.row_size_bytes * 8)
    buffer_elems = cid.local_buffer_bytes * 8 // act_bits
    m_t = min(op.m, cid.multipliers_per_bank)
    k_t = min(op.k, max(1, buffer_elems // m_t))
    buffer_loads = ceil_div(op.m, m_t) * ceil_div(op.k, k_t)
    return PartitionPlan(banks_used, cols, rows, buffer_loads)


class InfeasibleMappingError(MappingError):
    pass


def assign(graph: OperatorGraph, strategy: MappingStrategy, hw: HardwareSpec, *,
           weight_bits: int = 8, act_bits: int = 8,
           allow_reload: bool = True) -> MappingPlan:
    """Deterministic engine assignment plus per-op tiling plans.

    Weight-resident crossbar ops become stationary only while the running
    crossbar budget lasts (first-come in graph order); at model scale the
    weight set exceeds the array capacity and everything reloads.  With
    ``allow_reload=False`` an op that cannot stay resident is an error.
    """
    plan = MappingPlan(strategy, graph.phase)
    budget = hw.cim.total_crossbars
    for op in graph.ops:
        engine = engine_for(op, graph.phase, strategy)
        plan.assignment[op.op_id] = engine
        if engine == Engine.CIM or engine == Engine.SA:
            if engine == Engine.CIM:
                tile = plan_cim_tiling(op, hw.cim, weight_bits=weight_bits,
                                       act_bits=act_bits,
                                       wordlines=strategy.wordlines_active,
                                       resident_budget_crossbars=budget)
                if tile.residency == Residency.STATIONARY:
                    budget -= tile.crossbars
                elif op.weight_resident and not allow_reload:
                    raise InfeasibleMappingError(
                        f"op {op.op_id} needs {tile.crossbars} crossbar tiles but "
                        f"only {budget} remain resident and reloading is disabled")
                plan.tiling[op.op_id] = tile
            else:
                plan.tiling[op.op_id] = plan_sa_tiling(op, hw, weight_bits=weight_bits,
                                                       act_bits=act_bits)
        elif engine == Engine.CID:
            plan.tiling[op.op_id] = plan_cid_partition(op, hw.cid,
                                                       weight_bits=weight_bits,
                                                       act_bits=act_bits)
        else:
            plan.tiling[op.op_id] = None

    for src, dst in graph.deps:
        src_op, dst_op = graph.ops[src], graph.ops[dst]
        e_src = plan.assignment[src_op.op_id]
        e_dst = plan.assignment[dst_op.op_id]
        if e_src == e_dst:
            continue
        bytes_moved = src_op.bytes_written * src_op.group_count
        crossbar_side = {Engine.CIM, Engine.SA}
        link = "interposer" if (e_src in crossbar_side) != (e_dst in crossbar_side) \
            else "internal"
        plan.transfers.append((src_op.op_id, dst_op.op_id, bytes_moved, link))
    return plan


def format_plan(plan: MappingPlan) -> str:
    lines = [f"strategy: {plan.strategy.name}",
             f"phase: {plan.phase.value}",
             f"wordlines_active: {plan.strategy.wordlines_active}",
             "assignment:"]
    for op_id, engine in plan.assignment.items():
        tile = plan.tiling.get(op_id)
        if isinstance(tile, TilePlan):
            detail = (f" tiles={tile.row_tiles}x{tile.col_tiles}"
                      f" crossbars={tile.crossbars} waves={tile.waves}"
                      f" residency={tile.residency}")
        elif isinstance(tile, PartitionPlan):
            detail = (f" banks={tile.banks_used} cols/bank={tile.cols_per_bank}"
                      f" rows/bank={tile.rows_per_bank} buffer_loads={tile.buffer_loads}")
        else:
            detail = ""
        lines.append(f"  {op_id}: {engine.value}{detail}")
    lines.append("transfers:")
    for src, dst, nbytes, link in plan.transfers:
        lines.append(f"  {src} -> {dst}: {nbytes} B via {link}")
    return "\n".join(lines) + "\n"
