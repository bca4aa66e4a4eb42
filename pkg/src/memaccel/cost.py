"""Per-operator latency and energy models for each engine.

Every engine cost is a small set of pipeline *stages* (compute, memory,
buffer, transfer); the operator latency is the maximum stage time, since the
tile schedule overlaps them.  Compute-cycle counts are exact integer closed
forms: tests reproduce them with brute-force cycle-stepping enumerators.

Grouped operators (``group_count`` > 1, e.g. per-KV-head attention
instances) are independent units of work that spread across crossbars /
banks / arrays, so group replication scales tile counts, not serial time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .hardware import (
    CiDSpec, CiMSpec, CostTable, Engine, HardwareSpec, InternalLink,
    InterposerLink, LogicDieSpec, SystolicSpec, ceil_div, peak_bandwidth,
    peak_compute,
)
from .workload import (
    MATMUL_KINDS, NONGEMM_FLOPS_PER_ELEMENT, OpKind, Operator,
    arithmetic_intensity, op_flops,
)


class Bound:
    COMPUTE = "compute_bound"
    MEMORY = "memory_bound"


class WrongEngineError(ValueError):
    pass


@dataclass
class OpCost:
    latency: float
    energy: float
    # stage -> (time, energy); latency == max of stage times
    breakdown: dict[str, tuple[float, float]] = field(default_factory=dict)
    bound: str = Bound.COMPUTE
    compute_cycles: int = 0
    adc_conversions: int = 0

    @classmethod
    def zero(cls) -> "OpCost":
        stages = {s: (0.0, 0.0) for s in ("compute", "memory", "buffer", "adc", "transfer")}
        return cls(0.0, 0.0, stages, Bound.COMPUTE, 0, 0)


def _finish(stages: dict[str, tuple[float, float]], *, compute_cycles: int = 0,
            adc_conversions: int = 0, mem_keys=("memory", "buffer", "transfer")) -> OpCost:
    latency = max(t for t, _ in stages.values())
    energy = sum(e for _, e in stages.values())
    mem_time = max(stages[k][0] for k in mem_keys if k in stages)
    comp_time = max(stages[k][0] for k in stages if k not in mem_keys)
    bound = Bound.MEMORY if mem_time >= comp_time else Bound.COMPUTE
    return OpCost(latency, energy, stages, bound, compute_cycles, adc_conversions)


def _stored_bits(op: Operator, weight_bits: int, act_bits: int) -> int:
    return weight_bits if op.weight_resident else act_bits


# ---------------------------------------------------------------------------
# Analog crossbar accelerator
# ---------------------------------------------------------------------------

def cim_tile_grid(op: Operator, cim: CiMSpec, weight_bits: int, act_bits: int,
                  wordlines: int | None = None) -> tuple[int, int, int]:
    """(row_tiles, col_tiles, rem_bitcols) of the stored operand on crossbars."""
    wl = wordlines if wordlines is not None else cim.wordlines_active
    sbits = _stored_bits(op, weight_bits, act_bits)
    slice_cols = sbits // cim.bits_per_cell
    bitcols = op.n * slice_cols
    row_tiles = ceil_div(op.k, wl)
    col_tiles = ceil_div(bitcols, cim.crossbar_cols)
    rem = bitcols - (col_tiles - 1) * cim.crossbar_cols
    return row_tiles, col_tiles, rem


def cim_compute_cycles(op: Operator, cim: CiMSpec, weight_bits: int, act_bits: int,
                       wordlines: int | None = None) -> int:
    """Wave-synchronous cycle count: tiles spread over all crossbars, full
    column tiles scheduled first; each wave runs m rows x stream bits x ADC
    rounds for its widest tile."""
    if op.m == 0 or op.n == 0 or op.k == 0:
        return 0
    R, C, rem = cim_tile_grid(op, cim, weight_bits, act_bits, wordlines)
    g = op.group_count
    isb = cim.input_stream_bits
    x = cim.total_crossbars
    full_rounds = ceil_div(cim.crossbar_cols, cim.adc_per_crossbar)
    rem_rounds = ceil_div(rem, cim.adc_per_crossbar)
    total_tiles = g * R * C
    full_tiles = total_tiles if rem == cim.crossbar_cols else g * R * (C - 1)
    waves = ceil_div(total_tiles, x)
    full_waves = ceil_div(full_tiles, x) if full_tiles else 0
    return op.m * isb * (full_waves * full_rounds + (waves - full_waves) * rem_rounds)


def cim_adc_conversions(op: Operator, cim: CiMSpec, weight_bits: int, act_bits: int,
                        wordlines: int | None = None) -> int:
    """Every occupied bit-column is converted once per input bit per row tile."""
    if op.m == 0 or op.n == 0 or op.k == 0:
        return 0
    R, _, _ = cim_tile_grid(op, cim, weight_bits, act_bits, wordlines)
    sbits = _stored_bits(op, weight_bits, act_bits)
    bitcols = op.n * (sbits // cim.bits_per_cell)
    return op.group_count * op.m * cim.input_stream_bits * R * bitcols


def cim_gemm_cost(op: Operator, cim: CiMSpec, table: CostTable, link: InterposerLink,
                  *, weight_bits: int = 8, act_bits: int = 8,
                  wordlines: int | None = None, stationary: bool = False) -> OpCost:
    if op.kind not in MATMUL_KINDS:
        raise WrongEngineError(f"{op.kind} op routed to the crossbar engine")
    if op.m == 0 or op.n == 0 or op.k == 0:
        return OpCost.zero()
    wl = wordlines if wordlines is not None else cim.wordlines_active
    g = op.group_count
    sbits = _stored_bits(op, weight_bits, act_bits)

    cycles = cim_compute_cycles(op, cim, weight_bits, act_bits, wl)
    conversions = cim_adc_conversions(op, cim, weight_bits, act_bits, wl)
    bit_macs = g * op.m * cim.input_stream_bits * (op.n * sbits // cim.bits_per_cell) * op.k
    compute_time = cycles / cim.cim_clock

    stored_bytes = g * op.n * op.k * sbits // 8
    in_bytes = g * op.bytes_read - stored_bytes
    out_bytes = g * op.bytes_written
    # Inputs arrive from and outputs return to the DRAM/logic-die side
    # (cache appends included), so they share the interposer with the
    # stored-operand stream.
    reload_bytes = 0 if stationary else stored_bytes
    interposer_bytes = reload_bytes + in_bytes + out_bytes
    dram_time = interposer_bytes / link.bandwidth

    R, C, _ = cim_tile_grid(op, cim, weight_bits, act_bits, wl)
    waves = ceil_div(g * R * C, cim.total_crossbars)
    write_time = 0.0 if stationary else waves * min(wl, op.k) * table.t_crossbar_write
    cells_written = 0 if stationary else g * op.k * op.n * sbits // cim.bits_per_cell

    gb_bytes = reload_bytes + in_bytes + out_bytes
    buffer_time = max(gb_bytes / cim.gb_bw, reload_bytes / cim.wb_bw,
                      in_bytes / cim.ib_bw, out_bytes / cim.ob_bw)

    e_compute = bit_macs * table.e_mac_cim
    e_adc = conversions * table.e_adc_conv
    e_memory = (interposer_bytes * 8 * table.e_dram_bit_offchip
                + cells_written * table.e_crossbar_write)
    e_buffer = (gb_bytes * 8 * table.e_sram_bit_gb
                + reload_bytes * 8 * table.e_sram_bit_wb
                + in_bytes * 8 * table.e_sram_bit_ib
                + out_bytes * 8 * table.e_sram_bit_ob)
    e_noc = (in_bytes + out_bytes) * 8 * table.e_noc_bit_per_hop

    stages = {
        "compute": (compute_time, e_compute),
        "adc": (0.0, e_adc),
        "memory": (max(dram_time, write_time), e_memory),
        "buffer": (buffer_time, e_buffer),
        "transfer": (link.latency, e_noc),
    }
    return _finish(stages, compute_cycles=cycles, adc_conversions=conversions)


# ---------------------------------------------------------------------------
# Bank-level compute in DRAM
# ---------------------------------------------------------------------------

def cid_input_tile(m: int, k: int, cid: CiDSpec, act_bits: int) -> tuple[int, int]:
    """(m_tile, k_tile): input rows x elements resident in the 4KB buffer.
    A single vector occupies the whole buffer; up to one row per multiplier
    can be co-resident for matrix inputs, trading k-chunk depth."""
    buffer_elems = cid.local_buffer_bytes * 8 // act_bits
    m_t = min(m, cid.multipliers_per_bank)
    k_t = min(k, max(1, buffer_elems // m_t))
    return m_t, k_t


def cid_bank_geometry(op: Operator, cid: CiDSpec, weight_bits: int, act_bits: int):
    """Critical-bank partition: output columns striped across banks,
    lower-indexed banks take the remainder."""
    sbits = _stored_bits(op, weight_bits, act_bits)
    n_total = op.n * op.group_count
    banks = cid.total_banks
    cols_hi = ceil_div(n_total, banks)
    banks_hi = n_total - (cols_hi - 1) * banks if cols_hi > 1 else n_total
    row_bits = cid.row_size_bytes * 8
    stored_bits_hi = cols_hi * op.k * sbits
    rows_hi = ceil_div(stored_bits_hi, row_bits)
    return cols_hi, banks_hi, rows_hi, stored_bits_hi


def cid_compute_cycles(op: Operator, cid: CiDSpec, weight_bits: int, act_bits: int) -> int:
    """Critical-bank cycles: per input block, sweep the bank's rows; each row
    is served at the slower of multiplier drain and activate-precharge gap
    (double buffering hides the faster one)."""
    if op.m == 0 or op.n == 0 or op.k == 0:
        return 0
    sbits = _stored_bits(op, weight_bits, act_bits)
    cols_hi, _, rows_hi, _ = cid_bank_geometry(op, cid, weight_bits, act_bits)
    m_t, _ = cid_input_tile(op.m, op.k, cid, act_bits)
    m_blocks = ceil_div(op.m, m_t)
    row_elems = cid.row_size_bytes * 8 // sbits
    total_elems = cols_hi * op.k
    rem_elems = total_elems - (rows_hi - 1) * row_elems
    act_cycles = math.ceil((cid.t_rcd + cid.t_rp) * cid.dram_clock)
    mults = cid.multipliers_per_bank

    def service(elems: int) -> int:
        mac = ceil_div(elems * m_t, mults)
        return max(mac, act_cycles) if cid.double_buffered else mac + act_cycles

    per_block = (rows_hi - 1) * service(row_elems) + service(rem_elems)
    tree_cycles = max(1, cid.multipliers_per_bank.bit_length() - 1)
    return m_blocks * per_block + tree_cycles


def cid_gemv_cost(op: Operator, cid: CiDSpec, table: CostTable, *,
                  weight_bits: int = 8, act_bits: int = 8,
                  internal: InternalLink | None = None,
                  channel_bw: float = 50e9) -> OpCost:
    if op.kind not in MATMUL_KINDS:
        raise WrongEngineError(f"{op.kind} op routed to the in-DRAM engine")
    if op.m == 0 or op.n == 0 or op.k == 0:
        return OpCost.zero()
    internal = internal or InternalLink()
    g = op.group_count
    sbits = _stored_bits(op, weight_bits, act_bits)

    cycles = cid_compute_cycles(op, cid, weight_bits, act_bits)
    compute_time = cycles / cid.dram_clock
    if table.refresh_overhead:
        compute_time *= 1.0 + table.refresh_overhead

    cols_hi, banks_hi, rows_hi, _ = cid_bank_geometry(op, cid, weight_bits, act_bits)
    n_total = op.n * g
    m_t, _ = cid_input_tile(op.m, op.k, cid, act_bits)
    m_blocks = ceil_div(op.m, m_t)

    # Inputs are broadcast once per block over each channel's bus.
    bcast_bytes = g * op.bytes_read - g * op.n * op.k * sbits // 8
    bcast_time = bcast_bytes / channel_bw
    if not cid.double_buffered:
        bcast_time *= 2.0
    out_bytes = g * op.bytes_written
    out_time = out_bytes / internal.bandwidth

    # Row opens: the critical ceil geometry applied over all striped banks.
    cols_lo = cols_hi - 1
    banks_lo = (cid.total_banks - banks_hi) if cols_lo > 0 else 0
    row_bits = cid.row_size_bytes * 8
    rows_lo = ceil_div(cols_lo * op.k * sbits, row_bits) if cols_lo > 0 else 0
    row_opens = m_blocks * (banks_hi * rows_hi + banks_lo * rows_lo)

    delivered_bits = op.m * n_total * op.k * sbits
    macs = op.m * n_total * op.k

    e_compute = macs * table.e_mac_cid
    e_memory = row_opens * table.e_dram_row_act + delivered_bits * table.e_dram_bit_internal
    # The broadcast lands in every bank's local buffer.
    e_buffer = cid.total_banks * g * op.m * op.k * act_bits * table.e_sram_bit_local
    e_transfer = (bcast_bytes + out_bytes) * 8 * table.e_noc_bit_per_hop

    stages = {
        "compute": (compute_time, e_compute),
        "memory": (0.0, e_memory),  # row streaming overlaps the MAC drain
        "buffer": (bcast_time, e_buffer),
        "transfer": (out_time + internal.latency, e_transfer),
    }
    return _finish(stages, compute_cycles=cycles)


# ---------------------------------------------------------------------------
# Systolic-array variant
# ---------------------------------------------------------------------------

def sa_tile_cycles(k: int, sa: SystolicSpec) -> int:
    """Output-stationary tile: fill + stream k + drain."""
    return sa.array_rows + sa.array_cols + k - 2


def sa_compute_cycles(op: Operator, sa: SystolicSpec, num_arrays: int) -> int:
    if op.m == 0 or op.n == 0 or op.k == 0:
        return 0
    tiles = op.group_count * ceil_div(op.m, sa.array_rows) * ceil_div(op.n, sa.array_cols)
    return ceil_div(tiles, num_arrays) * sa_tile_cycles(op.k, sa)


def sa_gemm_cost(op: Operator, sa: SystolicSpec, cim: CiMSpec, table: CostTable,
                 link: InterposerLink, *, weight_bits: int = 8, act_bits: int = 8) -> OpCost:
    if op.kind not in MATMUL_KINDS:
        raise WrongEngineError(f"{op.kind} op routed to the systolic engine")
    if op.m == 0 or op.n == 0 or op.k == 0:
        return OpCost.zero()
    g = op.group_count
    num_arrays = cim.num_cores * sa.arrays_per_core
    cycles = sa_compute_cycles(op, sa, num_arrays)
    compute_time = cycles / sa.sa_clock

    sbits = _stored_bits(op, weight_bits, act_bits)
    tm = ceil_div(op.m, sa.array_rows)
    tn = ceil_div(op.n, sa.array_cols)
    # Output-stationary re-streaming: the stored operand repeats per m-tile,
    # the input per n-tile.  Working sets exceed the global buffer for model
    # layers, so the streams come from DRAM over the interposer.
    stored_stream = g * tm * op.n * op.k * sbits // 8
    in_stream = g * tn * (op.bytes_read - op.n * op.k * sbits // 8)
    out_bytes = g * op.bytes_written
    interposer_bytes = stored_stream + in_stream + out_bytes
    dram_time = interposer_bytes / link.bandwidth
    buffer_time = max(interposer_bytes / cim.gb_bw, stored_stream / cim.wb_bw,
                      in_stream / cim.ib_bw, out_bytes / cim.ob_bw)

    macs = g * op.m * op.n * op.k
    e_compute = macs * table.e_mac_sa
    e_memory = interposer_bytes * 8 * table.e_dram_bit_offchip
    e_buffer = (interposer_bytes * 8 * table.e_sram_bit_gb
                + stored_stream * 8 * table.e_sram_bit_wb
                + in_stream * 8 * table.e_sram_bit_ib
                + out_bytes * 8 * table.e_sram_bit_ob)
    e_noc = (in_stream + out_bytes) * 8 * table.e_noc_bit_per_hop

    stages = {
        "compute": (compute_time, e_compute),
        "memory": (dram_time, e_memory),
        "buffer": (buffer_time, e_buffer),
        "transfer": (link.latency, e_noc),
    }
    return _finish(stages, compute_cycles=cycles)


# ---------------------------------------------------------------------------
# Logic-die vector / exponent / scalar units
# ---------------------------------------------------------------------------

# Vector-lane passes per element; softmax's exponential runs on the
# dedicated exponent units instead of a lane pass.
VECTOR_PASSES = dict(NONGEMM_FLOPS_PER_ELEMENT)
VECTOR_PASSES[OpKind.SOFTMAX] = NONGEMM_FLOPS_PER_ELEMENT[OpKind.SOFTMAX] - 1


def vector_op_cost(op: Operator, ld: LogicDieSpec, table: CostTable, *,
                   internal: InternalLink | None = None) -> OpCost:
    if op.kind in MATMUL_KINDS:
        raise WrongEngineError(f"{op.kind} op routed to the vector units")
    internal = internal or InternalLink()
    elements = op.m * op.n * op.group_count
    if elements == 0:
        return OpCost.zero()
    passes = VECTOR_PASSES[op.kind]
    cycles = ceil_div(elements, ld.vector_width) * passes
    exp_count = op.exp_count * op.group_count
    exp_cycles = ceil_div(exp_count, ld.exp_units) if exp_count else 0
    compute_time = (cycles + exp_cycles) / ld.vector_clock

    io_bytes = (op.bytes_read + op.bytes_written) * op.group_count
    mem_time = io_bytes / internal.bandwidth

    flops = op_flops(op) * op.group_count
    e_compute = flops * table.e_vector_op + exp_count * table.e_exp_op
    e_memory = io_bytes * 8 * (table.e_dram_bit_internal + 2 * table.e_noc_bit_per_hop)

    stages = {
        "compute": (compute_time, e_compute),
        "memory": (mem_time, e_memory),
        "transfer": (internal.latency, 0.0),
    }
    return _finish(stages, compute_cycles=cycles + exp_cycles)


# ---------------------------------------------------------------------------
# Link transfers and the roofline
# ---------------------------------------------------------------------------

def transfer_cost(bytes_moved: int, link: InterposerLink | InternalLink,
                  energy_per_bit: float = 0.0) -> OpCost:
    if bytes_moved < 0:
        raise ValueError("bytes_moved must be >= 0")
    latency = link.latency + bytes_moved / link.bandwidth
    energy = bytes_moved * 8 * energy_per_bit
    stages = {
        "compute": (0.0, 0.0),
        "transfer": (latency, energy),
    }
    return OpCost(latency, energy, stages, Bound.MEMORY)


def cost_op(op: Operator, engine: Engine, hw: HardwareSpec, table: CostTable, *,
            weight_bits: int = 8, act_bits: int = 8,
            wordlines: int | None = None, stationary: bool = False) -> OpCost:
    """Dispatch an operator to its engine cost model."""
    if engine == Engine.CIM:
        return cim_gemm_cost(op, hw.cim, table, hw.interposer, weight_bits=weight_bits,
                             act_bits=act_bits, wordlines=wordlines, stationary=stationary)
    if engine == Engine.CID:
        return cid_gemv_cost(op, hw.cid, table, weight_bits=weight_bits,
                             act_bits=act_bits, internal=hw.internal_link,
                             channel_bw=hw.hbm_io.channel_bw)
    if engine == Engine.SA:
        return sa_gemm_cost(op, hw.systolic, hw.cim, table, hw.interposer,
                            weight_bits=weight_bits, act_bits=act_bits)
    if engine == Engine.VECTOR:
        return vector_op_cost(op, hw.logic_die, table, internal=hw.internal_link)
    raise ValueError(f"unknown engine {engine!r}")


def roofline_point(op: Operator, engine: Engine, hw: HardwareSpec, table: CostTable, *,
                   weight_bits: int = 8, act_bits: int = 8,
                   wordlines: int | None = None) -> tuple[float, float, float]:
    """(arithmetic intensity, attainable FLOP/s, achieved FLOP/s)."""
    intensity = arithmetic_intensity(op)
    attainable = min(peak_compute(engine, hw), intensity * peak_bandwidth(engine, hw))
    cost = cost_op(op, engine, hw, table, weight_bits=weight_bits,
                   act_bits=act_bits, wordlines=wordlines)
    achieved = op_flops(op) * op.group_count / cost.latency if cost.latency > 0 else 0.0
    return intensity, attainable, achieved
