"""Hardware configuration: DRAM-bank compute stack, analog crossbar
accelerator, logic-die vector units, systolic-array variant, and the
interposer link, plus the calibration cost table.

Peak compute / bandwidth derivations used by the roofline live here; the
per-operator cost models live in :mod:`memaccel.cost`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum


class Engine(Enum):
    CID = "cid"        # bank-level compute in DRAM
    CIM = "cim"        # analog crossbar accelerator
    SA = "sa"          # digital systolic-array variant of the CiM die
    VECTOR = "vector"  # logic-die vector/exponent/scalar units


@dataclass(frozen=True)
class CiDSpec:
    num_stacks: int = 5
    channels_per_stack: int = 16
    bankgroups_per_channel: int = 4
    banks_per_bankgroup: int = 4
    multipliers_per_bank: int = 32
    multiplier_bits: int = 8
    local_buffer_bytes: int = 4096
    double_buffered: bool = True
    dram_clock: float = 0.5e9        # MAC/logic clock in the DRAM process
    row_size_bytes: int = 1024
    t_rcd: float = 14e-9
    t_rp: float = 14e-9
    t_ccd: float = 1e-9              # per 32B internal beat
    capacity_bytes: int = 80 * 2**30

    @property
    def total_banks(self) -> int:
        return (self.num_stacks * self.channels_per_stack
                * self.bankgroups_per_channel * self.banks_per_bankgroup)

    @property
    def bank_read_bw(self) -> float:
        """Peak per-bank row-stream rate (32B internal beat per t_ccd)."""
        return 32.0 / self.t_ccd

    @property
    def mac_consume_bw(self) -> float:
        """Weight bytes/s one bank's multipliers can absorb."""
        return self.multipliers_per_bank * self.multiplier_bits / 8 * self.dram_clock


@dataclass(frozen=True)
class CiMSpec:
    tile_mesh: tuple[int, int] = (4, 4)
    core_mesh: tuple[int, int] = (2, 2)
    crossbars_per_core: int = 8
    crossbar_rows: int = 128
    crossbar_cols: int = 128
    bits_per_cell: int = 1
    adc_per_crossbar: int = 48
    adc_bits: int = 7
    wordlines_active: int = 128
    input_stream_bits: int = 8
    gb_bytes: int = 4 * 2**20
    gb_bw: float = 2e12
    ib_bytes: int = 32 * 2**10
    ib_bw: float = 4e12
    wb_bytes: int = 64 * 2**10
    wb_bw: float = 4e12
    ob_bytes: int = 128 * 2**10
    ob_bw: float = 4e12
    cim_clock: float = 4e9           # effective ADC conversion rate per column group

    @property
    def num_tiles(self) -> int:
        return self.tile_mesh[0] * self.tile_mesh[1]

    @property
    def cores_per_tile(self) -> int:
        return self.core_mesh[0] * self.core_mesh[1]

    @property
    def num_cores(self) -> int:
        return self.num_tiles * self.cores_per_tile

    @property
    def total_crossbars(self) -> int:
        return self.num_cores * self.crossbars_per_core

    def crossbar_weight_bytes(self, weight_bits: int) -> int:
        """8-bit-weight capacity of one crossbar given the cell density."""
        cells = self.crossbar_rows * self.crossbar_cols
        return cells * self.bits_per_cell // weight_bits


@dataclass(frozen=True)
class LogicDieSpec:
    vector_width: int = 512
    vector_clock: float = 1e9
    exp_units: int = 256
    scalar_core: bool = True


@dataclass(frozen=True)
class SystolicSpec:
    arrays_per_core: int = 2
    array_rows: int = 128
    array_cols: int = 128
    mac_bits: int = 8
    sa_clock: float = 1e9
    iso_area: bool = True


@dataclass(frozen=True)
class InterposerLink:
    bandwidth: float = 1e12
    latency: float = 100e-9


@dataclass(frozen=True)
class InternalLink:
    """Bank/logic-die data path inside the HBM stack (TSVs, not interposer)."""
    bandwidth: float = 4e12
    latency: float = 30e-9


@dataclass(frozen=True)
class HBMIOSpec:
    """External HBM interface seen by the crossbar die through the interposer."""
    per_stack_bw: float = 800e9
    channel_bw: float = 50e9   # per-channel bus used to broadcast inputs to banks


@dataclass(frozen=True)
class AreaModel:
    """Linear area estimate for the in-DRAM compute overhead check."""
    bank_mm2: float = 0.9
    multiplier_mm2: float = 0.0012
    buffer_mm2_per_kb: float = 0.004
    reduction_tree_mm2: float = 0.005


@dataclass(frozen=True)
class CostTable:
    """Calibration constants (7nm-class engineering estimates)."""
    e_mac_cid: float = 1.0e-12       # J per 8b MAC in DRAM process
    e_mac_cim: float = 2e-15         # J per 1b x 1b analog bit-MAC
    e_mac_sa: float = 0.3e-12        # J per 8b MAC in the systolic array
    e_adc_conv: float = 0.3e-12        # J per ADC conversion
    e_dram_row_act: float = 2.0e-9   # J per 1KB row activation
    e_dram_bit_internal: float = 3e-15   # J per bit moved row-buffer -> bank MACs
    e_dram_bit_offchip: float = 2e-12    # J per bit DRAM -> interposer -> crossbar die
    e_sram_bit_gb: float = 50e-15
    e_sram_bit_ib: float = 20e-15
    e_sram_bit_wb: float = 20e-15
    e_sram_bit_ob: float = 20e-15
    e_sram_bit_local: float = 10e-15
    e_noc_bit_per_hop: float = 30e-15
    e_crossbar_write: float = 1e-15  # J per cell write
    t_crossbar_write: float = 1e-9   # s per row write
    e_vector_op: float = 1e-12
    e_exp_op: float = 10e-12
    refresh_overhead: float = 0.0    # fractional latency tax, off by default

    def __post_init__(self):
        for key, val in asdict(self).items():
            if val < 0:
                raise ValueError(f"cost table entry {key} must be >= 0, got {val}")


@dataclass(frozen=True)
class HardwareSpec:
    cid: CiDSpec = field(default_factory=CiDSpec)
    cim: CiMSpec = field(default_factory=CiMSpec)
    logic_die: LogicDieSpec = field(default_factory=LogicDieSpec)
    systolic: SystolicSpec = field(default_factory=SystolicSpec)
    interposer: InterposerLink = field(default_factory=InterposerLink)
    internal_link: InternalLink = field(default_factory=InternalLink)
    hbm_io: HBMIOSpec = field(default_factory=HBMIOSpec)
    area: AreaModel = field(default_factory=AreaModel)

    def external_hbm_bandwidth(self) -> float:
        return self.cid.num_stacks * self.hbm_io.per_stack_bw


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    area_overhead: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def cid_area_overhead(cid: CiDSpec, area: AreaModel) -> float:
    """Per-bank area of compute units + buffer relative to the bank itself."""
    buffer_kb = cid.local_buffer_bytes / 1024 * (2 if cid.double_buffered else 1)
    added = (cid.multipliers_per_bank * area.multiplier_mm2
             + buffer_kb * area.buffer_mm2_per_kb
             + area.reduction_tree_mm2)
    return added / area.bank_mm2


def validate(hw: HardwareSpec) -> ValidationReport:
    report = ValidationReport()
    v = report.violations.append
    cid, cim = hw.cid, hw.cim

    for name, val in (("num_stacks", cid.num_stacks),
                      ("channels_per_stack", cid.channels_per_stack),
                      ("bankgroups_per_channel", cid.bankgroups_per_channel),
                      ("banks_per_bankgroup", cid.banks_per_bankgroup),
                      ("row_size_bytes", cid.row_size_bytes),
                      ("capacity_bytes", cid.capacity_bytes)):
        if val <= 0:
            v(f"cid.{name} must be positive (got {val})")
    if cid.multipliers_per_bank <= 0:
        v("no CiD compute: multipliers_per_bank must be positive")
    if cid.local_buffer_bytes <= 0:
        v("cid.local_buffer_bytes must be positive")

    report.area_overhead = cid_area_overhead(cid, hw.area)
    if report.area_overhead >= 0.10:
        v(f">10% area overhead: in-bank compute adds "
          f"{report.area_overhead:.1%} of bank area")

    if cim.wordlines_active not in (cim.crossbar_rows, cim.crossbar_rows // 2):
        v(f"cim.wordlines_active must be {cim.crossbar_rows} or "
          f"{cim.crossbar_rows // 2} (got {cim.wordlines_active})")
    if cim.adc_per_crossbar > cim.crossbar_cols:
        v("cim.adc_per_crossbar exceeds crossbar_cols")
    if cim.adc_per_crossbar <= 0 or cim.total_crossbars <= 0:
        v("cim must have at least one crossbar and one ADC")
    if cim.bits_per_cell <= 0 or cim.input_stream_bits <= 0:
        v("cim cell/stream bit widths must be positive")

    if hw.logic_die.vector_width <= 0:
        v("logic_die.vector_width must be positive")
    if hw.interposer.bandwidth <= 0:
        v("interposer.bandwidth must be positive")
    if hw.systolic.array_rows <= 0 or hw.systolic.array_cols <= 0:
        v("systolic array dimensions must be positive")
    return report


def peak_compute(engine: Engine, hw: HardwareSpec) -> float:
    """Roofline compute ceiling in FLOP/s."""
    if engine == Engine.CID:
        cid = hw.cid
        return 2.0 * cid.total_banks * cid.multipliers_per_bank * cid.dram_clock
    if engine == Engine.CIM:
        cim = hw.cim
        # MACs materialized per ADC conversion cycle: every active wordline
        # contributes to each converted bitline; the input bit-stream
        # serializes over input_stream_bits cycles.
        return (2.0 * cim.total_crossbars * cim.wordlines_active
                * cim.adc_per_crossbar * cim.cim_clock / cim.input_stream_bits)
    if engine == Engine.SA:
        sa = hw.systolic
        arrays = hw.cim.num_cores * sa.arrays_per_core
        return 2.0 * arrays * sa.array_rows * sa.array_cols * sa.sa_clock
    if engine == Engine.VECTOR:
        ld = hw.logic_die
        return float(ld.vector_width) * ld.vector_clock
    raise ValueError(f"unknown engine {engine!r}")


def peak_bandwidth(engine: Engine, hw: HardwareSpec) -> float:
    """Roofline memory ceiling in bytes/s for the engine's data source."""
    if engine == Engine.CID:
        cid = hw.cid
        return cid.total_banks * cid.bank_read_bw
    if engine in (Engine.CIM, Engine.SA):
        # Off-stack traffic crosses the interposer regardless of HBM I/O headroom.
        return min(hw.interposer.bandwidth, hw.external_hbm_bandwidth())
    if engine == Engine.VECTOR:
        return hw.internal_link.bandwidth
    raise ValueError(f"unknown engine {engine!r}")


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)
