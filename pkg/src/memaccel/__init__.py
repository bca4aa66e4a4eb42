"""memaccel: analytical latency/energy simulator and mapping explorer for
low-batch LLM inference on heterogeneous memory-centric accelerators."""

__version__ = "0.1.0"

from .cost import (OpCost, cid_gemv_cost, cim_gemm_cost, cost_op, roofline_point,
                   sa_gemm_cost, transfer_cost, vector_op_cost)
from .engine import (PhaseResult, SimResult, SweepSpec, run_decode, run_end_to_end,
                     run_prefill, sweep)
from .hardware import (CiDSpec, CiMSpec, CostTable, Engine, HardwareSpec,
                       InterposerLink, LogicDieSpec, SystolicSpec,
                       peak_bandwidth, peak_compute, validate)
from .mapper import (MappingPlan, MappingStrategy, STRATEGIES, assign,
                     get_strategy, plan_cid_partition, plan_cim_tiling)
from .workload import (ModelSpec, Operator, OperatorGraph, OpKind, Phase,
                       PhaseRequest, arithmetic_intensity, build_decode_step_graph,
                       build_prefill_graph, op_bytes, op_flops)
