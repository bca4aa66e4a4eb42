import dataclasses
import random

import pytest
from hypothesis import given, settings, strategies as st

from memaccel.cost import (Bound, WrongEngineError, cid_compute_cycles, cid_gemv_cost,
                           cim_adc_conversions, cim_compute_cycles, cim_gemm_cost,
                           cost_op, roofline_point, sa_compute_cycles, sa_gemm_cost,
                           transfer_cost, vector_op_cost)
from memaccel.hardware import (CiDSpec, Engine, InterposerLink,
                               peak_bandwidth, peak_compute)
from memaccel.workload import (MATMUL_KINDS, OpKind, Operator, Phase, PhaseRequest,
                               build_decode_step_graph, build_prefill_graph,
                               matmul_bytes, op_flops)
from oracles import (cid_cycles_by_stepping, cim_conversions_by_stepping,
                     cim_cycles_by_stepping, sa_cycles_by_stepping)
from test_workload import make_op


def rand_op(rng, max_dim=256, max_group=4):
    m = rng.randint(1, max_dim)
    n = rng.randint(1, max_dim)
    k = rng.randint(1, max_dim)
    resident = rng.random() < 0.5
    g = rng.randint(1, max_group)
    read, written = matmul_bytes(m, n, k, 8, 8)
    return Operator("r", OpKind.GEMM, m, n, k, resident, read, written, 0, "test",
                    group_count=g)


class TestCiMCycleOracle:
    def test_closed_form_matches_stepping_enumerator(self, hw):
        rng = random.Random(11)
        for case in range(60):
            op = rand_op(rng)
            wl = rng.choice([64, 128])
            closed = cim_compute_cycles(op, hw.cim, 8, 8, wl)
            stepped = cim_cycles_by_stepping(op, hw.cim, 8, 8, wl)
            assert closed == stepped, (case, op, wl)

    def test_adc_conversions_match_stepping(self, hw):
        rng = random.Random(13)
        for _ in range(60):
            op = rand_op(rng, max_dim=96)
            wl = rng.choice([64, 128])
            assert (cim_adc_conversions(op, hw.cim, 8, 8, wl)
                    == cim_conversions_by_stepping(op, hw.cim, 8, 8, wl))

    def test_single_tile_24_cycles(self, hw):
        # One full 128x128 tile, one 8-bit input row, 48 ADCs:
        # 8 stream bits x ceil(128/48) ADC rounds.
        op = make_op(1, 16, 128)  # 16 weights x 8 bit-slices = 128 bit-columns
        assert cim_compute_cycles(op, hw.cim, 8, 8, 128) == 8 * -(-128 // 48)

    def test_wordline_halving_doubles_conversions_exactly(self, hw, llama):
        g = build_prefill_graph(llama, PhaseRequest(Phase.PREFILL, 512, 0, 1))
        for op in g.ops:
            if op.kind in MATMUL_KINDS:
                c128 = cim_adc_conversions(op, hw.cim, 8, 8, 128)
                c64 = cim_adc_conversions(op, hw.cim, 8, 8, 64)
                assert c64 == 2 * c128

    def test_wordline_halving_latency_ratio_in_1_to_2(self, hw, table):
        rng = random.Random(17)
        for _ in range(40):
            op = rand_op(rng, max_dim=512)
            c128 = cim_gemm_cost(op, hw.cim, table, hw.interposer, wordlines=128)
            c64 = cim_gemm_cost(op, hw.cim, table, hw.interposer, wordlines=64)
            ratio = c64.latency / c128.latency
            assert 1.0 - 1e-12 <= ratio <= 2.0 + 1e-12
            assert c64.adc_conversions >= c128.adc_conversions

    def test_zero_shapes_cost_nothing(self, hw, table):
        op = dataclasses.replace(make_op(4, 4, 4), m=0)
        assert cim_gemm_cost(op, hw.cim, table, hw.interposer).latency == 0.0
        op = dataclasses.replace(make_op(4, 4, 4), n=0)
        assert cim_gemm_cost(op, hw.cim, table, hw.interposer).energy == 0.0

    def test_wrong_engine_rejected(self, hw, table):
        soft = Operator("s", OpKind.SOFTMAX, 4, 4, 0, False, 16, 16, 0, "softmax")
        with pytest.raises(WrongEngineError):
            cim_gemm_cost(soft, hw.cim, table, hw.interposer)


class TestCiDCycleOracle:
    def small_cids(self):
        # Small configurations exercise multi-row, multi-block, remainder paths.
        return [
            CiDSpec(num_stacks=1, channels_per_stack=1, bankgroups_per_channel=1,
                    banks_per_bankgroup=2, multipliers_per_bank=4,
                    local_buffer_bytes=64, row_size_bytes=64,
                    dram_clock=1e9, t_rcd=4e-9, t_rp=4e-9),
            CiDSpec(num_stacks=1, channels_per_stack=2, bankgroups_per_channel=2,
                    banks_per_bankgroup=2, multipliers_per_bank=8,
                    local_buffer_bytes=256, row_size_bytes=128,
                    dram_clock=1e9, t_rcd=10e-9, t_rp=10e-9,
                    double_buffered=False),
        ]

    def test_closed_form_matches_stepping_enumerator(self, hw):
        rng = random.Random(19)
        specs = self.small_cids() + [hw.cid]
        for case in range(60):
            op = rand_op(rng)
            cid = specs[case % len(specs)]
            assert (cid_compute_cycles(op, cid, 8, 8)
                    == cid_cycles_by_stepping(op, cid, 8, 8)), (case, op)

    def test_latency_scales_inverse_with_banks(self, hw, table):
        # Large op: halving the bank pool doubles the critical-bank work.
        op = make_op(1, 12800, 8192, kind=OpKind.GEMV)
        full = cid_gemv_cost(op, hw.cid, table)
        half_cid = dataclasses.replace(hw.cid, banks_per_bankgroup=2)
        half = cid_gemv_cost(op, half_cid, table)
        assert half.latency / full.latency == pytest.approx(2.0, rel=0.10)

    def test_latency_non_increasing_in_bank_count(self, hw, table):
        rng = random.Random(23)
        for _ in range(25):
            op = rand_op(rng, max_dim=512)
            base = cid_gemv_cost(op, hw.cid, table).latency
            doubled_cid = dataclasses.replace(hw.cid, banks_per_bankgroup=8)
            doubled = cid_gemv_cost(op, doubled_cid, table).latency
            assert doubled <= base + 1e-15

    def test_buffer_loads_from_plan(self, hw):
        from memaccel.mapper import plan_cid_partition
        op = make_op(1, 4096, 8192, kind=OpKind.GEMV)
        plan = plan_cid_partition(op, hw.cid)
        assert plan.buffer_loads == 2  # 8192 inputs over a 4096-element buffer

    def test_zero_k_costs_nothing(self, hw, table):
        op = dataclasses.replace(make_op(4, 4, 4), k=0)
        assert cid_gemv_cost(op, hw.cid, table).latency == 0.0

    def test_decode_gemvs_faster_on_cid_than_cim(self, hw, table, llama):
        g = build_decode_step_graph(llama,
                                    PhaseRequest(Phase.DECODE, 2048, 1, 1, 0))
        for op in g.ops:
            if op.kind == OpKind.GEMV and op.weight_resident:
                cid = cid_gemv_cost(op, hw.cid, table)
                cim = cim_gemm_cost(op, hw.cim, table, hw.interposer)
                assert cid.latency < cim.latency


class TestSystolicCycleOracle:
    def test_closed_form_matches_stepping_enumerator(self, hw):
        rng = random.Random(29)
        arrays = hw.cim.num_cores * hw.systolic.arrays_per_core
        for case in range(60):
            op = rand_op(rng)
            assert (sa_compute_cycles(op, hw.systolic, arrays)
                    == sa_cycles_by_stepping(op, hw.systolic, arrays)), (case, op)

    def test_single_array_128_cube(self, hw):
        op = make_op(128, 128, 128)
        assert sa_compute_cycles(op, hw.systolic, 1) == 128 + 128 + 128 - 2

    def test_gemv_utilization_at_most_1_over_128(self, hw, table):
        op = make_op(1, 4096, 4096, kind=OpKind.GEMV)
        cost = sa_gemm_cost(op, hw.systolic, hw.cim, table, hw.interposer)
        compute_time = cost.breakdown["compute"][0]
        achieved_vs_compute = op_flops(op) / compute_time
        assert achieved_vs_compute <= peak_compute(Engine.SA, hw) / 128

    def test_prefill_gemm_slower_than_crossbars_at_iso_area(self, hw, table):
        op = make_op(2048, 4096, 4096)
        sa = sa_gemm_cost(op, hw.systolic, hw.cim, table, hw.interposer)
        cim = cim_gemm_cost(op, hw.cim, table, hw.interposer, wordlines=128)
        assert 1.1 <= sa.latency / cim.latency <= 4.0


class TestVectorOps:
    def test_layernorm_pass_count(self, hw, table):
        op = Operator("ln", OpKind.LAYERNORM, 1, 4096, 0, False, 4096, 4096, 0,
                      "layernorm")
        cost = vector_op_cost(op, hw.logic_die, table)
        passes = 5
        expected = -(-4096 // 512) * passes / hw.logic_die.vector_clock
        assert cost.breakdown["compute"][0] == pytest.approx(expected)

    def test_softmax_adds_exp_unit_term(self, hw, table):
        elems = 4096
        op = Operator("sm", OpKind.SOFTMAX, 1, elems, 0, False, elems, elems, 0,
                      "softmax", exp_count=elems)
        cost = vector_op_cost(op, hw.logic_die, table)
        base = Operator("sm0", OpKind.SOFTMAX, 1, elems, 0, False, elems, elems, 0,
                        "softmax", exp_count=0)
        base_cost = vector_op_cost(base, hw.logic_die, table)
        extra = cost.breakdown["compute"][0] - base_cost.breakdown["compute"][0]
        assert extra == pytest.approx(
            -(-elems // hw.logic_die.exp_units) / hw.logic_die.vector_clock)

    def test_zero_elements_cost_nothing(self, hw, table):
        op = Operator("z", OpKind.ELEMENTWISE, 0, 128, 0, False, 0, 0, 0, "residual")
        assert vector_op_cost(op, hw.logic_die, table).latency == 0.0

    def test_matmul_rejected(self, hw, table):
        with pytest.raises(WrongEngineError):
            vector_op_cost(make_op(4, 4, 4), hw.logic_die, table)


class TestTransfer:
    def test_zero_bytes_is_pure_latency(self, hw):
        cost = transfer_cost(0, hw.interposer)
        assert cost.latency == hw.interposer.latency
        assert cost.energy == 0.0

    def test_2mb_over_2tbs(self):
        link = InterposerLink(bandwidth=2e12, latency=100e-9)
        cost = transfer_cost(2 * 10**6, link)
        assert cost.latency == pytest.approx(1e-6 + 100e-9)

    def test_bandwidth_term_linear(self, hw):
        c1 = transfer_cost(10**6, hw.interposer)
        c2 = transfer_cost(2 * 10**6, hw.interposer)
        bw_term1 = c1.latency - hw.interposer.latency
        bw_term2 = c2.latency - hw.interposer.latency
        assert bw_term2 == pytest.approx(2 * bw_term1)

    def test_negative_bytes_rejected(self, hw):
        with pytest.raises(ValueError):
            transfer_cost(-1, hw.interposer)


class TestOpCostInvariants:
    ENGINES = (Engine.CIM, Engine.CID, Engine.SA)

    def test_energy_additivity_and_latency_is_stage_max(self, hw, table):
        rng = random.Random(31)
        for _ in range(40):
            op = rand_op(rng, max_dim=300)
            for engine in self.ENGINES:
                cost = cost_op(op, engine, hw, table)
                assert cost.energy == pytest.approx(
                    sum(e for _, e in cost.breakdown.values()), rel=1e-12)
                assert cost.latency == pytest.approx(
                    max(t for t, _ in cost.breakdown.values()), rel=1e-12)

    def test_bound_matches_dominant_stage(self, hw, table):
        rng = random.Random(37)
        mem_stages = {"memory", "buffer", "transfer"}
        for _ in range(30):
            op = rand_op(rng, max_dim=300)
            for engine in self.ENGINES:
                cost = cost_op(op, engine, hw, table)
                mem = max(t for s, (t, _) in cost.breakdown.items() if s in mem_stages)
                comp = max(t for s, (t, _) in cost.breakdown.items()
                           if s not in mem_stages)
                assert (cost.bound == Bound.MEMORY) == (mem >= comp)


class TestRoofline:
    @given(m=st.integers(1, 512), n=st.integers(1, 512), k=st.integers(1, 512),
           resident=st.booleans(),
           engine=st.sampled_from([Engine.CIM, Engine.CID, Engine.SA]))
    @settings(max_examples=150, deadline=None)
    def test_achieved_below_attainable(self, hw, table, m, n, k, resident, engine):
        op = make_op(m, n, k, weight_resident=resident)
        intensity, attainable, achieved = roofline_point(op, engine, hw, table)
        assert achieved <= attainable * 1.05

    def test_ridge_point_equality(self, hw):
        # At the ridge intensity both roofline terms agree by construction.
        ridge = peak_compute(Engine.CIM, hw) / peak_bandwidth(Engine.CIM, hw)
        assert min(peak_compute(Engine.CIM, hw),
                   ridge * peak_bandwidth(Engine.CIM, hw)) == pytest.approx(
            peak_compute(Engine.CIM, hw))

    def test_prefill_qkv_intensity_over_100(self, llama):
        from memaccel.workload import arithmetic_intensity
        g = build_prefill_graph(llama, PhaseRequest(Phase.PREFILL, 512, 0, 1))
        q = next(op for op in g.ops if op.op_id == "l0.q_proj")
        assert arithmetic_intensity(q) >= 100

    def test_decode_weight_gemvs_memory_bound_on_crossbars(self, hw, table, llama):
        g = build_decode_step_graph(llama, PhaseRequest(Phase.DECODE, 512, 1, 1, 0))
        for op in g.ops:
            if op.kind == OpKind.GEMV and op.weight_resident:
                cost = cost_op(op, Engine.CIM, hw, table)
                assert cost.bound == Bound.MEMORY
