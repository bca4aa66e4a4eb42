import random

import pytest
from hypothesis import given, settings, strategies as st

from memaccel.workload import (InvalidModelError, MATMUL_KINDS, ModelSpec, OpKind,
                               Operator, Phase, PhaseRequest, arithmetic_intensity,
                               build_decode_step_graph, build_prefill_graph,
                               matmul_bytes, op_bytes, op_flops)
from oracles import bytes_by_loop_nest, flops_by_loop_nest


def make_op(m, n, k, weight_resident=True, kind=OpKind.GEMM,
            weight_bits=8, act_bits=8):
    read, written = matmul_bytes(m, n, k, weight_bits if weight_resident else act_bits,
                                 act_bits)
    return Operator("t", kind, m, n, k, weight_resident, read, written, 0, "test")


def tiny_model(**overrides):
    base = dict(name="tiny", num_layers=2, hidden_dim=64, num_q_heads=4,
                num_kv_heads=2, head_dim=16, ffn_dim=128, vocab_size=100,
                weight_bits=8, activation_bits=8)
    base.update(overrides)
    return ModelSpec(**base)


class TestModelSpec:
    def test_gqa_divisibility_enforced(self):
        with pytest.raises(InvalidModelError):
            tiny_model(num_q_heads=4, num_kv_heads=3)

    def test_grouped_query_heads_allowed(self):
        m = tiny_model(num_q_heads=4, num_kv_heads=2, head_dim=32)
        # hidden_dim need not equal num_q_heads * head_dim
        assert m.q_dim == 128 and m.hidden_dim == 64

    def test_positive_counts(self):
        with pytest.raises(InvalidModelError):
            tiny_model(num_layers=0)
        with pytest.raises(InvalidModelError):
            tiny_model(hidden_dim=-4)

    def test_precision_whitelist(self):
        with pytest.raises(InvalidModelError):
            tiny_model(weight_bits=5)
        tiny_model(weight_bits=4, activation_bits=16)

    def test_decode_step_range(self):
        with pytest.raises(InvalidModelError):
            PhaseRequest(Phase.DECODE, 16, 4, 1, decode_step=4)
        PhaseRequest(Phase.DECODE, 16, 4, 1, decode_step=3)


class TestFlopByteOracle:
    def test_200_random_ops_match_loop_nest(self):
        rng = random.Random(7)
        for _ in range(200):
            m, n, k = (rng.randint(1, 8) for _ in range(3))
            resident = rng.random() < 0.5
            wb = rng.choice([4, 8, 16])
            ab = rng.choice([8, 16])
            op = make_op(m, n, k, resident, weight_bits=wb, act_bits=ab)
            assert op_flops(op) == flops_by_loop_nest(op)
            read, written = bytes_by_loop_nest(op, wb, ab)
            assert (op.bytes_read, op.bytes_written) == (read, written)

    @given(m=st.integers(1, 8), n=st.integers(1, 8), k=st.integers(1, 8))
    @settings(max_examples=60, deadline=None)
    def test_flops_equal_two_per_mac(self, m, n, k):
        op = make_op(m, n, k)
        assert op_flops(op) == flops_by_loop_nest(op) == 2 * m * n * k

    def test_q_projection_example(self):
        # hidden 4096, l_in 512: closed form cross-checked by the MAC counter
        # on a small instance above.
        op = make_op(512, 4096, 4096)
        assert op_flops(op) == 2 * 512 * 4096 * 4096

    def test_unit_op(self):
        op = make_op(1, 1, 1)
        assert op_flops(op) == 2
        assert arithmetic_intensity(op) == 2 / op_bytes(op)

    def test_gemv_intensity_about_two_at_8bit(self):
        op = make_op(1, 4096, 4096, kind=OpKind.GEMV)
        expected_bytes = 4096 * 4096 + 4096 + 4096
        assert op_bytes(op) == expected_bytes
        assert arithmetic_intensity(op) == pytest.approx(2.0, rel=0.01)

    def test_batch_16_intensity_scales_16x(self):
        gemv = make_op(1, 4096, 4096, kind=OpKind.GEMV)
        gemm = make_op(16, 4096, 4096)
        ratio = arithmetic_intensity(gemm) / arithmetic_intensity(gemv)
        assert ratio == pytest.approx(16.0, rel=0.05)


def prefill_graph(model, l_in, batch=1):
    return build_prefill_graph(model, PhaseRequest(Phase.PREFILL, l_in, 0, batch))


def decode_graph(model, l_in, l_out, batch=1, step=0):
    return build_decode_step_graph(
        model, PhaseRequest(Phase.DECODE, l_in, l_out, batch, decode_step=step))


class TestPrefillGraph:
    def test_requires_prefill_request(self, llama):
        with pytest.raises(InvalidModelError):
            build_prefill_graph(llama, PhaseRequest(Phase.DECODE, 8, 4, 1))

    def test_layer_shapes(self, llama):
        g = prefill_graph(llama, 512)
        q = next(op for op in g.ops if op.op_id == "l0.q_proj")
        assert (q.m, q.n, q.k) == (512, 4096, 4096)
        score = next(op for op in g.ops if op.op_id == "l0.score")
        assert (score.m, score.n, score.k) == (512, 512, 128)
        assert not score.weight_resident
        assert score.group_count == llama.num_kv_heads
        pv = next(op for op in g.ops if op.op_id == "l0.attn_v")
        assert (pv.m, pv.n, pv.k) == (512, 128, 512)
        assert not pv.weight_resident
        ffn = next(op for op in g.ops if op.op_id == "l0.ffn_up")
        assert ffn.n == llama.ffn_dim

    def test_kv_write_bytes_accounted(self, llama):
        g = prefill_graph(llama, 64)
        k_proj = next(op for op in g.ops if op.op_id == "l0.k_proj")
        plain_read, plain_written = matmul_bytes(64, llama.kv_dim, llama.hidden_dim, 8, 8)
        assert k_proj.bytes_read == plain_read
        assert k_proj.bytes_written == plain_written + 64 * llama.kv_dim

    def test_layers_identical_and_op_count_affine(self, llama, qwen):
        import re
        for model in (llama, qwen):
            g = prefill_graph(model, 32)
            per_layer = {}
            for op in g.ops:
                match = re.match(r"^l(\d+)\.", op.op_id)
                if match:
                    per_layer.setdefault(int(match.group(1)), []).append(
                        (op.op_id.split(".")[1], op.kind, op.m, op.n, op.k))
            seqs = list(per_layer.values())
            assert all(s == seqs[0] for s in seqs[1:])
            constant = len(g.ops) - model.num_layers * len(seqs[0])
            assert constant == 3  # embed, final norm, lm head

    def test_qwen_qk_norm_ops_present(self, qwen, llama):
        gq = prefill_graph(qwen, 16)
        gl = prefill_graph(llama, 16)
        assert any(op.role == "qk_norm" for op in gq.ops)
        assert not any(op.role == "qk_norm" for op in gl.ops)

    def test_graph_is_topological_dag(self, llama):
        g = prefill_graph(llama, 16)
        assert all(src < dst for src, dst in g.deps)

    def test_gemm_dominates_prefill_flops(self, llama):
        g = prefill_graph(llama, 2048)
        gemm = sum(op_flops(op) * op.group_count for op in g.ops
                   if op.kind in MATMUL_KINDS)
        assert gemm / g.total_flops() > 0.95

    def test_prefill_flops_strictly_increase_in_l_in(self, llama):
        flops = [prefill_graph(llama, li).total_flops() for li in (64, 128, 256, 512)]
        assert all(a < b for a, b in zip(flops, flops[1:]))

    def test_lm_head_projects_last_position_only(self, llama):
        g = prefill_graph(llama, 512)
        head = next(op for op in g.ops if op.op_id == "lm_head")
        assert (head.m, head.n) == (1, llama.vocab_size)

    def test_embeddings_toggle(self, llama):
        req = PhaseRequest(Phase.PREFILL, 16, 0, 1)
        with_e = build_prefill_graph(llama, req, include_embeddings=True)
        without = build_prefill_graph(llama, req, include_embeddings=False)
        assert len(with_e.ops) == len(without.ops) + 2


class TestDecodeGraph:
    def test_weight_resident_ops_become_gemv(self, llama):
        g = decode_graph(llama, 128, 8)
        for op in g.ops:
            if op.weight_resident:
                assert op.kind == OpKind.GEMV
                assert op.m == 1  # batch

    def test_gemv_m_equals_batch(self, llama):
        g = decode_graph(llama, 128, 8, batch=4)
        for op in g.ops:
            if op.kind == OpKind.GEMV and op.weight_resident:
                assert op.m == 4

    def test_step0_attention_k_equals_l_in(self, llama):
        g = decode_graph(llama, 96, 8, step=0)
        pv = next(op for op in g.ops if op.op_id == "l0.attn_v")
        assert pv.k == 96
        score = next(op for op in g.ops if op.op_id == "l0.score")
        assert score.n == 96

    def test_kv_read_bytes_per_layer(self, llama):
        kv_len = 128
        g = decode_graph(llama, kv_len, 4)
        score = next(op for op in g.ops if op.op_id == "l0.score")
        pv = next(op for op in g.ops if op.op_id == "l0.attn_v")
        kv_read = (score.group_count * score.n * score.k
                   + pv.group_count * pv.n * pv.k)
        assert kv_read == 2 * kv_len * llama.num_kv_heads * llama.head_dim

    def test_triangular_kv_growth(self, llama):
        l_in, l_out = 37, 23
        total = 0
        for step in range(l_out):
            g = decode_graph(llama, l_in, l_out, step=step)
            pv = next(op for op in g.ops if op.op_id == "l0.attn_v")
            total += pv.k
        assert total == l_out * l_in + l_out * (l_out - 1) // 2

    def test_decode_bytes_strictly_increase_with_step(self, llama):
        totals = [decode_graph(llama, 64, 40, step=s).total_bytes()
                  for s in (0, 10, 20, 39)]
        assert all(a < b for a, b in zip(totals, totals[1:]))

    def test_decode_intensity_below_two_at_batch1(self, llama):
        g = decode_graph(llama, 2048, 1)
        for op in g.ops:
            if op.kind in MATMUL_KINDS:
                assert arithmetic_intensity(op) < 2.0

    def test_prefill_of_one_token_matches_decode_shapes(self, llama):
        gp = prefill_graph(llama, 1)
        gd = decode_graph(llama, 1, 1)
        shapes_p = [(o.role, o.m, o.n, o.k) for o in gp.ops if o.weight_resident]
        shapes_d = [(o.role, o.m, o.n, o.k) for o in gd.ops if o.weight_resident]
        assert shapes_p == shapes_d

    def test_gqa_group_count_and_stacked_heads(self, qwen):
        g = decode_graph(qwen, 64, 1)
        score = next(op for op in g.ops if op.op_id == "l0.score")
        assert score.group_count == qwen.num_kv_heads
        assert score.m == qwen.heads_per_group  # query heads stack into rows
        assert score.kind == OpKind.GEMM


class TestWeightFootprint:
    def test_llama_weight_count_near_7b(self, llama):
        assert llama.weight_count() == pytest.approx(6.74e9, rel=0.02)

    def test_kv_cache_bytes(self, llama):
        assert llama.kv_cache_bytes(2048, 1) == 32 * 2048 * 2 * 4096
