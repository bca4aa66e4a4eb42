"""Phase-specific operator graphs for transformer inference.

Builds the per-layer operator sequence (norm -> QKV -> attention ->
projection -> feed-forward) for the prefill phase and for a single decode
step, and computes FLOP / byte footprints per operator.  No tensor math
happens here; operators only carry shapes and derived counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Phase(Enum):
    PREFILL = "prefill"
    DECODE = "decode"


class OpKind(Enum):
    GEMM = "gemm"
    GEMV = "gemv"
    SOFTMAX = "softmax"
    LAYERNORM = "layernorm"
    ACTIVATION = "activation"
    ELEMENTWISE = "elementwise"
    ROPE = "rope"


MATMUL_KINDS = (OpKind.GEMM, OpKind.GEMV)

# FLOPs charged per element for non-matmul operators.  Any constant keeps
# these ops a small fraction of total FLOPs over real graphs.
NONGEMM_FLOPS_PER_ELEMENT = {
    OpKind.LAYERNORM: 5,
    OpKind.SOFTMAX: 5,  # 4 arith + 1 exp
    OpKind.ACTIVATION: 2,
    OpKind.ELEMENTWISE: 1,
    OpKind.ROPE: 6,
}

VALID_PRECISIONS = (4, 8, 16)


class InvalidModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Transformer architecture description (no weights, just shapes)."""

    name: str
    num_layers: int
    hidden_dim: int
    num_q_heads: int
    num_kv_heads: int
    head_dim: int
    ffn_dim: int
    vocab_size: int
    weight_bits: int = 8
    activation_bits: int = 8
    qk_norm: bool = False

    def __post_init__(self):
        counts = {
            "num_layers": self.num_layers,
            "hidden_dim": self.hidden_dim,
            "num_q_heads": self.num_q_heads,
            "num_kv_heads": self.num_kv_heads,
            "head_dim": self.head_dim,
            "ffn_dim": self.ffn_dim,
            "vocab_size": self.vocab_size,
        }
        for key, val in counts.items():
            if not isinstance(val, int) or val <= 0:
                raise InvalidModelError(f"{key} must be a positive integer, got {val!r}")
        if self.num_q_heads % self.num_kv_heads != 0:
            raise InvalidModelError(
                f"num_q_heads ({self.num_q_heads}) must be divisible by "
                f"num_kv_heads ({self.num_kv_heads})"
            )
        for key in ("weight_bits", "activation_bits"):
            if getattr(self, key) not in VALID_PRECISIONS:
                raise InvalidModelError(f"{key} must be one of {VALID_PRECISIONS}")

    @property
    def q_dim(self) -> int:
        return self.num_q_heads * self.head_dim

    @property
    def kv_dim(self) -> int:
        return self.num_kv_heads * self.head_dim

    @property
    def heads_per_group(self) -> int:
        """Query heads sharing one KV head (1 for MHA)."""
        return self.num_q_heads // self.num_kv_heads

    def weight_count(self, include_embeddings: bool = True) -> int:
        per_layer = (
            self.hidden_dim * self.q_dim          # Q proj
            + 2 * self.hidden_dim * self.kv_dim   # K, V proj
            + self.q_dim * self.hidden_dim        # output proj
            + 3 * self.hidden_dim * self.ffn_dim  # gate, up, down
        )
        total = self.num_layers * per_layer
        if include_embeddings:
            total += 2 * self.vocab_size * self.hidden_dim
        return total

    def weight_bytes(self, include_embeddings: bool = True) -> int:
        return self.weight_count(include_embeddings) * self.weight_bits // 8

    def kv_cache_bytes(self, kv_len: int, batch: int = 1) -> int:
        per_token = 2 * self.kv_dim * self.activation_bits // 8
        return self.num_layers * kv_len * batch * per_token


@dataclass(frozen=True)
class PhaseRequest:
    phase: Phase
    l_in: int
    l_out: int
    batch: int = 1
    decode_step: int = 0

    def __post_init__(self):
        if self.l_in < 1:
            raise InvalidModelError(f"l_in must be >= 1, got {self.l_in}")
        if self.l_out < 0:
            raise InvalidModelError(f"l_out must be >= 0, got {self.l_out}")
        if self.batch < 1:
            raise InvalidModelError(f"batch must be >= 1, got {self.batch}")
        if self.phase == Phase.DECODE and not (0 <= self.decode_step < max(self.l_out, 1)):
            raise InvalidModelError(
                f"decode_step {self.decode_step} outside [0, {self.l_out})"
            )

    @property
    def kv_len(self) -> int:
        """Cached context visible to this decode step (prefill tokens + prior steps)."""
        return self.l_in + self.decode_step


@dataclass(frozen=True)
class Operator:
    """One node of a phase graph.

    For matmul kinds the shape is (m, n, k): output m x n, inner dim k.
    For non-matmul kinds m x n is the element count and k is 0.
    ``weight_resident`` is True when one operand is a static model weight;
    activation-activation products (scores, attention-value) are False.
    Identical per-(head-group, sequence) attention instances are stored once
    with ``group_count`` holding the replication factor.
    """

    op_id: str
    kind: OpKind
    m: int
    n: int
    k: int
    weight_resident: bool
    bytes_read: int
    bytes_written: int
    layer_index: int
    role: str
    group_count: int = 1
    kv_len: int = 0  # context length this op touches (attention ops only)
    exp_count: int = 0


@dataclass
class OperatorGraph:
    phase: Phase
    ops: list[Operator]
    deps: list[tuple[int, int]] = field(default_factory=list)
    model_name: str = ""
    request: PhaseRequest | None = None

    def __post_init__(self):
        for src, dst in self.deps:
            if not (0 <= src < dst < len(self.ops)):
                raise InvalidModelError(f"dependency edge ({src}, {dst}) breaks topological order")

    def total_flops(self) -> int:
        return sum(op_flops(op) * op.group_count for op in self.ops)

    def total_bytes(self) -> int:
        return sum(op_bytes(op) * op.group_count for op in self.ops)


def op_flops(op: Operator) -> int:
    """FLOPs for a single instance of the op (excluding group replication)."""
    if op.kind in MATMUL_KINDS:
        return 2 * op.m * op.n * op.k
    return NONGEMM_FLOPS_PER_ELEMENT[op.kind] * op.m * op.n


def op_bytes(op: Operator) -> int:
    return op.bytes_read + op.bytes_written


def arithmetic_intensity(op: Operator) -> float:
    return op_flops(op) / op_bytes(op)


def matmul_bytes(m: int, n: int, k: int, stored_bits: int, act_bits: int,
                 extra_written: int = 0) -> tuple[int, int]:
    """Byte traffic of an (m,n,k) matmul: stored operand n*k at stored_bits,
    streamed input m*k and output m*n at act_bits."""
    read = n * k * stored_bits // 8 + m * k * act_bits // 8
    written = m * n * act_bits // 8 + extra_written
    return read, written


class _GraphBuilder:
    def __init__(self, model: ModelSpec, phase: Phase, batch: int):
        self.model = model
        self.phase = phase
        self.batch = batch
        self.ops: list[Operator] = []
        self.deps: list[tuple[int, int]] = []

    def add(self, op: Operator, *parents: int) -> int:
        idx = len(self.ops)
        self.ops.append(op)
        for p in parents:
            self.deps.append((p, idx))
        return idx

    def matmul(self, op_id: str, m: int, n: int, k: int, layer: int, role: str, *,
               weight_resident: bool = True, group_count: int = 1, kv_len: int = 0,
               extra_written: int = 0, parents: tuple[int, ...] = ()) -> int:
        mdl = self.model
        stored_bits = mdl.weight_bits if weight_resident else mdl.activation_bits
        if weight_resident:
            kind = OpKind.GEMV if self.phase == Phase.DECODE else OpKind.GEMM
        else:
            kind = OpKind.GEMV if (self.phase == Phase.DECODE and m == 1 and self.batch == 1) else OpKind.GEMM
        read, written = matmul_bytes(m, n, k, stored_bits, mdl.activation_bits, extra_written)
        op = Operator(op_id, kind, m, n, k, weight_resident, read, written,
                      layer, role, group_count, kv_len)
        return self.add(op, *parents)

    def pointwise(self, op_id: str, kind: OpKind, m: int, n: int, layer: int, role: str, *,
                  kv_len: int = 0, reads: int = 1, writes: int = 1,
                  parents: tuple[int, ...] = ()) -> int:
        elems = m * n
        bpe = self.model.activation_bits // 8
        exp_count = elems if kind == OpKind.SOFTMAX else 0
        op = Operator(op_id, kind, m, n, 0, False,
                      elems * bpe * reads, elems * bpe * writes,
                      layer, role, 1, kv_len, exp_count)
        return self.add(op, *parents)


def _build_layer(b: _GraphBuilder, model: ModelSpec, layer: int, m: int,
                 seq: int, kv_len: int, batch: int, prev: int) -> int:
    """Emit one decoder layer; ``m`` is token-rows (batch*seq), ``kv_len`` the
    attention context per sequence.  Returns the index of the layer's last op."""
    hd = model.hidden_dim
    abyte = model.activation_bits // 8
    hpg = model.heads_per_group
    # One attention instance per (KV head, sequence): the group's query heads
    # stack into the m dimension so cached K/V bytes are read exactly once.
    attn_groups = model.num_kv_heads * batch

    ln1 = b.pointwise(f"l{layer}.ln1", OpKind.LAYERNORM, m, hd, layer, "layernorm",
                      parents=(prev,) if prev >= 0 else ())
    kv_write = m * model.kv_dim * abyte  # cache append for the new tokens
    q = b.matmul(f"l{layer}.q_proj", m, model.q_dim, hd, layer, "qkv", parents=(ln1,))
    k = b.matmul(f"l{layer}.k_proj", m, model.kv_dim, hd, layer, "qkv",
                 extra_written=kv_write, parents=(ln1,))
    v = b.matmul(f"l{layer}.v_proj", m, model.kv_dim, hd, layer, "qkv",
                 extra_written=kv_write, parents=(ln1,))
    last_q, last_k = q, k
    if model.qk_norm:
        last_q = b.pointwise(f"l{layer}.q_norm", OpKind.ELEMENTWISE, m, model.q_dim,
                             layer, "qk_norm", parents=(q,))
        last_k = b.pointwise(f"l{layer}.k_norm", OpKind.ELEMENTWISE, m, model.kv_dim,
                             layer, "qk_norm", parents=(k,))
    rope = b.pointwise(f"l{layer}.rope", OpKind.ROPE, m, model.q_dim + model.kv_dim,
                       layer, "rope", parents=(last_q, last_k))

    score = b.matmul(f"l{layer}.score", hpg * seq, kv_len, model.head_dim, layer,
                     "attn_score", weight_resident=False, group_count=attn_groups,
                     kv_len=kv_len, parents=(rope,))
    softmax = b.pointwise(f"l{layer}.softmax", OpKind.SOFTMAX,
                          model.num_q_heads * seq * batch, kv_len, layer,
                          "softmax", kv_len=kv_len, parents=(score,))
    pv = b.matmul(f"l{layer}.attn_v", hpg * seq, model.head_dim, kv_len, layer,
                  "attn_value", weight_resident=False, group_count=attn_groups,
                  kv_len=kv_len, parents=(softmax,))
    proj = b.matmul(f"l{layer}.o_proj", m, hd, model.q_dim, layer, "proj", parents=(pv,))
    res1 = b.pointwise(f"l{layer}.residual1", OpKind.ELEMENTWISE, m, hd, layer,
                       "residual", reads=2, parents=(proj,))

    ln2 = b.pointwise(f"l{layer}.ln2", OpKind.LAYERNORM, m, hd, layer, "layernorm",
                      parents=(res1,))
    gate = b.matmul(f"l{layer}.ffn_gate", m, model.ffn_dim, hd, layer, "ffn", parents=(ln2,))
    up = b.matmul(f"l{layer}.ffn_up", m, model.ffn_dim, hd, layer, "ffn", parents=(ln2,))
    act = b.pointwise(f"l{layer}.ffn_act", OpKind.ACTIVATION, m, model.ffn_dim, layer,
                      "activation", parents=(gate,))
    mul = b.pointwise(f"l{layer}.ffn_mul", OpKind.ELEMENTWISE, m, model.ffn_dim, layer,
                      "ffn_mul", reads=2, parents=(act, up))
    down = b.matmul(f"l{layer}.ffn_down", m, hd, model.ffn_dim, layer, "ffn", parents=(mul,))
    res2 = b.pointwise(f"l{layer}.residual2", OpKind.ELEMENTWISE, m, hd, layer,
                       "residual", reads=2, parents=(down,))
    return res2


def _build_graph(model: ModelSpec, req: PhaseRequest, seq: int, kv_len: int,
                 include_embeddings: bool) -> OperatorGraph:
    b = _GraphBuilder(model, req.phase, req.batch)
    m = req.batch * seq
    prev = -1
    if include_embeddings:
        # Table gather: reads one hidden-dim row per token from the embedding
        # table plus writes the activations; negligible FLOPs.
        emb = Operator("embed", OpKind.ELEMENTWISE, m, model.hidden_dim, 0, False,
                       m * model.hidden_dim * model.weight_bits // 8,
                       m * model.hidden_dim * model.activation_bits // 8,
                       0, "embedding")
        prev = b.add(emb)
    for layer in range(model.num_layers):
        prev = _build_layer(b, model, layer, m, seq, kv_len, req.batch, prev)
    final_ln = b.pointwise("final_ln", OpKind.LAYERNORM, req.batch, model.hidden_dim,
                           model.num_layers - 1, "layernorm", parents=(prev,))
    if include_embeddings:
        # LM head projects only the last position of each sequence.
        b.matmul("lm_head", req.batch, model.vocab_size, model.hidden_dim,
                 model.num_layers - 1, "lm_head", parents=(final_ln,))
    return OperatorGraph(req.phase, b.ops, b.deps, model.name, req)


def build_prefill_graph(model: ModelSpec, req: PhaseRequest,
                        include_embeddings: bool = True) -> OperatorGraph:
    if req.phase != Phase.PREFILL:
        raise InvalidModelError("build_prefill_graph requires a prefill request")
    return _build_graph(model, req, seq=req.l_in, kv_len=req.l_in,
                        include_embeddings=include_embeddings)


def build_decode_step_graph(model: ModelSpec, req: PhaseRequest,
                            include_embeddings: bool = True) -> OperatorGraph:
    if req.phase != Phase.DECODE:
        raise InvalidModelError("build_decode_step_graph requires a decode request")
    return _build_graph(model, req, seq=1, kv_len=req.kv_len,
                        include_embeddings=include_embeddings)
