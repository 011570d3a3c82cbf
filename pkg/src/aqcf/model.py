"""The full network: token embedding, quantum-attention blocks, terminal
adaptive circuit, quantum-classical fusion, classifier head."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import adaptive_circuit, autograd as ag, fusion as fusion_mod
from .autograd import Tensor
from .complexity import ComplexityAnalyzer, shannon_entropy as complexity_entropy
from .errors import ConfigError, InvalidInputError
from .qmemory import MultiHeadMemory
from .qsim import MAX_QUBITS, NoiseConfig


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    n_q: int = 8
    l_max: int = 20
    max_seq_len: int = 64
    m_slots: int = 16
    dropout: float = 0.1
    num_classes: int = 2
    truncate_overlong: bool = True
    memory_gamma: float = 0.1
    lambda_target: float = 0.4

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"n_heads={self.n_heads} must divide d_model={self.d_model}")
        if not 1 <= self.n_q <= MAX_QUBITS:
            raise ConfigError(f"n_q must be in [1, {MAX_QUBITS}]")
        if self.l_max < 1:
            raise ConfigError("l_max must be >= 1")
        if self.vocab_size < 2 or self.num_classes < 2:
            raise ConfigError("vocab_size and num_classes must each be >= 2")


@dataclass
class StageFlags:
    """Per-stage overrides applied during the staged training protocol."""

    stage: int = 3
    quantum_enabled: bool = True
    lambda_override: Optional[float] = None
    max_depth: Optional[int] = None
    trainable_groups: tuple = ("classical", "quantum", "fusion")


@dataclass
class ForwardTrace:
    lam: float = 0.0
    depths: List[int] = field(default_factory=list)
    gate_axis_counts: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    # tensor handles consumed by the training-side regularizers
    lam_t: Optional[Tensor] = None
    depth_fractions: List[Tensor] = field(default_factory=list)
    quantum_outputs: Optional[Tensor] = None
    input_entropies: List[float] = field(default_factory=list)


def sinusoidal_positions(max_len: int, d: int) -> np.ndarray:
    pos = np.arange(max_len)[:, None]
    i = np.arange(d)[None, :]
    angles = pos / np.power(10000.0, (2 * (i // 2)) / d)
    enc = np.zeros((max_len, d))
    enc[:, 0::2] = np.sin(angles[:, 0::2])
    enc[:, 1::2] = np.cos(angles[:, 1::2])
    return enc


class Block:
    """Quantum memory attention + feed-forward, each with residual and norm."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        d = cfg.d_model
        self.memory = MultiHeadMemory(d, cfg.n_heads, cfg.n_q, cfg.m_slots,
                                      cfg.memory_gamma, rng)
        scale = 1.0 / np.sqrt(d)
        self.ff_w1 = ag.parameter(rng.normal(0.0, scale, size=(d, 4 * d)))
        self.ff_b1 = ag.parameter(np.zeros(4 * d))
        self.ff_w2 = ag.parameter(rng.normal(0.0, 1.0 / np.sqrt(4 * d), size=(4 * d, d)))
        self.ff_b2 = ag.parameter(np.zeros(d))
        self.norm1_gain = ag.parameter(np.ones(d))
        self.norm1_bias = ag.parameter(np.zeros(d))
        self.norm2_gain = ag.parameter(np.ones(d))
        self.norm2_bias = ag.parameter(np.zeros(d))

    def parameters(self, prefix: str):
        params = {
            f"{prefix}.ff_w1": self.ff_w1, f"{prefix}.ff_b1": self.ff_b1,
            f"{prefix}.ff_w2": self.ff_w2, f"{prefix}.ff_b2": self.ff_b2,
            f"{prefix}.norm1_gain": self.norm1_gain, f"{prefix}.norm1_bias": self.norm1_bias,
            f"{prefix}.norm2_gain": self.norm2_gain, f"{prefix}.norm2_bias": self.norm2_bias,
        }
        params.update(self.memory.parameters(f"{prefix}.memory"))
        return params

    def forward(self, x: Tensor, quantum_enabled: bool, record_updates: bool) -> Tensor:
        if quantum_enabled:
            att = self.memory.forward(x, record_updates=record_updates)
            x = ag.layer_norm(x + att, self.norm1_gain, self.norm1_bias)
        else:
            x = ag.layer_norm(x, self.norm1_gain, self.norm1_bias)
        ff = ag.matmul(ag.relu(ag.matmul(x, self.ff_w1) + self.ff_b1), self.ff_w2) + self.ff_b2
        return ag.layer_norm(x + ff, self.norm2_gain, self.norm2_bias)


class AqcfModel:
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        d = cfg.d_model
        self.embedding = ag.parameter(rng.normal(0.0, 0.02, size=(cfg.vocab_size, d)))
        self.positions = sinusoidal_positions(cfg.max_seq_len, d)
        self.blocks = [Block(cfg, rng) for _ in range(cfg.n_layers)]
        self.adaptive = adaptive_circuit.AdaptiveCircuitParams(
            d, cfg.n_q, cfg.l_max, cfg.dropout, rng=rng)
        self.up_proj = ag.parameter(rng.normal(0.0, 1.0 / np.sqrt(cfg.n_q), size=(cfg.n_q, d)))
        self.analyzer = ComplexityAnalyzer(rng)
        self.fusion = fusion_mod.FusionParams(d, cfg.lambda_target, rng=rng)
        self.classical_attn = fusion_mod.ClassicalAttentionParams(d, cfg.n_heads, rng)
        self.cls_w = ag.parameter(np.zeros((d, cfg.num_classes)))
        self.cls_b = ag.parameter(np.zeros(cfg.num_classes))

    # -- parameter bookkeeping ------------------------------------------

    def parameter_groups(self):
        classical = {"embedding": self.embedding, "cls_w": self.cls_w, "cls_b": self.cls_b}
        quantum = {"up_proj": self.up_proj}
        for i, block in enumerate(self.blocks):
            for name, p in block.parameters(f"block{i}").items():
                (quantum if ".memory" in name else classical)[name] = p
        quantum.update(self.adaptive.parameters())
        fusion_params = dict(self.fusion.parameters())
        fusion_params.update(self.analyzer.parameters())
        classical.update(self.classical_attn.parameters())
        return {"classical": classical, "quantum": quantum, "fusion": fusion_params}

    def parameters(self):
        merged = {}
        for group in self.parameter_groups().values():
            merged.update(group)
        return merged

    def count_parameters(self) -> int:
        return int(sum(p.data.size for p in self.parameters().values()))

    # -- forward --------------------------------------------------------

    def _validate_tokens(self, tokens) -> np.ndarray:
        ids = np.asarray(tokens, dtype=np.int64)
        if ids.ndim != 1 or ids.size == 0:
            raise InvalidInputError("token sequence must be a non-empty 1-D id list")
        if ids.min() < 0 or ids.max() >= self.cfg.vocab_size:
            raise InvalidInputError(
                f"token id out of range [0, {self.cfg.vocab_size}): {ids.max()}")
        if ids.size > self.cfg.max_seq_len:
            if not self.cfg.truncate_overlong:
                raise InvalidInputError(
                    f"sequence length {ids.size} exceeds max_seq_len {self.cfg.max_seq_len}")
            ids = ids[:self.cfg.max_seq_len]
        return ids

    def forward(self, tokens, mode: str = "infer",
                rng: Optional[np.random.Generator] = None,
                noise: Optional[NoiseConfig] = None,
                stage: Optional[StageFlags] = None):
        """Classify one token sequence; returns (logits tensor, trace)."""
        stage = stage if stage is not None else StageFlags()
        ids = self._validate_tokens(tokens)
        t_len = ids.size
        record = mode == "train" and stage.quantum_enabled

        x = ag.embedding(self.embedding, ids) + Tensor(self.positions[:t_len])
        pooled_embed = ag.mean(x, axis=0)

        for block in self.blocks:
            x = block.forward(x, stage.quantum_enabled, record)
        pooled_blocks = ag.mean(x, axis=0)

        trace = ForwardTrace()
        if stage.quantum_enabled:
            expectations = []
            for t in range(t_len):
                e_t, config, frac = adaptive_circuit.forward(
                    x[t], self.adaptive, mode=mode, rng=rng, noise=noise,
                    max_depth=stage.max_depth)
                expectations.append(e_t)
                trace.depths.append(config.depth)
                trace.depth_fractions.append(frac)
                trace.input_entropies.append(complexity_entropy(x.data[t]))
                np.add.at(trace.gate_axis_counts, config.gate_axes.reshape(-1), 1)
            q_tokens = ag.stack(expectations)  # (T, n_q)
            trace.quantum_outputs = q_tokens
            a_q = ag.mean(ag.matmul(q_tokens, self.up_proj), axis=0)
        else:
            a_q = Tensor(np.zeros(self.cfg.d_model))

        a_c = ag.mean(fusion_mod.classical_attention(x, self.classical_attn), axis=0)

        if stage.lambda_override is not None:
            lam = Tensor(float(stage.lambda_override))
        else:
            c = self.analyzer.pathway_complexity_t(pooled_embed, t_len, self.cfg.max_seq_len)
            lam = fusion_mod.fusion_weight(c, self.fusion)
        trace.lam = float(lam.data)
        trace.lam_t = lam

        gates = fusion_mod.pathway_gates(a_q, a_c, self.fusion)
        residual = 0.5 * (pooled_embed + pooled_blocks)
        fused = fusion_mod.fuse(a_q, a_c, lam, gates, residual, self.fusion)
        logits = ag.matmul(fused, self.cls_w) + self.cls_b
        return logits, trace

    def predict(self, tokens) -> int:
        logits, _ = self.forward(tokens, mode="infer")
        return int(np.argmax(logits.data))

    def apply_memory_updates(self):
        for block in self.blocks:
            block.memory.apply_updates()
