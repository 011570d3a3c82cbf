"""Hybrid fusion: complexity-based mixing weight, per-pathway sigmoid gates,
the gated blend with residual + layer norm, and the classical multi-head
attention pathway it blends against."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, DimensionError, InvalidInputError


class FusionParams:
    def __init__(self, d: int, lambda_target: float = 0.4, hidden: int = 8,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.lambda_target = lambda_target
        self.fusion_w1 = ag.parameter(rng.normal(0.0, 0.5, size=(hidden, 3)))
        self.fusion_b1 = ag.parameter(np.zeros(hidden))
        self.fusion_w2 = ag.parameter(rng.normal(0.0, 0.5, size=hidden))
        self.fusion_b2 = ag.parameter(np.zeros(()))
        scale = 1.0 / np.sqrt(d)
        self.gate_q_w = ag.parameter(rng.normal(0.0, scale, size=(d, d)))
        self.gate_q_b = ag.parameter(np.zeros(d))
        self.gate_c_w = ag.parameter(rng.normal(0.0, scale, size=(d, d)))
        self.gate_c_b = ag.parameter(np.zeros(d))
        self.out_w = ag.parameter(rng.normal(0.0, scale, size=(d, d)))
        self.norm_gain = ag.parameter(np.ones(d))
        self.norm_bias = ag.parameter(np.zeros(d))

    def parameters(self, prefix: str = "fusion"):
        return {
            f"{prefix}.fusion_w1": self.fusion_w1,
            f"{prefix}.fusion_b1": self.fusion_b1,
            f"{prefix}.fusion_w2": self.fusion_w2,
            f"{prefix}.fusion_b2": self.fusion_b2,
            f"{prefix}.gate_q_w": self.gate_q_w,
            f"{prefix}.gate_q_b": self.gate_q_b,
            f"{prefix}.gate_c_w": self.gate_c_w,
            f"{prefix}.gate_c_b": self.gate_c_b,
            f"{prefix}.out_w": self.out_w,
            f"{prefix}.norm_gain": self.norm_gain,
            f"{prefix}.norm_bias": self.norm_bias,
        }


class ClassicalAttentionParams:
    """Standard multi-head attention projections."""

    def __init__(self, d: int, n_heads: int, rng: Optional[np.random.Generator] = None):
        if n_heads < 1 or d % n_heads != 0:
            raise ConfigError(f"head count {n_heads} must divide model dimension {d}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.n_heads = n_heads
        self.head_dim = d // n_heads
        scale = 1.0 / np.sqrt(d)
        self.w_query = ag.parameter(rng.normal(0.0, scale, size=(d, d)))
        self.w_key = ag.parameter(rng.normal(0.0, scale, size=(d, d)))
        self.w_value = ag.parameter(rng.normal(0.0, scale, size=(d, d)))
        self.w_out = ag.parameter(rng.normal(0.0, scale, size=(d, d)))

    def parameters(self, prefix: str = "classical_attn"):
        return {
            f"{prefix}.w_query": self.w_query,
            f"{prefix}.w_key": self.w_key,
            f"{prefix}.w_value": self.w_value,
            f"{prefix}.w_out": self.w_out,
        }


def fusion_weight(c: Sequence[Tensor], params: FusionParams) -> Tensor:
    """Mixing weight lambda in (0,1) from (semantic, syntactic, length) scores."""
    if len(c) != 3:
        raise InvalidInputError("fusion expects exactly three complexity scores")
    cvec = ag.stack(list(c))
    h = ag.tanh(ag.matmul(params.fusion_w1, cvec) + params.fusion_b1)
    return ag.sigmoid(ag.matmul(params.fusion_w2, h) + params.fusion_b2)


def classical_attention(x: Tensor, params: ClassicalAttentionParams) -> Tensor:
    """softmax(Q K^T / sqrt(head_dim)) V per head, concatenated and projected."""
    if x.data.ndim != 2 or x.data.shape[1] != params.d:
        raise DimensionError("attention input must be (seq, d)", x.shape, (None, params.d))
    q = ag.matmul(x, params.w_query)
    k = ag.matmul(x, params.w_key)
    v = ag.matmul(x, params.w_value)
    dh = params.head_dim
    heads = []
    for h in range(params.n_heads):
        sl = slice(h * dh, (h + 1) * dh)
        scores = ag.matmul(q[:, sl], ag.transpose(k[:, sl])) * (1.0 / np.sqrt(dh))
        heads.append(ag.matmul(ag.softmax(scores, axis=-1), v[:, sl]))
    return ag.matmul(ag.concat(heads, axis=1), params.w_out)


def pathway_gates(a_q: Tensor, a_c: Tensor, params: FusionParams) -> Tuple[Tensor, Tensor]:
    g_q = ag.sigmoid(ag.matmul(params.gate_q_w, a_q) + params.gate_q_b)
    g_c = ag.sigmoid(ag.matmul(params.gate_c_w, a_c) + params.gate_c_b)
    return g_q, g_c


def fuse(a_q: Tensor, a_c: Tensor, lam: Tensor, gates: Tuple[Tensor, Tensor],
         x_residual: Tensor, params: FusionParams) -> Tensor:
    """Gated convex blend, output projection, residual, layer norm."""
    g_q, g_c = gates
    blended = lam * (g_q * a_q) + (1.0 - lam) * (g_c * a_c)
    return ag.layer_norm(x_residual + ag.matmul(params.out_w, blended),
                         params.norm_gain, params.norm_bias)


def quantum_utilization(lambdas) -> Tuple[float, float]:
    """(mean lambda, fraction of samples with lambda strictly above 0.5)."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.size == 0:
        raise InvalidInputError("utilization of an empty lambda collection is undefined")
    return float(lambdas.mean()), float((lambdas > 0.5).mean())
