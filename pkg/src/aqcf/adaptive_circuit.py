"""Entropy-driven adaptive quantum circuit: depth prediction, learnable gate
selection, quantum dropout, and adaptive entanglement.

Each forward pass realizes a concrete CircuitConfig (depth, per-qubit gate
axes, dropout mask, entanglement edges) and executes it as one differentiable
circuit node.  Discrete train-mode choices are sampled and tied back to their
selection logits with the straight-through estimator; inference is fully
deterministic (argmax / threshold) with no sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import autograd as ag
from . import circuit_ops as cops
from .autograd import Tensor
from .complexity import stats_t
from .errors import InvalidInputError
from .qsim import NoiseConfig, QuantumState, all_expect_z, depolarize, zero_state
from . import qsim

GATE_AXES = ("RX", "RY", "RZ")


class AdaptiveCircuitParams:
    """Learnable parameters of the adaptive circuit."""

    def __init__(self, d: int, n_q: int, l_max: int, p_dropout: float = 0.1,
                 depth_hidden: int = 8, rng: Optional[np.random.Generator] = None):
        if l_max < 1:
            raise InvalidInputError("maximum depth must be >= 1")
        if not 0.0 <= p_dropout < 1.0:
            raise InvalidInputError("dropout probability must be in [0, 1)")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.n_q = n_q
        self.l_max = l_max
        self.p_dropout = p_dropout
        scale = 1.0 / np.sqrt(d)
        self.projection = ag.parameter(rng.normal(0.0, scale, size=(n_q, d)))
        self.depth_w1 = ag.parameter(rng.normal(0.0, 0.5, size=(depth_hidden, 4)))
        self.depth_b1 = ag.parameter(np.zeros(depth_hidden))
        self.depth_w2 = ag.parameter(rng.normal(0.0, 0.5, size=depth_hidden))
        self.depth_b2 = ag.parameter(np.zeros(()))
        self.gate_logits = ag.parameter(rng.normal(0.0, 0.1, size=(l_max, n_q, 3)))
        self.rotation_angles = ag.parameter(rng.uniform(-0.1, 0.1, size=(l_max, n_q)))
        self.entangle_logits = ag.parameter(rng.normal(0.0, 0.1, size=(l_max, max(n_q - 1, 1))))

    def parameters(self, prefix: str = "adaptive"):
        return {
            f"{prefix}.projection": self.projection,
            f"{prefix}.depth_w1": self.depth_w1,
            f"{prefix}.depth_b1": self.depth_b1,
            f"{prefix}.depth_w2": self.depth_w2,
            f"{prefix}.depth_b2": self.depth_b2,
            f"{prefix}.gate_logits": self.gate_logits,
            f"{prefix}.rotation_angles": self.rotation_angles,
            f"{prefix}.entangle_logits": self.entangle_logits,
        }


@dataclass
class CircuitConfig:
    """One forward pass's realized circuit."""

    depth: int
    gate_axes: np.ndarray  # (depth, n_q) indices into GATE_AXES
    dropout_mask: np.ndarray  # (depth, n_q) booleans, True = keep
    entangle_edges: List[List[int]] = field(default_factory=list)  # per layer: edge start indices


def depth_fraction_t(x_q: Tensor, params: AdaptiveCircuitParams) -> Tensor:
    """Sigmoid output of the depth predictor over (mean, std, max, min)."""
    h = ag.tanh(ag.matmul(params.depth_w1, stats_t(x_q)) + params.depth_b1)
    return ag.sigmoid(ag.matmul(params.depth_w2, h) + params.depth_b2)


def depth_from_fraction(fraction: float, l_max: int) -> int:
    depth = 1 + int(np.floor(fraction * (l_max - 1)))
    return int(np.clip(depth, 1, l_max))


def predict_depth(x_q, params: AdaptiveCircuitParams, max_depth: Optional[int] = None) -> int:
    """Realized circuit depth in [1, L_max] for a quantum-projected input."""
    x_q = x_q if isinstance(x_q, Tensor) else Tensor(np.asarray(x_q, dtype=np.float64))
    l_max = params.l_max if max_depth is None else min(max_depth, params.l_max)
    fraction = float(depth_fraction_t(x_q, params).data)
    return depth_from_fraction(fraction, l_max)


def select_gates(params: AdaptiveCircuitParams, depth: int, mode: str,
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Per-layer, per-qubit rotation-axis choice.

    Training samples from softmax(gate_logits); inference takes the argmax
    (ties break toward the lowest axis index, RX < RY < RZ).
    """
    _check_mode(mode)
    logits = params.gate_logits.data[:depth]
    if mode == "infer":
        return np.argmax(logits, axis=-1)
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    probs = e / e.sum(axis=-1, keepdims=True)
    axes = np.empty((depth, params.n_q), dtype=np.int64)
    for l in range(depth):
        for i in range(params.n_q):
            axes[l, i] = rng.choice(3, p=probs[l, i])
    return axes


def sample_dropout_mask(depth: int, n_q: int, p_dropout: float, mode: str,
                        rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Keep-mask for rotation gates; dropout only bites in train mode."""
    _check_mode(mode)
    if mode == "infer" or p_dropout == 0.0:
        return np.ones((depth, n_q), dtype=bool)
    return rng.random((depth, n_q)) >= p_dropout


def entanglement_layer(layer: int, params: AdaptiveCircuitParams, mode: str,
                       rng: Optional[np.random.Generator] = None) -> List[int]:
    """Adjacent-pair CNOT edges for one layer; returns included start indices."""
    _check_mode(mode)
    if params.n_q < 2:
        return []
    logits = params.entangle_logits.data[layer, :params.n_q - 1]
    probs = 1.0 / (1.0 + np.exp(-logits))
    if mode == "infer":
        return [i for i in range(params.n_q - 1) if probs[i] >= 0.5]
    return [i for i in range(params.n_q - 1) if rng.random() < probs[i]]


def _check_mode(mode: str):
    if mode not in ("train", "infer"):
        raise InvalidInputError(f"mode must be 'train' or 'infer', got {mode!r}")


def forward(x: Tensor, params: AdaptiveCircuitParams, mode: str = "infer",
            rng: Optional[np.random.Generator] = None,
            noise: Optional[NoiseConfig] = None,
            max_depth: Optional[int] = None):
    """Full adaptive transformation of one d-vector.

    Returns (expectations, config, depth_fraction): a differentiable (n_q,)
    tensor of Z expectations, the realized CircuitConfig, and the depth
    predictor's raw sigmoid output (used by the training-side auxiliary loss).
    """
    _check_mode(mode)
    if x.data.shape != (params.d,):
        raise InvalidInputError(f"expected input of length {params.d}, got {x.data.shape}")
    n_q = params.n_q
    x_q = ag.matmul(params.projection, x)
    fraction = depth_fraction_t(x_q, params)
    l_max = params.l_max if max_depth is None else min(max_depth, params.l_max)
    depth = depth_from_fraction(float(fraction.data), l_max)

    gate_axes = select_gates(params, depth, mode, rng)
    keep = sample_dropout_mask(depth, n_q, params.p_dropout, mode, rng)
    edges = [entanglement_layer(l, params, mode, rng) for l in range(depth)]
    config = CircuitConfig(depth, gate_axes, keep, edges)

    angles = ag.concat([ag.arctan(x_q), ag.reshape(params.rotation_angles, -1)], axis=0)

    instrs: List[cops.Instr] = [cops.RotInstr(i, "RY", i) for i in range(n_q)]
    if mode == "train":
        weights = _train_weights(params, config)
        w_pos = 0
        for l in range(depth):
            for i in range(n_q):
                if keep[l, i]:
                    instrs.append(cops.MixRotInstr(i, n_q + l * n_q + i, w_pos))
                w_pos += 3
            for i in edges[l]:
                instrs.append(cops.StCnotInstr(i, i + 1, w_pos + i))
            w_pos += max(n_q - 1, 0)
        out = cops.circuit_expectations(n_q, instrs, angles, weights)
    else:
        for l in range(depth):
            for i in range(n_q):
                if keep[l, i]:
                    instrs.append(cops.RotInstr(i, GATE_AXES[gate_axes[l, i]], n_q + l * n_q + i))
            for i in edges[l]:
                instrs.append(cops.CnotInstr(i, i + 1))
        out = cops.circuit_expectations(n_q, instrs, angles)

    if noise is not None and noise.epsilon > 0.0:
        if noise.mode == "exact":
            out = out * (1.0 - noise.epsilon)
        else:
            out = Tensor(_trajectory_expectations(n_q, instrs, angles.data,
                                                  None if mode == "infer" else weights.data,
                                                  noise, rng))
    return out, config, fraction


def _train_weights(params: AdaptiveCircuitParams, config: CircuitConfig) -> Tensor:
    """Straight-through weight vector: gate one-hots then edge inclusions, per layer."""
    probs = []
    hard = []
    for l in range(config.depth):
        probs.append(ag.reshape(ag.softmax(params.gate_logits[l], axis=-1), -1))
        onehots = np.zeros((params.n_q, 3))
        onehots[np.arange(params.n_q), config.gate_axes[l]] = 1.0
        hard.append(onehots.reshape(-1))
        if params.n_q >= 2:
            probs.append(ag.sigmoid(params.entangle_logits[l][:params.n_q - 1]))
            included = np.zeros(params.n_q - 1)
            included[config.entangle_edges[l]] = 1.0
            hard.append(included)
    return ag.straight_through(ag.concat(probs, axis=0), np.concatenate(hard))


def _trajectory_expectations(n_q, instrs, angles, weights, noise: NoiseConfig,
                             rng: np.random.Generator) -> np.ndarray:
    psi = cops.run_instructions(n_q, instrs, angles, weights)
    state = QuantumState(n_q, psi)
    depolarize(state, noise, rng)
    return all_expect_z(state)
