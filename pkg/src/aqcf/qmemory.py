"""Quantum memory banks: interference similarity, softmax retrieval with
sqrt(n_q) scaling, soft slot updates, and multi-head gated integration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .circuit_ops import pairwise_similarity
from .errors import ConfigError, DimensionError, InvalidInputError


@dataclass
class MemoryReadout:
    weights: np.ndarray  # simplex over slots
    retrieved: np.ndarray


class MemoryBank:
    """M slots of (quantum key in R^{n_q}, classical value in R^{d_v})."""

    def __init__(self, m_slots: int, n_q: int, d_v: int, gamma: float = 0.1,
                 rng: Optional[np.random.Generator] = None):
        if m_slots < 1:
            raise InvalidInputError("memory needs at least one slot")
        if not 0.0 < gamma <= 1.0:
            raise InvalidInputError("update rate must be in (0, 1]")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.m_slots = m_slots
        self.n_q = n_q
        self.d_v = d_v
        self.gamma = gamma
        self.keys = ag.parameter(rng.normal(0.0, 0.5, size=(m_slots, n_q)))
        self.values = ag.parameter(rng.normal(0.0, 0.5, size=(m_slots, d_v)))


def quantum_similarity(q, k) -> float:
    """<Z_0> of the fixed query-rotation / key-counter-rotation / CNOT-chain
    interference circuit; 1 exactly when q == k."""
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.shape != k.shape or q.ndim != 1:
        raise DimensionError("query and key must be equal-length vectors", q.shape, k.shape)
    sims = pairwise_similarity(Tensor(q[None, :]), Tensor(k[None, :]))
    return float(sims.data[0])


def retrieval_weights(sims: Tensor, n_q: int) -> Tensor:
    """Softmax over slots of similarity / sqrt(n_q)."""
    return ag.softmax(sims * (1.0 / np.sqrt(n_q)), axis=-1)


def retrieve_t(query: Tensor, bank: MemoryBank):
    """Differentiable retrieval: (simplex weights, weighted value sum)."""
    q_rows = ag.take(ag.reshape(query, (1, bank.n_q)), np.zeros(bank.m_slots, dtype=np.int64))
    sims = pairwise_similarity(q_rows, bank.keys)
    alpha = retrieval_weights(sims, bank.n_q)
    return alpha, ag.matmul(alpha, bank.values)


def retrieve(query, bank: MemoryBank) -> MemoryReadout:
    alpha, r = retrieve_t(Tensor(np.asarray(query, dtype=np.float64)), bank)
    return MemoryReadout(alpha.data.copy(), r.data.copy())


def update(bank: MemoryBank, new_key, new_value) -> MemoryBank:
    """Soft-update the most similar slot in place; all others untouched."""
    new_key = np.asarray(new_key, dtype=np.float64)
    new_value = np.asarray(new_value, dtype=np.float64)
    if new_key.shape != (bank.n_q,) or new_value.shape != (bank.d_v,):
        raise DimensionError("update shapes do not match the bank",
                             (new_key.shape, new_value.shape), (bank.n_q, bank.d_v))
    sims = np.array([quantum_similarity(new_key, bank.keys.data[m])
                     for m in range(bank.m_slots)])
    m_star = int(np.argmax(sims))  # argmax takes the lowest index on ties
    g = bank.gamma
    bank.keys.data[m_star] = (1.0 - g) * bank.keys.data[m_star] + g * new_key
    bank.values.data[m_star] = (1.0 - g) * bank.values.data[m_star] + g * new_value
    return bank


class MultiHeadMemory:
    """n_h independent banks over d/n_h head slices with a sigmoid blend gate."""

    def __init__(self, d: int, n_heads: int, n_q: int, m_slots: int,
                 gamma: float = 0.1, rng: Optional[np.random.Generator] = None):
        if n_heads < 1 or d % n_heads != 0:
            raise ConfigError(f"head count {n_heads} must divide model dimension {d}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.n_heads = n_heads
        self.n_q = n_q
        self.d_head = d // n_heads
        self.banks = [MemoryBank(m_slots, n_q, self.d_head, gamma, rng)
                      for _ in range(n_heads)]
        scale = 1.0 / np.sqrt(self.d_head)
        self.query_proj = [ag.parameter(rng.normal(0.0, scale, size=(self.d_head, n_q)))
                           for _ in range(n_heads)]
        self.gate_w = ag.parameter(rng.normal(0.0, 1.0 / np.sqrt(2 * d), size=(2 * d, d)))
        self.gate_b = ag.parameter(np.zeros(d))
        self._pending_updates: List[tuple] = []

    def parameters(self, prefix: str = "qmemory"):
        params = {f"{prefix}.gate_w": self.gate_w, f"{prefix}.gate_b": self.gate_b}
        for h in range(self.n_heads):
            params[f"{prefix}.head{h}.query_proj"] = self.query_proj[h]
            params[f"{prefix}.head{h}.keys"] = self.banks[h].keys
            params[f"{prefix}.head{h}.values"] = self.banks[h].values
        return params

    def forward(self, x: Tensor, record_updates: bool = False) -> Tensor:
        """Gated memory attention over one vector (d,) or a token matrix (T, d)."""
        single = x.data.ndim == 1
        xm = ag.reshape(x, (1, self.d)) if single else x
        t_len = xm.data.shape[0]
        m = self.banks[0].m_slots

        head_queries = []
        for h in range(self.n_heads):
            xh = xm[:, h * self.d_head:(h + 1) * self.d_head]
            head_queries.append(ag.matmul(xh, self.query_proj[h]))  # (T, n_q)
            if record_updates:
                self._pending_updates.append(
                    (h, head_queries[-1].data.mean(axis=0).copy(),
                     xm.data[:, h * self.d_head:(h + 1) * self.d_head].mean(axis=0).copy()))

        q_all = ag.concat(head_queries, axis=0)  # (n_h*T, n_q)
        q_rows = ag.take(q_all, np.repeat(np.arange(self.n_heads * t_len), m))
        key_rows = ag.concat(
            [ag.take(self.banks[h].keys, np.tile(np.arange(m), t_len))
             for h in range(self.n_heads)], axis=0)
        sims = pairwise_similarity(q_rows, key_rows)  # (n_h*T*M,)
        alpha = retrieval_weights(ag.reshape(sims, (self.n_heads, t_len, m)), self.n_q)

        outputs = [ag.matmul(alpha[h], self.banks[h].values) for h in range(self.n_heads)]
        o = ag.concat(outputs, axis=1)  # (T, d)
        gate = ag.sigmoid(ag.matmul(ag.concat([xm, o], axis=1), self.gate_w) + self.gate_b)
        y = gate * o + (1.0 - gate) * xm
        return ag.reshape(y, (self.d,)) if single else y

    def apply_updates(self):
        """Flush batch-mean soft updates recorded during training forwards."""
        if not self._pending_updates:
            return
        grouped = {}
        for h, q_mean, v_mean in self._pending_updates:
            grouped.setdefault(h, []).append((q_mean, v_mean))
        for h, items in grouped.items():
            q = np.mean([it[0] for it in items], axis=0)
            v = np.mean([it[1] for it in items], axis=0)
            update(self.banks[h], q, v)
        self._pending_updates = []
