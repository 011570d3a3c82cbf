"""Statistical complexity measures driving circuit and fusion adaptation.

Two parallel implementations live here: plain numpy functions with the exact
conventions (used by diagnostics and as the reference in tests), and
graph-building tensor versions used inside the model so the measures stay
differentiable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import InvalidInputError


@dataclass
class ComplexityFeatures:
    mean: float
    variance: float
    entropy: float  # nats
    kurtosis: float  # excess kurtosis; 0 by convention for zero variance


@dataclass
class QuantumStats:
    mean: float
    std: float
    max: float
    min: float


@dataclass
class PathwayComplexity:
    semantic: float  # in [0, 1]
    syntactic: float
    length: float


def shannon_entropy(x) -> float:
    """Entropy of the absolute-value-normalized components, in nats.

    p_i = |x_i| / sum_j |x_j|; zero components contribute nothing; an all-zero
    vector degenerates to 0.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise InvalidInputError("entropy of an empty vector is undefined")
    a = np.abs(x)
    s = a.sum()
    if s == 0.0:
        return 0.0
    p = a / s
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def complexity_features(x) -> ComplexityFeatures:
    """Mean, population variance, entropy, and excess kurtosis of a vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise InvalidInputError("complexity features need at least one component")
    mu = x.mean()
    var = ((x - mu) ** 2).mean()
    if var == 0.0:
        kurt = 0.0
    else:
        m4 = ((x - mu) ** 4).mean()
        kurt = m4 / var ** 2 - 3.0
    return ComplexityFeatures(float(mu), float(var), shannon_entropy(x), float(kurt))


def quantum_stats(x_q) -> QuantumStats:
    """(mean, population std, max, min) of the quantum-projected vector."""
    x_q = np.asarray(x_q, dtype=np.float64)
    if x_q.size == 0:
        raise InvalidInputError("stats of an empty vector are undefined")
    return QuantumStats(float(x_q.mean()), float(x_q.std()), float(x_q.max()), float(x_q.min()))


# -- differentiable mirrors --------------------------------------------


def entropy_t(x: Tensor) -> Tensor:
    a = ag.absolute(x)
    s = ag.total(a)
    if float(s.data) == 0.0:
        return Tensor(0.0)
    p = a / s
    # log argument padded to 1 exactly where p == 0, so those terms vanish
    pad = Tensor((p.data == 0.0).astype(np.float64))
    return -ag.total(p * ag.log(p + pad))


def features_t(x: Tensor) -> Tensor:
    """Differentiable (mean, variance, entropy, kurtosis) as a 4-vector."""
    mu = ag.mean(x)
    centered = x - mu
    var = ag.mean(ag.square(centered))
    if float(var.data) == 0.0:
        kurt = Tensor(0.0)
    else:
        m4 = ag.mean(ag.square(ag.square(centered)))
        kurt = m4 / ag.square(var) - 3.0
    return ag.stack([mu, var, entropy_t(x), kurt])


def stats_t(x_q: Tensor) -> Tensor:
    """Differentiable (mean, std, max, min) as a 4-vector."""
    mu = ag.mean(x_q)
    var = ag.mean(ag.square(x_q - mu))
    std = ag.sqrt(var) if float(var.data) > 0.0 else Tensor(0.0)
    return ag.stack([mu, std, ag.reduce_max(x_q), ag.reduce_min(x_q)])


class ComplexityAnalyzer:
    """Pathway-complexity indicators: semantic, syntactic, length.

    Semantic is the normalized entropy of the pooled embedding, length the
    capped sequence-length fraction; syntactic is a learned linear+sigmoid
    head over the four complexity features.
    """

    def __init__(self, rng: np.random.Generator):
        self.syntactic_w = ag.parameter(rng.normal(0.0, 0.5, size=4))
        self.syntactic_b = ag.parameter(np.zeros(()))

    def parameters(self):
        return {"complexity.syntactic_w": self.syntactic_w,
                "complexity.syntactic_b": self.syntactic_b}

    def pathway_complexity_t(self, pooled: Tensor, seq_len: int, max_len: int):
        if not 1 <= seq_len:
            raise InvalidInputError("sequence length must be >= 1")
        if max_len < seq_len:
            raise InvalidInputError("configured cap must be >= sequence length")
        d = pooled.data.size
        semantic = entropy_t(pooled) / float(np.log(d))
        syntactic = ag.sigmoid(ag.matmul(self.syntactic_w, features_t(pooled)) + self.syntactic_b)
        length = Tensor(min(seq_len / max_len, 1.0))
        return semantic, syntactic, length

    def pathway_complexity(self, x, seq_len: int, max_len: int) -> PathwayComplexity:
        """Numpy convenience: pools a (seq, d) embedding matrix and scores it."""
        x = np.asarray(x, dtype=np.float64)
        pooled = x.mean(axis=0) if x.ndim == 2 else x
        sem, syn, ln = self.pathway_complexity_t(Tensor(pooled), seq_len, max_len)
        return PathwayComplexity(float(sem.data), float(syn.data), float(ln.data))
