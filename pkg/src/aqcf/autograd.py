"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A Tensor wraps a numpy array plus an optional gradient and a backward
closure.  Graphs are built eagerly during the forward pass and walked once,
in reverse topological order, by `backward`.  Quantum circuit evaluations
plug in as custom nodes built with `custom_node` (see circuit_ops).
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError, OracleInvalidError, StaleGraphError


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Tensor:
    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._backward: Optional[Callable[[], None]] = None
        self._prev: tuple = ()
        self._consumed = False

    # -- graph plumbing -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise InvalidInputError("backward requires a scalar loss")
        if self._consumed:
            raise StaleGraphError("backward already ran on this graph; re-run the forward pass")
        topo: list[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()
            node._consumed = True

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def custom_node(data, parents: Sequence[Tensor], backward_fn: Callable[[Tensor], None]) -> Tensor:
    """Build a graph node with a hand-written backward rule.

    `backward_fn(out)` must read `out.grad` and accumulate into each parent
    via `parent._accumulate`.
    """
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._prev = tuple(parents)
        out._backward = lambda: backward_fn(out)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum `g` down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- primitives ---------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise DimensionError("add operands do not broadcast", a.shape, b.shape)

    def backward(out):
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad, b.shape))

    return custom_node(data, [a, b], backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise DimensionError("mul operands do not broadcast", a.shape, b.shape)

    def backward(out):
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad * a.data, b.shape))

    return custom_node(data, [a, b], backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def backward(out):
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-out.grad * a.data / (b.data ** 2), b.shape))

    return custom_node(data, [a, b], backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim == 0 or b.data.ndim == 0:
        raise DimensionError("matmul requires at least 1-D operands", a.shape, b.shape)
    try:
        data = a.data @ b.data
    except ValueError:
        raise DimensionError("matmul shapes are incompatible", a.shape, b.shape)

    def backward(out):
        g = out.grad
        a2 = a.data if a.data.ndim > 1 else a.data[None, :]
        b2 = b.data if b.data.ndim > 1 else b.data[:, None]
        g2 = g
        if a.data.ndim == 1:
            g2 = g2[None, ...]
        if b.data.ndim == 1:
            g2 = g2[..., None]
        if a.requires_grad:
            ga = g2 @ np.swapaxes(b2, -1, -2)
            a._accumulate(ga.reshape(a.shape))
        if b.requires_grad:
            gb = np.swapaxes(a2, -1, -2) @ g2
            b._accumulate(gb.reshape(b.shape))

    return custom_node(data, [a, b], backward)


def _unary(a, value, local_grad_fn) -> Tensor:
    a = as_tensor(a)

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad * local_grad_fn(value))

    return custom_node(value, [a], backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    return _unary(a, s, lambda v: v * (1.0 - v))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return _unary(a, t, lambda v: 1.0 - v ** 2)


def relu(a) -> Tensor:
    a = as_tensor(a)
    v = np.maximum(a.data, 0.0)
    mask = (a.data > 0.0).astype(np.float64)
    return _unary(a, v, lambda _: mask)


def exp(a) -> Tensor:
    a = as_tensor(a)
    v = np.exp(a.data)
    return _unary(a, v, lambda v_: v_)


def log(a) -> Tensor:
    a = as_tensor(a)
    data = a.data

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad / data)

    return custom_node(np.log(data), [a], backward)


def arctan(a) -> Tensor:
    a = as_tensor(a)
    data = a.data

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad / (1.0 + data ** 2))

    return custom_node(np.arctan(data), [a], backward)


def absolute(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, np.abs(a.data), lambda _: np.sign(a.data))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    v = np.sqrt(a.data)

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad * 0.5 / v)

    return custom_node(v, [a], backward)


def reduce_max(a) -> Tensor:
    """Max over all elements; gradient flows to the (first) argmax."""
    a = as_tensor(a)
    flat_idx = int(np.argmax(a.data))

    def backward(out):
        if a.requires_grad:
            g = np.zeros_like(a.data)
            g.reshape(-1)[flat_idx] = out.grad
            a._accumulate(g)

    return custom_node(a.data.reshape(-1)[flat_idx], [a], backward)


def reduce_min(a) -> Tensor:
    a = as_tensor(a)
    flat_idx = int(np.argmin(a.data))

    def backward(out):
        if a.requires_grad:
            g = np.zeros_like(a.data)
            g.reshape(-1)[flat_idx] = out.grad
            a._accumulate(g)

    return custom_node(a.data.reshape(-1)[flat_idx], [a], backward)


def square(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, a.data ** 2, lambda _: 2.0 * a.data)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(out):
        if a.requires_grad:
            g = out.grad
            dot = (g * s).sum(axis=axis, keepdims=True)
            a._accumulate((g - dot) * s)

    return custom_node(s, [a], backward)


LAYER_NORM_VAR_FLOOR = 1e-5


def layer_norm(x, gain=None, bias=None) -> Tensor:
    """Normalize the last axis; variance floored at 1e-5 inside the sqrt."""
    x = as_tensor(x)
    d = x.data.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    var_eff = np.maximum(var, LAYER_NORM_VAR_FLOOR)
    inv = 1.0 / np.sqrt(var_eff)
    xhat = xc * inv
    gate = (var > LAYER_NORM_VAR_FLOOR).astype(np.float64)

    parents = [x]
    if gain is not None:
        gain, bias = as_tensor(gain), as_tensor(bias)
        data = gain.data * xhat + bias.data
        parents += [gain, bias]
    else:
        data = xhat

    def backward(out):
        g = out.grad
        gxhat = g * gain.data if gain is not None else g
        if gain is not None and gain.requires_grad:
            gain._accumulate(_unbroadcast(g * xhat, gain.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(_unbroadcast(g, bias.shape))
        if x.requires_grad:
            mean_g = gxhat.mean(axis=-1, keepdims=True)
            mean_gx = (gxhat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gxhat - mean_g - gate * xhat * mean_gx))

    return custom_node(data, parents, backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(out):
        pieces = np.split(out.grad, np.cumsum(sizes)[:-1], axis=axis)
        for t, piece in zip(tensors, pieces):
            if t.requires_grad:
                t._accumulate(piece)

    return custom_node(data, tensors, backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(out):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(np.take(out.grad, i, axis=axis))

    return custom_node(data, tensors, backward)


def take(a, idx) -> Tensor:
    a = as_tensor(a)
    data = a.data[idx]

    def backward(out):
        if a.requires_grad:
            g = np.zeros_like(a.data)
            np.add.at(g, idx, out.grad)
            a._accumulate(g)

    return custom_node(data, [a], backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad.reshape(a.shape))

    return custom_node(data, [a], backward)


def transpose(a) -> Tensor:
    a = as_tensor(a)

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad.T)

    return custom_node(a.data.T, [a], backward)


def embedding(table: Tensor, indices) -> Tensor:
    """Row lookup into a (vocab, d) table by an integer index array."""
    indices = np.asarray(indices, dtype=np.int64)
    data = table.data[indices]

    def backward(out):
        if table.requires_grad:
            g = np.zeros_like(table.data)
            np.add.at(g, indices, out.grad)
            table._accumulate(g)

    return custom_node(data, [table], backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else a.data.shape[axis]

    def backward(out):
        if a.requires_grad:
            g = out.grad
            if not keepdims and axis is not None:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape) / count)

    return custom_node(data, [a], backward)


def total(a, axis=None, keepdims: bool = False) -> Tensor:
    """Sum reduction (named to avoid shadowing the builtin)."""
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(out):
        if a.requires_grad:
            g = out.grad
            if not keepdims and axis is not None:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape).copy())

    return custom_node(data, [a], backward)


def variance(a, axis=None) -> Tensor:
    """Population variance, composed from differentiable pieces."""
    m = mean(a, axis=axis, keepdims=axis is not None)
    return mean(square(as_tensor(a) - m), axis=axis)


def cross_entropy_with_logits(logits: Tensor, label: int) -> Tensor:
    """-log softmax(logits)[label], computed stably."""
    logits = as_tensor(logits)
    z = logits.data
    if not 0 <= label < z.shape[-1]:
        raise InvalidInputError(f"label {label} out of range for {z.shape[-1]} classes")
    zmax = z.max()
    lse = zmax + np.log(np.exp(z - zmax).sum())
    p = np.exp(z - lse)

    def backward(out):
        if logits.requires_grad:
            g = p.copy()
            g[label] -= 1.0
            logits._accumulate(out.grad * g)

    return custom_node(lse - z[label], [logits], backward)


def straight_through(p: Tensor, hard_values) -> Tensor:
    """Forward the sampled hard values; backward passes gradients to p unchanged."""
    p = as_tensor(p)
    hard = _as_array(hard_values)
    if hard.shape != p.shape:
        raise DimensionError("hard values must match probability shape", hard.shape, p.shape)

    def backward(out):
        if p.requires_grad:
            p._accumulate(out.grad)

    return custom_node(hard, [p], backward)


# -- gradient checking --------------------------------------------------


class GradCheckReport:
    def __init__(self, max_rel_error: float, tol: float):
        self.max_rel_error = max_rel_error
        self.tol = tol
        self.passed = max_rel_error < tol

    def __repr__(self):
        status = "pass" if self.passed else "FAIL"
        return f"GradCheckReport(max_rel_error={self.max_rel_error:.3e}, tol={self.tol:.0e}, {status})"


def grad_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-5, tol: float = 1e-5) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar f against central differences."""
    if h <= 0:
        raise InvalidInputError("finite-difference step must be positive")
    x0 = _as_array(x)
    ref1 = f(Tensor(x0.copy())).item()
    ref2 = f(Tensor(x0.copy())).item()
    if ref1 != ref2:
        raise OracleInvalidError("function is not deterministic; finite differences invalid")

    leaf = Tensor(x0.copy(), requires_grad=True)
    out = f(leaf)
    out.backward()
    ad = leaf.grad if leaf.grad is not None else np.zeros_like(x0)

    fd = np.zeros_like(x0)
    flat = x0.reshape(-1)
    for k in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[k] += h
        xm[k] -= h
        fp = f(Tensor(xp.reshape(x0.shape))).item()
        fm = f(Tensor(xm.reshape(x0.shape))).item()
        fd.reshape(-1)[k] = (fp - fm) / (2.0 * h)

    denom = np.maximum(1.0, np.maximum(np.abs(ad), np.abs(fd)))
    max_rel = float(np.max(np.abs(ad - fd) / denom)) if x0.size else 0.0
    return GradCheckReport(max_rel, tol)
