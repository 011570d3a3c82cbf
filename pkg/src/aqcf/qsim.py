"""Exact dense statevector simulation of small qubit registers.

Amplitudes are stored as one contiguous complex128 vector indexed by the
integer basis label, with qubit 0 as the least significant bit.  Gates are
applied as strided in-place kernels; the full 2^n x 2^n matrix is never
materialized here (the dense-matrix construction lives only in the test
oracles).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, InvalidInputError, NotDifferentiableError

MAX_QUBITS = 24  # 2^24 complex doubles ~ 256 MB

ROTATION_KINDS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATION_KINDS + ("CNOT",)


@dataclass
class QuantumState:
    n_qubits: int
    amplitudes: np.ndarray

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def copy(self) -> "QuantumState":
        return QuantumState(self.n_qubits, self.amplitudes.copy())


@dataclass
class Gate:
    kind: str
    target: int
    control: Optional[int] = None
    angle: Optional[float] = None

    def is_rotation(self) -> bool:
        return self.kind in ROTATION_KINDS

    def with_angle(self, angle: float) -> "Gate":
        return Gate(self.kind, self.target, self.control, angle)


@dataclass
class NoiseConfig:
    epsilon: float = 0.0
    mode: str = "exact"  # "exact" damps expectations; "trajectory" perturbs states
    trajectories: int = 1

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidInputError(f"depolarizing probability must be in [0,1], got {self.epsilon}")
        if self.mode not in ("exact", "trajectory"):
            raise InvalidInputError(f"unknown noise mode {self.mode!r}")
        if self.trajectories < 1:
            raise InvalidInputError("trajectory count must be >= 1")


def zero_state(n: int) -> QuantumState:
    """|0...0> on n qubits."""
    if not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")
    amps = np.zeros(2 ** n, dtype=np.complex128)
    amps[0] = 1.0
    return QuantumState(n, amps)


def rotation_matrix(kind: str, angle) -> np.ndarray:
    """2x2 rotation matrix; `angle` may be a scalar or an array (batched)."""
    theta = np.asarray(angle, dtype=np.float64)
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    m = np.empty(theta.shape + (2, 2), dtype=np.complex128)
    if kind == "RX":
        m[..., 0, 0] = c
        m[..., 0, 1] = -1j * s
        m[..., 1, 0] = -1j * s
        m[..., 1, 1] = c
    elif kind == "RY":
        m[..., 0, 0] = c
        m[..., 0, 1] = -s
        m[..., 1, 0] = s
        m[..., 1, 1] = c
    elif kind == "RZ":
        m[..., 0, 0] = np.exp(-0.5j * theta)
        m[..., 0, 1] = 0.0
        m[..., 1, 0] = 0.0
        m[..., 1, 1] = np.exp(0.5j * theta)
    else:
        raise InvalidInputError(f"not a rotation kind: {kind!r}")
    return m


def rotation_matrix_deriv(kind: str, angle) -> np.ndarray:
    """Elementwise d/d(angle) of rotation_matrix; supports batched angles."""
    theta = np.asarray(angle, dtype=np.float64)
    c = 0.5 * np.cos(theta / 2.0)
    s = 0.5 * np.sin(theta / 2.0)
    m = np.empty(theta.shape + (2, 2), dtype=np.complex128)
    if kind == "RX":
        m[..., 0, 0] = -s
        m[..., 0, 1] = -1j * c
        m[..., 1, 0] = -1j * c
        m[..., 1, 1] = -s
    elif kind == "RY":
        m[..., 0, 0] = -s
        m[..., 0, 1] = -c
        m[..., 1, 0] = c
        m[..., 1, 1] = -s
    elif kind == "RZ":
        m[..., 0, 0] = -0.5j * np.exp(-0.5j * theta)
        m[..., 0, 1] = 0.0
        m[..., 1, 0] = 0.0
        m[..., 1, 1] = 0.5j * np.exp(0.5j * theta)
    else:
        raise InvalidInputError(f"not a rotation kind: {kind!r}")
    return m


def _check_index(q: int, n: int):
    if not 0 <= q < n:
        raise InvalidInputError(f"qubit index {q} out of range for {n} qubits")


def apply_1q(amps: np.ndarray, matrix: np.ndarray, qubit: int, n: int) -> None:
    """In-place single-qubit kernel.

    `amps` is (2^n,) or batched (B, 2^n); `matrix` is (2, 2) or (B, 2, 2)
    with per-batch matrices.
    """
    batched = amps.ndim == 2
    view = amps.reshape(-1, 2 ** (n - 1 - qubit), 2, 2 ** qubit)
    v0 = view[:, :, 0, :].copy()
    v1 = view[:, :, 1, :].copy()
    if matrix.ndim == 3:
        m = matrix[:, :, :, None, None] if batched else matrix[None, :, :, None, None]
        view[:, :, 0, :] = m[:, 0, 0] * v0 + m[:, 0, 1] * v1
        view[:, :, 1, :] = m[:, 1, 0] * v0 + m[:, 1, 1] * v1
    else:
        view[:, :, 0, :] = matrix[0, 0] * v0 + matrix[0, 1] * v1
        view[:, :, 1, :] = matrix[1, 0] * v0 + matrix[1, 1] * v1


def apply_cnot(amps: np.ndarray, control: int, target: int, n: int) -> None:
    """In-place CNOT kernel on a (2^n,) or (B, 2^n) amplitude array."""
    view = amps.reshape((-1,) + (2,) * n)
    ax_c = 1 + (n - 1 - control)
    ax_t = 1 + (n - 1 - target)
    idx = [slice(None)] * (n + 1)
    idx[ax_c] = 1
    sub = view[tuple(idx)]
    ax_t_sub = ax_t - 1 if ax_t > ax_c else ax_t
    i0 = [slice(None)] * n
    i1 = [slice(None)] * n
    i0[ax_t_sub] = 0
    i1[ax_t_sub] = 1
    tmp = sub[tuple(i0)].copy()
    sub[tuple(i0)] = sub[tuple(i1)]
    sub[tuple(i1)] = tmp


def apply_gate(state: QuantumState, g: Gate) -> QuantumState:
    """Apply one gate in place; returns the (mutated) state."""
    n = state.n_qubits
    _check_index(g.target, n)
    if g.kind == "CNOT":
        if g.control is None:
            raise InvalidInputError("CNOT requires a control qubit")
        _check_index(g.control, n)
        if g.control == g.target:
            raise InvalidInputError("CNOT control and target must differ")
        apply_cnot(state.amplitudes, g.control, g.target, n)
    elif g.kind in ROTATION_KINDS:
        if g.angle is None:
            raise InvalidInputError(f"{g.kind} gate requires an angle")
        apply_1q(state.amplitudes, rotation_matrix(g.kind, g.angle), g.target, n)
    else:
        raise InvalidInputError(f"unknown gate kind {g.kind!r}")
    return state


def angle_encode(x: Sequence[float]) -> QuantumState:
    """Product state from per-qubit RY rotations with arctan-compressed angles."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError("encoding input must be a non-empty vector")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("encoding input contains NaN or Inf")
    state = zero_state(x.size)
    for i, xi in enumerate(x):
        apply_1q(state.amplitudes, rotation_matrix("RY", np.arctan(xi)), i, state.n_qubits)
    return state


def expect_z(state: QuantumState, qubit: int) -> float:
    """<Z> of one qubit: signed sum of basis-state probabilities."""
    n = state.n_qubits
    _check_index(qubit, n)
    view = state.amplitudes.reshape(2 ** (n - 1 - qubit), 2, 2 ** qubit)
    probs = np.abs(view) ** 2
    return float(probs[:, 0, :].sum() - probs[:, 1, :].sum())


def all_expect_z(state: QuantumState) -> np.ndarray:
    return np.array([expect_z(state, q) for q in range(state.n_qubits)])


def run_circuit(x: Sequence[float], gates: Sequence[Gate]) -> np.ndarray:
    """angle_encode, apply the gate list in order, read out every <Z_i>."""
    state = angle_encode(x)
    for g in gates:
        apply_gate(state, g)
    return all_expect_z(state)


def param_shift_grad(x: Sequence[float], gates: Sequence[Gate], k: int, qubit: int) -> float:
    """Exact rotation-angle gradient via the +-pi/2 shift rule."""
    gates = list(gates)
    if not 0 <= k < len(gates):
        raise InvalidInputError(f"gate index {k} out of range")
    g = gates[k]
    if not g.is_rotation():
        raise NotDifferentiableError(f"gate {k} ({g.kind}) carries no angle parameter")
    plus = list(gates)
    minus = list(gates)
    plus[k] = g.with_angle(g.angle + np.pi / 2)
    minus[k] = g.with_angle(g.angle - np.pi / 2)
    e_plus = run_circuit(x, plus)[qubit]
    e_minus = run_circuit(x, minus)[qubit]
    return float((e_plus - e_minus) / 2.0)


def depolarize(value_or_state, cfg: NoiseConfig, rng: Optional[np.random.Generator] = None):
    """Depolarizing channel.

    Exact mode damps traceless-observable expectations by (1 - epsilon).
    Trajectory mode replaces the state with a uniformly random computational
    basis state with probability epsilon per invocation.
    """
    if cfg.mode == "exact":
        if isinstance(value_or_state, QuantumState):
            raise InvalidInputError("exact damping applies to expectation values, not states")
        return (1.0 - cfg.epsilon) * np.asarray(value_or_state, dtype=np.float64) \
            if np.ndim(value_or_state) else float((1.0 - cfg.epsilon) * value_or_state)
    if not isinstance(value_or_state, QuantumState):
        raise InvalidInputError("trajectory mode applies to QuantumState inputs")
    if rng is None:
        raise InvalidInputError("trajectory mode requires a seeded generator")
    state = value_or_state
    if rng.random() < cfg.epsilon:
        basis = rng.integers(0, state.amplitudes.size)
        state.amplitudes[:] = 0.0
        state.amplitudes[basis] = 1.0
    return state
