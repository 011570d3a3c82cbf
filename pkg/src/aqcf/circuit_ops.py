"""Differentiable quantum circuit evaluation.

Circuits are described as flat instruction lists over an angle vector (and an
optional discrete-choice weight vector) so that a single custom autograd node
covers encoding, adaptive layers, and similarity circuits.  The backward pass
walks the circuit in reverse (adjoint style): it undoes each gate, pairs the
intermediate state with a back-propagated observable vector, and reads off
exact angle gradients in one sweep instead of two shifted evaluations per
parameter.  Parameter-shift (qsim.param_shift_grad) remains the independent
cross-check in the tests.

Discrete choices (selected rotation axis, included entanglement edge) enter
through hard 0/1 weights whose gradients are defined by treating the applied
layer as a linear mix of the candidate unitaries; combined with the
straight-through estimator in autograd this gives selection logits a live
gradient while the forward pass stays exactly unitary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from . import qsim
from .autograd import Tensor, custom_node
from .errors import DimensionError


@dataclass
class RotInstr:
    qubit: int
    axis: str  # RX | RY | RZ
    angle_idx: int


@dataclass
class MixRotInstr:
    """Rotation whose axis was discretely selected.

    `weight_idx` points at three consecutive slots (RX, RY, RZ) in the weight
    vector; forward values must be a hard one-hot.
    """

    qubit: int
    angle_idx: int
    weight_idx: int


@dataclass
class CnotInstr:
    control: int
    target: int


@dataclass
class StCnotInstr:
    """CNOT gated by a hard 0/1 inclusion weight."""

    control: int
    target: int
    weight_idx: int


Instr = Union[RotInstr, MixRotInstr, CnotInstr, StCnotInstr]

_AXES = ("RX", "RY", "RZ")


def _mixrot_axis(weights: np.ndarray, idx: int) -> str:
    return _AXES[int(np.argmax(weights[idx:idx + 3]))]


def _applied_gate(instr: Instr, angles: np.ndarray, weights: Optional[np.ndarray]):
    """Resolve an instruction to (kind, qubit(s), angle) for the forward pass."""
    if isinstance(instr, RotInstr):
        return instr.axis, instr.qubit, angles[instr.angle_idx]
    if isinstance(instr, MixRotInstr):
        return _mixrot_axis(weights, instr.weight_idx), instr.qubit, angles[instr.angle_idx]
    raise TypeError(instr)


def run_instructions(n: int, instrs: Sequence[Instr], angles: np.ndarray,
                     weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Execute the instruction list on |0...0>, returning the final amplitudes."""
    psi = qsim.zero_state(n).amplitudes
    for instr in instrs:
        if isinstance(instr, CnotInstr):
            qsim.apply_cnot(psi, instr.control, instr.target, n)
        elif isinstance(instr, StCnotInstr):
            if weights[instr.weight_idx] >= 0.5:
                qsim.apply_cnot(psi, instr.control, instr.target, n)
        else:
            kind, qubit, theta = _applied_gate(instr, angles, weights)
            qsim.apply_1q(psi, qsim.rotation_matrix(kind, theta), qubit, n)
    return psi


def _z_diagonal(n: int, upstream: np.ndarray) -> np.ndarray:
    """Diagonal of sum_q upstream[q] * Z_q in the computational basis."""
    basis = np.arange(2 ** n)
    diag = np.zeros(2 ** n)
    for q in range(n):
        if upstream[q] != 0.0:
            diag += upstream[q] * (1.0 - 2.0 * ((basis >> q) & 1))
    return diag


def _adjoint_grads(n: int, instrs: Sequence[Instr], angles: np.ndarray,
                   weights: Optional[np.ndarray], psi_final: np.ndarray,
                   upstream: np.ndarray):
    """Exact gradients of sum_q upstream[q] * <Z_q> wrt angles and weights."""
    grad_a = np.zeros_like(angles)
    grad_w = np.zeros_like(weights) if weights is not None else None
    b = _z_diagonal(n, upstream) * psi_final
    psi = psi_final.copy()
    for instr in reversed(instrs):
        if isinstance(instr, CnotInstr):
            qsim.apply_cnot(psi, instr.control, instr.target, n)
            qsim.apply_cnot(b, instr.control, instr.target, n)
            continue
        if isinstance(instr, StCnotInstr):
            included = weights[instr.weight_idx] >= 0.5
            if included:
                qsim.apply_cnot(psi, instr.control, instr.target, n)
            # d(applied)/d(weight) = CNOT - I regardless of the hard value;
            # b must still sit on the post-gate side when it is paired with psi
            tmp = psi.copy()
            qsim.apply_cnot(tmp, instr.control, instr.target, n)
            grad_w[instr.weight_idx] += 2.0 * np.real(np.vdot(b, tmp - psi))
            if included:
                qsim.apply_cnot(b, instr.control, instr.target, n)
            continue
        kind, qubit, theta = _applied_gate(instr, angles, weights)
        inv = qsim.rotation_matrix(kind, -theta)
        qsim.apply_1q(psi, inv, qubit, n)  # psi is now the pre-gate state
        tmp = psi.copy()
        qsim.apply_1q(tmp, qsim.rotation_matrix_deriv(kind, theta), qubit, n)
        grad_a[instr.angle_idx] += 2.0 * np.real(np.vdot(b, tmp))
        if isinstance(instr, MixRotInstr):
            for a, axis in enumerate(_AXES):
                tmp = psi.copy()
                qsim.apply_1q(tmp, qsim.rotation_matrix(axis, theta), qubit, n)
                grad_w[instr.weight_idx + a] += 2.0 * np.real(np.vdot(b, tmp))
        qsim.apply_1q(b, inv, qubit, n)
    return grad_a, grad_w


def circuit_expectations(n: int, instrs: Sequence[Instr], angles: Tensor,
                         weights: Optional[Tensor] = None) -> Tensor:
    """All-qubit <Z> expectations of the circuit, as one differentiable node."""
    w_data = weights.data if weights is not None else None
    psi = run_instructions(n, instrs, angles.data, w_data)
    probs = np.abs(psi) ** 2
    basis = np.arange(2 ** n)
    expectations = np.array([
        probs @ (1.0 - 2.0 * ((basis >> q) & 1)) for q in range(n)
    ])

    parents: List[Tensor] = [angles] + ([weights] if weights is not None else [])

    def backward(out):
        grad_a, grad_w = _adjoint_grads(n, instrs, angles.data, w_data, psi, out.grad)
        if angles.requires_grad:
            angles._accumulate(grad_a)
        if weights is not None and weights.requires_grad:
            weights._accumulate(grad_w)

    return custom_node(expectations, parents, backward)


# -- interference similarity circuit ------------------------------------


def _similarity_forward(qa: np.ndarray, ka: np.ndarray) -> np.ndarray:
    """Batched statevector for the interference similarity circuit.

    Query rotations RY(qa_i), key counter-rotations RY(-ka_i), then a CNOT
    chain folding the joint parity onto qubit 0.  qa, ka: (B, n_q) angles
    (already arctan-compressed).  Returns (B, 2^n) final amplitudes.
    """
    b_sz, n = qa.shape
    psi = np.zeros((b_sz, 2 ** n), dtype=np.complex128)
    psi[:, 0] = 1.0
    for i in range(n):
        qsim.apply_1q(psi, qsim.rotation_matrix("RY", qa[:, i]), i, n)
    for i in range(n):
        qsim.apply_1q(psi, qsim.rotation_matrix("RY", -ka[:, i]), i, n)
    for i in range(n - 1, 0, -1):
        qsim.apply_cnot(psi, i, i - 1, n)
    return psi


def _similarity_adjoint(qa: np.ndarray, ka: np.ndarray, psi_final: np.ndarray,
                        upstream: np.ndarray):
    """Batched adjoint gradients of upstream[b] * <Z_0>_b wrt qa and ka."""
    b_sz, n = qa.shape
    basis = np.arange(2 ** n)
    z0 = 1.0 - 2.0 * (basis & 1)
    b = upstream[:, None] * z0[None, :] * psi_final
    psi = psi_final.copy()
    grad_q = np.zeros_like(qa)
    grad_k = np.zeros_like(ka)

    def undo_rot(angle_col, grad_out, i):
        inv = qsim.rotation_matrix("RY", -angle_col)
        qsim.apply_1q(psi, inv, i, n)
        tmp = psi.copy()
        qsim.apply_1q(tmp, qsim.rotation_matrix_deriv("RY", angle_col), i, n)
        grad_out[:] = 2.0 * np.real(np.sum(np.conj(b) * tmp, axis=1))
        qsim.apply_1q(b, inv, i, n)

    for i in range(1, n):
        qsim.apply_cnot(psi, i, i - 1, n)
        qsim.apply_cnot(b, i, i - 1, n)
    neg_grad = np.empty(b_sz)
    for i in range(n - 1, -1, -1):
        undo_rot(-ka[:, i], neg_grad, i)
        grad_k[:, i] = -neg_grad
    for i in range(n - 1, -1, -1):
        undo_rot(qa[:, i], grad_q[:, i], i)
    return grad_q, grad_k


def pairwise_similarity(queries: Tensor, keys: Tensor) -> Tensor:
    """Interference-based similarity readout <Z_0> for each (query, key) pair.

    queries, keys: (B, n_q) tensors of raw (pre-arctan) components.  Returns
    a (B,) tensor in [-1, 1]; equals prod_i cos(arctan q_i - arctan k_i), so
    it peaks at exactly 1 when query and key coincide.
    """
    if queries.shape != keys.shape:
        raise DimensionError("query/key batches must have equal shape",
                             queries.shape, keys.shape)
    qa = np.arctan(queries.data)
    ka = np.arctan(keys.data)
    psi = _similarity_forward(qa, ka)
    z0 = 1.0 - 2.0 * (np.arange(psi.shape[1]) & 1)
    sims = (np.abs(psi) ** 2) @ z0

    def backward(out):
        grad_qa, grad_ka = _similarity_adjoint(qa, ka, psi, out.grad)
        if queries.requires_grad:
            queries._accumulate(grad_qa / (1.0 + queries.data ** 2))
        if keys.requires_grad:
            keys._accumulate(grad_ka / (1.0 + keys.data ** 2))

    return custom_node(sims, [queries, keys], backward)
