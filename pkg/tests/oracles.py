"""Independent brute-force oracles for the test suite.

Deliberately slow and dumb: full 2^n x 2^n unitaries via explicit Kronecker
products (refused above 3 qubits), plus central finite differences.  Nothing
here imports the strided kernels under test.
"""

import numpy as np

ORACLE_MAX_QUBITS = 3

I2 = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def rotation_2x2(kind, theta):
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]])
    if kind == "RZ":
        return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]])
    raise ValueError(kind)


def _check_size(n):
    if n > ORACLE_MAX_QUBITS:
        raise ValueError(f"dense oracle refuses n={n} > {ORACLE_MAX_QUBITS} qubits")


def lift_1q(u, qubit, n):
    """Embed a 2x2 operator on `qubit` (qubit 0 = least significant bit)."""
    _check_size(n)
    full = np.eye(1, dtype=np.complex128)
    for q in range(n - 1, -1, -1):  # kron builds from the most significant bit down
        full = np.kron(full, u if q == qubit else I2)
    return full


def cnot_matrix(control, target, n):
    """Dense CNOT as an explicit basis-state permutation."""
    _check_size(n)
    dim = 2 ** n
    m = np.zeros((dim, dim), dtype=np.complex128)
    for basis in range(dim):
        out = basis ^ (1 << target) if (basis >> control) & 1 else basis
        m[out, basis] = 1.0
    return m


def gate_matrix(gate, n):
    """Full 2^n unitary of one aqcf.qsim.Gate."""
    if gate.kind == "CNOT":
        return cnot_matrix(gate.control, gate.target, n)
    return lift_1q(rotation_2x2(gate.kind, gate.angle), gate.target, n)


def dense_encode(x):
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    _check_size(n)
    psi = np.zeros(2 ** n, dtype=np.complex128)
    psi[0] = 1.0
    for i, xi in enumerate(x):
        psi = lift_1q(rotation_2x2("RY", np.arctan(xi)), i, n) @ psi
    return psi


def dense_run(x, gates):
    """Angle-encode, multiply out every dense unitary, return all <Z_q>."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    psi = dense_encode(x)
    for g in gates:
        u = gate_matrix(g, n)
        if not np.allclose(u.conj().T @ u, np.eye(2 ** n), atol=1e-10):
            raise ValueError(f"oracle built a non-unitary matrix for {g}")
        psi = u @ psi
    return np.array([dense_expect_z(psi, q, n) for q in range(n)])


def dense_expect_z(psi, qubit, n):
    basis = np.arange(2 ** n)
    signs = 1.0 - 2.0 * ((basis >> qubit) & 1)
    return float((np.abs(psi) ** 2) @ signs)


def fd_gradient(f, x, h=1e-6):
    """Central finite differences of scalar f at x, elementwise."""
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("finite-difference step outside the sane range")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    for k in range(flat.size):
        xp, xm = flat.copy(), flat.copy()
        xp[k] += h
        xm[k] -= h
        grad.reshape(-1)[k] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2 * h)
    return grad
