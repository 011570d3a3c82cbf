import numpy as np
import pytest

from aqcf import qsim
from aqcf.errors import CapacityError, InvalidInputError, NotDifferentiableError

import oracles


def random_circuit(rng, n, depth):
    gates = []
    for _ in range(depth):
        for q in range(n):
            kind = ("RX", "RY", "RZ")[rng.integers(3)]
            gates.append(qsim.Gate(kind, q, angle=rng.uniform(-np.pi, np.pi)))
        if n > 1:
            c = int(rng.integers(n))
            t = int((c + 1 + rng.integers(n - 1)) % n)
            gates.append(qsim.Gate("CNOT", t, control=c))
    return gates


class TestZeroState:
    def test_basis_zero(self):
        s = qsim.zero_state(3)
        assert s.amplitudes[0] == 1.0
        assert s.norm_sq() == pytest.approx(1.0, abs=1e-15)

    def test_capacity_cap(self):
        with pytest.raises(CapacityError):
            qsim.zero_state(qsim.MAX_QUBITS + 1)
        with pytest.raises(CapacityError):
            qsim.zero_state(0)


class TestRotationMatrices:
    def test_matches_oracle(self):
        rng = np.random.default_rng(1)
        for kind in ("RX", "RY", "RZ"):
            theta = rng.uniform(-np.pi, np.pi)
            np.testing.assert_allclose(qsim.rotation_matrix(kind, theta),
                                       oracles.rotation_2x2(kind, theta), atol=1e-14)

    def test_deriv_is_fd_of_matrix(self):
        h = 1e-6
        for kind in ("RX", "RY", "RZ"):
            theta = 0.83
            fd = (qsim.rotation_matrix(kind, theta + h)
                  - qsim.rotation_matrix(kind, theta - h)) / (2 * h)
            np.testing.assert_allclose(qsim.rotation_matrix_deriv(kind, theta), fd, atol=1e-9)

    def test_unitary(self):
        m = qsim.rotation_matrix("RX", 0.4)
        np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-14)


class TestOracleEquivalence:
    def test_seed42_depth2_circuit(self):
        rng = np.random.default_rng(42)
        x = rng.normal(size=3)
        gates = random_circuit(rng, 3, 2)
        np.testing.assert_allclose(qsim.run_circuit(x, gates),
                                   oracles.dense_run(x, gates), atol=1e-10)

    def test_hundred_random_circuits(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            x = rng.normal(size=n)
            gates = random_circuit(rng, n, int(rng.integers(1, 5)))
            np.testing.assert_allclose(qsim.run_circuit(x, gates),
                                       oracles.dense_run(x, gates), atol=1e-10)

    def test_oracle_refuses_four_qubits(self):
        with pytest.raises(ValueError):
            oracles.dense_run(np.zeros(4), [])


class TestNormPreservation:
    def test_norm_after_every_gate(self):
        rng = np.random.default_rng(3)
        state = qsim.angle_encode(rng.normal(size=3))
        for g in random_circuit(rng, 3, 10):
            qsim.apply_gate(state, g)
            assert abs(state.norm_sq() - 1.0) < 1e-10


class TestAngleEncode:
    def test_z_is_cos_arctan(self):
        x = np.array([0.3, -1.2, 2.0])
        state = qsim.angle_encode(x)
        np.testing.assert_allclose(qsim.all_expect_z(state), np.cos(np.arctan(x)), atol=1e-12)

    def test_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            qsim.angle_encode([np.nan, 0.0])

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            qsim.angle_encode([])


class TestExpectZ:
    def test_zero_state_all_plus_one(self):
        np.testing.assert_allclose(qsim.all_expect_z(qsim.zero_state(2)), [1.0, 1.0])

    def test_flipped_qubit(self):
        state = qsim.zero_state(2)
        qsim.apply_gate(state, qsim.Gate("RX", 0, angle=np.pi))
        np.testing.assert_allclose(qsim.all_expect_z(state), [-1.0, 1.0], atol=1e-12)


class TestCnot:
    def test_requires_control(self):
        with pytest.raises(InvalidInputError):
            qsim.apply_gate(qsim.zero_state(2), qsim.Gate("CNOT", 0))

    def test_control_equals_target(self):
        with pytest.raises(InvalidInputError):
            qsim.apply_gate(qsim.zero_state(2), qsim.Gate("CNOT", 1, control=1))

    def test_bell_state(self):
        state = qsim.zero_state(2)
        qsim.apply_gate(state, qsim.Gate("RY", 0, angle=np.pi / 2))
        qsim.apply_gate(state, qsim.Gate("CNOT", 1, control=0))
        probs = np.abs(state.amplitudes) ** 2
        np.testing.assert_allclose(probs, [0.5, 0.0, 0.0, 0.5], atol=1e-12)


class TestParamShift:
    def test_two_qubit_example_vs_fd(self):
        # RY(0.3) x RY(0.7) then CNOT; d<Z_1>/d theta_0
        x = np.zeros(2)
        gates = [qsim.Gate("RY", 0, angle=0.3), qsim.Gate("RY", 1, angle=0.7),
                 qsim.Gate("CNOT", 1, control=0)]
        got = qsim.param_shift_grad(x, gates, 0, 1)

        def f(theta):
            shifted = [gates[0].with_angle(theta[0])] + gates[1:]
            return qsim.run_circuit(x, shifted)[1]

        fd = oracles.fd_gradient(f, np.array([0.3]), h=1e-5)[0]
        assert got == pytest.approx(fd, abs=1e-6)

    def test_cnot_not_differentiable(self):
        gates = [qsim.Gate("CNOT", 1, control=0)]
        with pytest.raises(NotDifferentiableError):
            qsim.param_shift_grad(np.zeros(2), gates, 0, 0)


class TestDepolarize:
    def test_exact_damping(self):
        cfg = qsim.NoiseConfig(epsilon=0.2, mode="exact")
        assert qsim.depolarize(0.8, cfg) == pytest.approx(0.8 * 0.8, abs=1e-15)
        np.testing.assert_allclose(qsim.depolarize(np.array([1.0, -0.5]), cfg),
                                   [0.8, -0.4], atol=1e-15)

    def test_trajectory_mean(self):
        # ensemble mean over trajectories approaches (1-eps)<Z> + eps*0
        cfg = qsim.NoiseConfig(epsilon=0.2, mode="trajectory")
        rng = np.random.default_rng(11)
        theta = 0.9
        clean = np.cos(theta)
        trials = 20000
        total = 0.0
        for _ in range(trials):
            state = qsim.zero_state(1)
            qsim.apply_gate(state, qsim.Gate("RY", 0, angle=theta))
            qsim.depolarize(state, cfg, rng)
            total += qsim.expect_z(state, 0)
        mean = total / trials
        se = np.sqrt(cfg.epsilon * (1 - cfg.epsilon) * (clean ** 2 + 1) / trials) + 1e-3
        assert abs(mean - (1 - cfg.epsilon) * clean) < 4 * se

    def test_epsilon_range(self):
        with pytest.raises(InvalidInputError):
            qsim.NoiseConfig(epsilon=1.5)

    def test_trajectory_needs_rng(self):
        cfg = qsim.NoiseConfig(epsilon=0.5, mode="trajectory")
        with pytest.raises(InvalidInputError):
            qsim.depolarize(qsim.zero_state(1), cfg)
