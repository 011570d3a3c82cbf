import numpy as np
import pytest

from aqcf import adaptive_circuit as ac, autograd as ag, qsim
from aqcf.autograd import Tensor
from aqcf.errors import InvalidInputError

import oracles


def make_params(d=8, n_q=3, l_max=4, p_dropout=0.1, seed=0):
    return ac.AdaptiveCircuitParams(d, n_q, l_max, p_dropout,
                                    rng=np.random.default_rng(seed))


class TestDepthFormula:
    def test_exhaustive_closed_form(self):
        for l_max in (1, 2, 10, 20):
            for f in np.arange(0.0, 1.0001, 0.05):
                depth = ac.depth_from_fraction(float(f), l_max)
                closed = min(max(1 + int(np.floor(f * (l_max - 1))), 1), l_max)
                assert depth == closed
                assert 1 <= depth <= l_max

    def test_fraction_one_saturates(self):
        assert ac.depth_from_fraction(1.0, 20) == 20

    def test_predict_depth_respects_cap(self):
        params = make_params(l_max=6)
        rng = np.random.default_rng(1)
        for _ in range(10):
            depth = ac.predict_depth(rng.normal(size=3), params, max_depth=2)
            assert 1 <= depth <= 2


class TestGateSelection:
    def test_infer_is_argmax(self):
        params = make_params()
        axes = ac.select_gates(params, 3, "infer")
        np.testing.assert_array_equal(axes, np.argmax(params.gate_logits.data[:3], axis=-1))

    def test_train_sampling_frequencies(self):
        params = make_params(n_q=1, l_max=1)
        params.gate_logits.data[:] = 0.0  # uniform over the three axes
        rng = np.random.default_rng(0)
        counts = np.zeros(3)
        n = 30000
        for _ in range(n):
            counts[ac.select_gates(params, 1, "train", rng)[0, 0]] += 1
        np.testing.assert_allclose(counts / n, [1 / 3] * 3, atol=0.01)

    def test_bad_mode(self):
        with pytest.raises(InvalidInputError):
            ac.select_gates(make_params(), 1, "evaluate")


class TestDropout:
    def test_infer_keeps_everything(self):
        mask = ac.sample_dropout_mask(4, 3, 0.5, "infer")
        assert mask.all()

    def test_train_keep_fraction(self):
        rng = np.random.default_rng(0)
        mask = ac.sample_dropout_mask(1000, 100, 0.1, "train", rng)
        assert mask.mean() == pytest.approx(0.9, abs=0.005)


class TestEntanglement:
    def test_infer_thresholds_at_half(self):
        params = make_params(n_q=4)
        params.entangle_logits.data[0] = np.array([2.0, -2.0, 0.0])
        assert ac.entanglement_layer(0, params, "infer") == [0, 2]  # sigmoid(0) = 0.5 kept

    def test_single_qubit_no_edges(self):
        params = make_params(n_q=1)
        assert ac.entanglement_layer(0, params, "infer") == []


class TestForward:
    def test_infer_matches_dense_oracle(self):
        # fixed seed 7, n_q=3, d=8: realized circuit re-run on the dense oracle
        params = make_params(seed=7)
        rng = np.random.default_rng(7)
        x = rng.normal(size=8)
        out, config, frac = ac.forward(Tensor(x), params, mode="infer")

        x_q = params.projection.data @ x
        gates = []
        for l in range(config.depth):
            for i in range(3):
                if config.dropout_mask[l, i]:
                    kind = ac.GATE_AXES[config.gate_axes[l, i]]
                    gates.append(qsim.Gate(kind, i,
                                           angle=params.rotation_angles.data[l, i]))
            for i in config.entangle_edges[l]:
                gates.append(qsim.Gate("CNOT", i + 1, control=i))
        want = oracles.dense_run(x_q, gates)
        np.testing.assert_allclose(out.data, want, atol=1e-10)
        assert 0.0 < float(frac.data) < 1.0

    def test_infer_deterministic(self):
        params = make_params()
        x = Tensor(np.arange(8.0) / 8.0)
        a = ac.forward(x, params, mode="infer")[0].data
        b = ac.forward(x, params, mode="infer")[0].data
        np.testing.assert_array_equal(a, b)

    def test_train_mode_gradients_flow_to_all_params(self):
        params = make_params(p_dropout=0.0)
        rng = np.random.default_rng(0)
        out, _, frac = ac.forward(Tensor(rng.normal(size=8), requires_grad=True),
                                  params, mode="train", rng=rng)
        (ag.total(ag.square(out)) + frac).backward()
        for name, p in params.parameters().items():
            assert p.grad is not None, name
            assert np.isfinite(p.grad).all(), name

    def test_gradient_check_infer_path(self):
        params = make_params(l_max=2)

        def f(x):
            out, _, _ = ac.forward(x, params, mode="infer")
            return ag.total(ag.square(out))

        rng = np.random.default_rng(4)
        report = ag.grad_check(f, rng.normal(size=8))
        assert report.passed, repr(report)

    def test_exact_noise_damps_output(self):
        params = make_params()
        x = Tensor(np.arange(8.0) / 8.0)
        clean = ac.forward(x, params, mode="infer")[0].data
        noisy = ac.forward(x, params, mode="infer",
                           noise=qsim.NoiseConfig(epsilon=0.25))[0].data
        np.testing.assert_allclose(noisy, 0.75 * clean, atol=1e-12)

    def test_wrong_input_shape(self):
        with pytest.raises(InvalidInputError):
            ac.forward(Tensor(np.zeros(5)), make_params(d=8), mode="infer")
