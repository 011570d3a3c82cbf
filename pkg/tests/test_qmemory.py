import numpy as np
import pytest

from aqcf import autograd as ag, qmemory as qm
from aqcf.autograd import Tensor
from aqcf.errors import ConfigError, DimensionError, InvalidInputError


def make_bank(m=4, n_q=3, d_v=5, gamma=0.1, seed=0):
    return qm.MemoryBank(m, n_q, d_v, gamma, rng=np.random.default_rng(seed))


class TestQuantumSimilarity:
    def test_zero_vectors_give_one(self):
        assert qm.quantum_similarity(np.zeros(3), np.zeros(3)) == pytest.approx(1.0, abs=1e-12)

    def test_closed_form(self):
        rng = np.random.default_rng(1)
        q, k = rng.normal(size=4), rng.normal(size=4)
        want = float(np.prod(np.cos(np.arctan(q) - np.arctan(k))))
        assert qm.quantum_similarity(q, k) == pytest.approx(want, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            qm.quantum_similarity(np.zeros(2), np.zeros(3))


class TestRetrieval:
    def test_sigmoid_reduction_example(self):
        # M=2, similarities (1, -1), n_q=4: alpha_1 = sigma(2/sqrt(4)) = sigma(1)
        alpha = qm.retrieval_weights(Tensor(np.array([1.0, -1.0])), 4).data
        sigma1 = 1.0 / (1.0 + np.exp(-1.0))
        assert alpha[0] == pytest.approx(sigma1, abs=1e-10)
        assert alpha[0] == pytest.approx(0.7310585786300049, abs=1e-10)

    def test_identical_keys_uniform(self):
        bank = make_bank()
        bank.keys.data[:] = bank.keys.data[0]
        out = qm.retrieve(np.array([0.5, -1.0, 0.2]), bank)
        np.testing.assert_allclose(out.weights, np.full(4, 0.25), atol=1e-12)
        np.testing.assert_allclose(out.retrieved, bank.values.data.mean(axis=0), atol=1e-12)

    def test_single_slot(self):
        bank = make_bank(m=1)
        out = qm.retrieve(np.zeros(3), bank)
        np.testing.assert_allclose(out.weights, [1.0])
        np.testing.assert_allclose(out.retrieved, bank.values.data[0])

    def test_simplex_convexity_locality_fuzz(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            bank = make_bank(m=int(rng.integers(1, 6)), seed=int(rng.integers(1 << 30)))
            q = rng.normal(size=3) * rng.uniform(0.1, 5.0)
            out = qm.retrieve(q, bank)
            # simplex
            assert out.weights.sum() == pytest.approx(1.0, abs=1e-10)
            assert np.all(out.weights >= 0.0)
            # convexity: retrieval inside the per-coordinate value hull
            lo = bank.values.data.min(axis=0) - 1e-12
            hi = bank.values.data.max(axis=0) + 1e-12
            assert np.all(out.retrieved >= lo) and np.all(out.retrieved <= hi)
            # locality: update touches exactly one slot
            before_k = bank.keys.data.copy()
            before_v = bank.values.data.copy()
            qm.update(bank, rng.normal(size=3), rng.normal(size=5))
            changed = np.any(bank.keys.data != before_k, axis=1) \
                | np.any(bank.values.data != before_v, axis=1)
            assert changed.sum() <= 1

    def test_retrieval_gradients(self):
        bank = make_bank()

        def f(q):
            _, r = qm.retrieve_t(q, bank)
            return ag.total(ag.square(r))

        report = ag.grad_check(f, np.array([0.3, -0.8, 1.2]))
        assert report.passed, repr(report)


class TestUpdate:
    def test_gamma_one_replaces(self):
        bank = make_bank(gamma=1.0)
        new_k, new_v = np.ones(3), np.full(5, 7.0)
        qm.update(bank, new_k, new_v)
        star = int(np.argmax([qm.quantum_similarity(new_k, k) for k in
                              np.vstack([np.ones(3) * 0 + bank.keys.data])]))
        np.testing.assert_allclose(bank.keys.data[star], new_k)
        np.testing.assert_allclose(bank.values.data[star], new_v)

    def test_linear_rule_from_zero_key(self):
        bank = make_bank(gamma=0.1)
        bank.keys.data[2] = 0.0
        u = np.array([1.0, -2.0, 0.5])
        # force slot 2 to win by making it identical to the new key first
        bank.keys.data[2] = u
        bank.keys.data[[0, 1, 3]] += 10.0
        vals_before = bank.values.data[2].copy()
        qm.update(bank, u, np.zeros(5))
        np.testing.assert_allclose(bank.keys.data[2], u, atol=1e-12)
        np.testing.assert_allclose(bank.values.data[2], 0.9 * vals_before, atol=1e-12)

    def test_matching_key_wins(self):
        bank = make_bank(m=5, seed=3)
        target = bank.keys.data[3].copy()
        bank.keys.data[[0, 1, 2, 4]] = bank.keys.data[[0, 1, 2, 4]] * 0.2 + 8.0
        before = bank.keys.data.copy()
        qm.update(bank, target, np.zeros(5))
        changed = np.flatnonzero(np.any(bank.keys.data != before, axis=1))
        # slot 3 matches exactly (similarity 1, the global maximum)
        assert list(changed) == [3]

    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            qm.update(make_bank(), np.zeros(2), np.zeros(5))

    def test_gamma_range(self):
        with pytest.raises(InvalidInputError):
            make_bank(gamma=0.0)


class TestMultiHeadMemory:
    def test_head_divisibility(self):
        with pytest.raises(ConfigError):
            qm.MultiHeadMemory(10, 3, 2, 4)

    def test_forward_matches_straight_line(self):
        d, n_heads, n_q, m = 8, 2, 2, 3
        mem = qm.MultiHeadMemory(d, n_heads, n_q, m, rng=np.random.default_rng(5))
        rng = np.random.default_rng(6)
        x = rng.normal(size=d)
        got = mem.forward(Tensor(x)).data

        # straight-line recomputation from retrieve()
        outputs = []
        for h in range(n_heads):
            xh = x[h * 4:(h + 1) * 4]
            q = xh @ mem.query_proj[h].data
            outputs.append(qm.retrieve(q, mem.banks[h]).retrieved)
        o = np.concatenate(outputs)
        g = 1.0 / (1.0 + np.exp(-(np.concatenate([x, o]) @ mem.gate_w.data
                                  + mem.gate_b.data)))
        want = g * o + (1.0 - g) * x
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_token_matrix_matches_per_token(self):
        mem = qm.MultiHeadMemory(8, 2, 2, 3, rng=np.random.default_rng(7))
        rng = np.random.default_rng(8)
        xm = rng.normal(size=(4, 8))
        batched = mem.forward(Tensor(xm)).data
        for t in range(4):
            np.testing.assert_allclose(batched[t], mem.forward(Tensor(xm[t])).data,
                                       atol=1e-12)

    def test_recorded_updates_only_flush_on_apply(self):
        mem = qm.MultiHeadMemory(8, 2, 2, 3, rng=np.random.default_rng(9))
        rng = np.random.default_rng(10)
        before = [b.keys.data.copy() for b in mem.banks]
        mem.forward(Tensor(rng.normal(size=(3, 8))), record_updates=True)
        for b, k in zip(mem.banks, before):
            np.testing.assert_array_equal(b.keys.data, k)
        mem.apply_updates()
        assert any(np.any(b.keys.data != k) for b, k in zip(mem.banks, before))
        assert mem._pending_updates == []

    def test_gradients_flow(self):
        mem = qm.MultiHeadMemory(8, 2, 2, 3, rng=np.random.default_rng(11))
        x = Tensor(np.arange(8.0) / 8.0, requires_grad=True)
        ag.total(ag.square(mem.forward(x))).backward()
        assert x.grad is not None and np.isfinite(x.grad).all()
        for name, p in mem.parameters().items():
            assert p.grad is not None, name
