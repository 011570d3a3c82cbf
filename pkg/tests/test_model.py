import numpy as np
import pytest

from aqcf import autograd as ag
from aqcf.errors import ConfigError, InvalidInputError
from aqcf.model import AqcfModel, ModelConfig, StageFlags

import oracles


def micro_config(**overrides):
    base = dict(vocab_size=12, d_model=8, n_heads=2, n_layers=1, n_q=3,
                l_max=3, max_seq_len=6, m_slots=2, dropout=0.1, num_classes=2)
    base.update(overrides)
    return ModelConfig(**base)


class TestModelConfig:
    def test_head_divisibility(self):
        with pytest.raises(ConfigError):
            micro_config(n_heads=3)

    def test_qubit_range(self):
        with pytest.raises(ConfigError):
            micro_config(n_q=0)
        with pytest.raises(ConfigError):
            micro_config(n_q=25)

    def test_vocab_minimum(self):
        with pytest.raises(ConfigError):
            micro_config(vocab_size=1)


class TestParameters:
    def test_groups_partition_all_parameters(self):
        model = AqcfModel(micro_config(), seed=0)
        groups = model.parameter_groups()
        names = [n for g in groups.values() for n in g]
        assert len(names) == len(set(names))  # disjoint
        assert set(names) == set(model.parameters())

    def test_memory_and_circuit_are_quantum_group(self):
        groups = AqcfModel(micro_config(), seed=0).parameter_groups()
        assert any(".memory" in n for n in groups["quantum"])
        assert any("adaptive" in n for n in groups["quantum"])
        assert "embedding" in groups["classical"]
        assert any("fusion" in n for n in groups["fusion"])

    def test_reference_scale_parameter_count(self):
        # full-size configuration at a 30k vocabulary: order 4e6 parameters
        cfg = ModelConfig(vocab_size=30000, d_model=128, n_heads=4, n_layers=2,
                          n_q=8, l_max=20, max_seq_len=64, m_slots=16)
        count = AqcfModel(cfg, seed=0).count_parameters()
        assert 2_000_000 <= count <= 6_000_000
        assert count == 4_295_789  # pinned from the first verified run


class TestForward:
    def test_logits_shape_and_determinism(self):
        model = AqcfModel(micro_config(), seed=1)
        tokens = np.array([2, 5, 7])
        a, trace = model.forward(tokens)
        b, _ = model.forward(tokens)
        assert a.data.shape == (2,)
        np.testing.assert_array_equal(a.data, b.data)
        assert 0.0 < trace.lam < 1.0
        assert len(trace.depths) == 3
        assert all(1 <= d <= 3 for d in trace.depths)

    def test_stage1_bypasses_quantum(self):
        model = AqcfModel(micro_config(), seed=1)
        stage = StageFlags(stage=1, quantum_enabled=False, lambda_override=0.0,
                           trainable_groups=("classical",))
        logits, trace = model.forward(np.array([2, 3]), stage=stage)
        assert trace.lam == 0.0
        assert trace.depths == []
        assert trace.quantum_outputs is None
        assert np.isfinite(logits.data).all()

    def test_lambda_override(self):
        model = AqcfModel(micro_config(), seed=1)
        _, trace = model.forward(np.array([2, 3]),
                                 stage=StageFlags(lambda_override=0.5))
        assert trace.lam == 0.5

    def test_max_depth_cap(self):
        model = AqcfModel(micro_config(l_max=5), seed=2)
        _, trace = model.forward(np.array([2, 3, 4]),
                                 stage=StageFlags(max_depth=1))
        assert all(d == 1 for d in trace.depths)

    def test_position_encoding_active(self):
        model = AqcfModel(micro_config(), seed=3)
        # the classifier head starts at zero; give it weight so logits can move
        model.cls_w.data = np.random.default_rng(0).normal(size=model.cls_w.data.shape)
        a, _ = model.forward(np.array([2, 5, 7]))
        b, _ = model.forward(np.array([7, 5, 2]))
        assert not np.allclose(a.data, b.data)

    def test_token_validation(self):
        model = AqcfModel(micro_config(), seed=0)
        with pytest.raises(InvalidInputError):
            model.forward(np.array([], dtype=np.int64))
        with pytest.raises(InvalidInputError):
            model.forward(np.array([99]))

    def test_overlong_truncation_toggle(self):
        long_ids = np.arange(8) % 5 + 2
        model = AqcfModel(micro_config(), seed=0)
        logits, _ = model.forward(long_ids)  # truncates to max_seq_len=6
        assert logits.data.shape == (2,)
        strict = AqcfModel(micro_config(truncate_overlong=False), seed=0)
        with pytest.raises(InvalidInputError):
            strict.forward(long_ids)

    def test_predict_returns_class_index(self):
        model = AqcfModel(micro_config(), seed=0)
        assert model.predict(np.array([2, 3])) in (0, 1)

    def test_train_mode_records_memory_updates(self):
        model = AqcfModel(micro_config(), seed=4)
        rng = np.random.default_rng(0)
        model.forward(np.array([2, 3]), mode="train", rng=rng)
        assert any(block.memory._pending_updates for block in model.blocks)
        before = model.blocks[0].memory.banks[0].keys.data.copy()
        model.apply_memory_updates()
        assert not all(np.array_equal(before, b.keys.data)
                       for b in model.blocks[0].memory.banks) \
            or not np.array_equal(before, model.blocks[0].memory.banks[0].keys.data)


class TestGradients:
    def test_loss_grad_vs_fd_selected_parameters(self):
        """Micro full model: reverse-mode grads match finite differences."""
        model = AqcfModel(micro_config(), seed=5)
        tokens = np.array([2, 5, 3])
        label = 1
        params = model.parameters()
        probes = {
            "up_proj": (0, 1),
            "cls_w": (2, 0),
            "adaptive.rotation_angles": (0, 1),
            "fusion.out_w": (1, 2),
            "complexity.syntactic_w": (2,),
            "block0.memory.head0.keys": (0, 1),
        }
        for p in params.values():
            p.zero_grad()
        logits, _ = model.forward(tokens, mode="infer")
        ag.cross_entropy_with_logits(logits, label).backward()

        for name, idx in probes.items():
            p = params[name]
            assert p.grad is not None, name
            h = 1e-6
            orig = p.data[idx]
            p.data[idx] = orig + h
            lp, _ = model.forward(tokens, mode="infer")
            fp = ag.cross_entropy_with_logits(lp, label).item()
            p.data[idx] = orig - h
            lm, _ = model.forward(tokens, mode="infer")
            fm = ag.cross_entropy_with_logits(lm, label).item()
            p.data[idx] = orig
            fd = (fp - fm) / (2 * h)
            ad = p.grad[idx]
            rel = abs(ad - fd) / max(1.0, abs(ad), abs(fd))
            assert rel < 1e-5, f"{name}: autodiff {ad} vs fd {fd}"
