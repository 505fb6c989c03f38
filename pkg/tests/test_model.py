import numpy as np
import pytest

from conftest import max_rel_error, numeric_grad
from specattn.layers import Conv1d, SegmentedSpectrumAttention, softmax_cross_entropy
from specattn.model import (
    DivergenceError,
    ModelConfig,
    build_ssam_cnn,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
)

TINY = ModelConfig(input_length=12, num_classes=2, num_segments=2, kernel_sizes=(3, 3), channels=(3, 2))


class TestModelConfig:
    def test_invalid_configs_rejected(self):
        with pytest.raises(ValueError):
            ModelConfig(input_length=0, num_classes=2)
        with pytest.raises(ValueError):
            ModelConfig(input_length=10, num_classes=2, num_segments=0)
        with pytest.raises(ValueError):
            ModelConfig(input_length=10, num_classes=2, num_segments=6)
        with pytest.raises(ValueError):
            ModelConfig(input_length=10, num_classes=2, kernel_sizes=(8, 5, 3), channels=(1, 2, 3))

    def test_degenerate_segments_allowed_without_spectral_layer(self):
        ModelConfig(input_length=10, num_classes=2, num_segments=6, with_ssam=False)

    def test_round_trips_through_dict(self):
        cfg = ModelConfig(input_length=64, num_classes=4, num_segments=3, with_ssam=False)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestBuild:
    def test_parameter_count_matches_construction(self):
        net = build_ssam_cnn(ModelConfig(input_length=100, num_classes=3, num_segments=1))
        expected = 100 + (1 * 32 * 8 + 32) + 64 + (32 * 8 * 5 + 8) + 16 + (8 * 3 + 3)
        assert net.num_parameters() == expected
        assert len(net.parameters) == len(set(net.parameters))

    def test_base_cnn_starts_with_single_channel_conv(self):
        net = build_ssam_cnn(ModelConfig(input_length=100, num_classes=3, with_ssam=False))
        first = net.layers[0]
        assert isinstance(first, Conv1d)
        assert first.weight.value.shape == (32, 1, 8)
        assert net.ssam is None
        assert net.masks() == []

    def test_segmented_shapes_propagate(self, rng):
        net = build_ssam_cnn(ModelConfig(input_length=100, num_classes=3, num_segments=4))
        assert isinstance(net.layers[0], SegmentedSpectrumAttention)
        conv1 = net.layers[1]
        assert conv1.weight.value.shape == (32, 4, 8)
        logits = net.forward(rng.normal(size=(2, 1, 100)), train=True)
        assert logits.shape == (2, 3)

    def test_forward_rejects_wrong_length(self, rng):
        net = build_ssam_cnn(TINY)
        with pytest.raises(ValueError, match="expected input"):
            net.forward(rng.normal(size=(2, 1, 13)))


class TestForwardBackward:
    def test_unit_mask_matches_base_cnn_with_shared_weights(self, rng):
        ssam_net = build_ssam_cnn(ModelConfig(input_length=50, num_classes=3, num_segments=1), seed=1)
        base_net = build_ssam_cnn(ModelConfig(input_length=50, num_classes=3, with_ssam=False), seed=2)
        for name, p in base_net.parameters.items():
            p.value[...] = ssam_net.parameters[name].value
        x = rng.normal(size=(6, 1, 50))
        np.testing.assert_allclose(
            ssam_net.forward(x, train=True), base_net.forward(x, train=True), atol=1e-9
        )

    def test_single_instance_loss_is_nll(self, rng):
        net = build_ssam_cnn(TINY, seed=3)
        x = rng.normal(size=(1, 1, 12))
        logits = net.forward(x, train=True)
        loss = net.backward(np.array([1]))
        probs = np.exp(logits[0]) / np.exp(logits[0]).sum()
        assert abs(loss + np.log(probs[1])) < 1e-12

    def test_backward_before_forward_rejected(self):
        net = build_ssam_cnn(TINY)
        with pytest.raises(RuntimeError, match="before forward"):
            net.backward(np.array([0]))

    def test_batch_size_does_not_change_output_shape_rule(self, rng):
        net = build_ssam_cnn(TINY, seed=4)
        for b in (1, 2, 7):
            assert net.forward(rng.normal(size=(b, 1, 12)), train=False).shape == (b, 2)

    def test_grads_finite_after_forward_backward(self, rng):
        net = build_ssam_cnn(TINY, seed=5)
        net.forward(rng.normal(size=(3, 1, 12)), train=True)
        net.backward(np.array([0, 1, 0]))
        for p in net.parameters.values():
            assert np.all(np.isfinite(p.grad)), p.name

    def test_end_to_end_gradients_match_finite_differences(self, rng):
        net = build_ssam_cnn(TINY, seed=6)
        x = rng.normal(size=(3, 1, 12))
        labels = np.array([0, 1, 1])

        def loss():
            return softmax_cross_entropy(net.forward(x, train=True), labels)[0]

        net.zero_grad()
        net.forward(x, train=True)
        net.backward(labels)
        for name, p in net.parameters.items():
            numeric = numeric_grad(loss, p.value)
            assert max_rel_error(p.grad, numeric) < 1e-5, name
        grads = {n: p.grad.copy() for n, p in net.parameters.items()}
        assert any(np.abs(g).max() > 0 for g in grads.values())


class TestSgdStep:
    def test_no_grads_and_zero_mask_entry_leave_it_unchanged(self):
        net = build_ssam_cnn(TINY, seed=7)
        mask = net.layers[0].segments[0].mask
        mask.value[0] = 0.0
        before = {n: p.value.copy() for n, p in net.parameters.items()}
        sgd_step(net, lr=0.01, l1_coeff=0.01)
        assert mask.value[0] == 0.0  # sign(0) = 0, no L1 pull
        for n, p in net.parameters.items():
            if n not in net.mask_names:
                np.testing.assert_array_equal(p.value, before[n])

    def test_l1_subgradient_on_mask(self):
        net = build_ssam_cnn(TINY, seed=8)
        mask = net.layers[0].segments[0].mask
        assert mask.value[0] == 1.0
        sgd_step(net, lr=0.01, l1_coeff=0.01)
        assert abs(mask.value[0] - 0.9999) < 1e-15

    def test_plain_weight_step_is_exact(self):
        net = build_ssam_cnn(TINY, seed=9)
        w = net.parameters["dense.weight"]
        g = np.full_like(w.value, 0.5)
        w.grad += g
        before = w.value.copy()
        sgd_step(net, lr=0.01, l1_coeff=0.01)
        np.testing.assert_array_equal(w.value, before - 0.01 * g)
        np.testing.assert_array_equal(w.grad, np.zeros_like(g))

    def test_non_finite_grad_names_parameter(self):
        net = build_ssam_cnn(TINY, seed=10)
        net.parameters["conv1.bias"].grad[0] = np.nan
        with pytest.raises(DivergenceError, match="conv1.bias"):
            sgd_step(net)


class TestDeterminism:
    def test_identical_seed_gives_bit_identical_losses(self, rng):
        x = rng.normal(size=(8, 1, 12))
        labels = rng.integers(0, 2, size=8)
        losses = []
        for _ in range(2):
            net = build_ssam_cnn(TINY, seed=11)
            run = []
            for _ in range(5):
                net.forward(x, train=True)
                run.append(net.backward(labels))
                sgd_step(net)
            losses.append(run)
        assert losses[0] == losses[1]

    def test_l1_training_on_noise_shrinks_every_mask(self, rng):
        net = build_ssam_cnn(TINY, seed=12)
        before = [np.abs(m).sum() for m in net.masks()]
        x = rng.normal(size=(16, 1, 12))
        labels = rng.integers(0, 2, size=16)
        for _ in range(100):
            net.forward(x, train=True)
            net.backward(labels)
            sgd_step(net, lr=0.01, l1_coeff=0.01)
        after = [np.abs(m).sum() for m in net.masks()]
        for b, a in zip(before, after):
            assert a < b


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        net = build_ssam_cnn(ModelConfig(input_length=20, num_classes=3, num_segments=2), seed=13)
        # perturb state away from init, including running stats
        net.forward(rng.normal(size=(4, 1, 20)), train=True)
        net.backward(np.array([0, 1, 2, 0]))
        sgd_step(net)
        path = tmp_path / "ckpt.npz"
        save_checkpoint(net, path)
        restored = load_checkpoint(path)
        assert restored.config == net.config
        original = net.state_dict()
        for name, value in restored.state_dict().items():
            assert np.array_equal(value, original[name]), name

    def test_restored_network_evaluates_identically(self, tmp_path, rng):
        net = build_ssam_cnn(TINY, seed=14)
        x = rng.normal(size=(5, 1, 12))
        net.forward(x, train=True)  # populate running stats
        path = tmp_path / "ckpt.npz"
        save_checkpoint(net, path)
        restored = load_checkpoint(path)
        np.testing.assert_array_equal(
            net.forward(x, train=False), restored.forward(x, train=False)
        )
