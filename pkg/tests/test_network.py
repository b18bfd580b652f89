import numpy as np
import pytest

from a2w.ctc import ctc_loss
from a2w.network import (
    BadShape,
    Model,
    ModelConfig,
    NoForwardCache,
    init_model,
    init_uniform_fan_in,
    model_backward,
    model_forward,
    output_side_param_count,
    parameter_count,
    warm_start,
)

TINY = ModelConfig(
    input_dim=5, output_dim=6, num_layers=1, hidden_per_direction=4, projection_dim=3, dropout_rate=0.0
)


def tiny_model(seed=0, config=TINY):
    return init_model(config, np.random.default_rng(seed))


def batch_loss(model, feats, lengths, targets, mask_seed=None):
    """Summed CTC loss over the batch; train mode when mask_seed is given."""
    rng = np.random.default_rng(mask_seed) if mask_seed is not None else None
    lattices, cache = model_forward(
        feats, lengths, model, train_mode=mask_seed is not None, rng=rng, want_cache=True
    )
    total, upstream = 0.0, []
    for lat, y in zip(lattices, targets):
        result = ctc_loss(lat, y)
        total += result.log_loss
        upstream.append(result.grad)
    return total, upstream, cache


class TestInit:
    def test_fan_in_bounds_4x4(self):
        m = init_uniform_fan_in((4, 4), np.random.default_rng(0))
        assert np.all(np.abs(m) < 0.5)

    def test_fan_in_bounds_nx1(self):
        m = init_uniform_fan_in((64, 1), np.random.default_rng(0))
        assert np.all(np.abs(m) < 1.0)
        assert np.any(np.abs(m) > 0.5)  # the full range is actually used

    def test_zero_dim_rejected(self):
        with pytest.raises(BadShape):
            init_uniform_fan_in((0, 3), np.random.default_rng(0))

    def test_empirical_std(self):
        # uniform(-eps, eps) has std eps/sqrt(3)
        eps = 1.0 / np.sqrt(25)
        m = init_uniform_fan_in((4000, 25), np.random.default_rng(7))
        assert m.std() == pytest.approx(eps / np.sqrt(3), rel=0.02)

    def test_forget_gate_bias_is_one(self):
        model = tiny_model()
        b = model.params["layers.0.fwd.b"]
        h = TINY.hidden_per_direction
        np.testing.assert_array_equal(b[h : 2 * h], 1.0)
        np.testing.assert_array_equal(b[:h], 0.0)


class TestParameterAccounting:
    def test_projection_factorization_counts(self):
        cfg = ModelConfig(input_dim=10, output_dim=50, num_layers=2, hidden_per_direction=8, projection_dim=6)
        assert output_side_param_count(cfg) == 50 * 6 + 6 * 16
        flat = ModelConfig(input_dim=10, output_dim=50, num_layers=2, hidden_per_direction=8, projection_dim=0)
        assert output_side_param_count(flat) == 50 * 16

    def test_total_count_matches_tensors(self):
        cfg = ModelConfig(input_dim=7, output_dim=9, num_layers=3, hidden_per_direction=5, projection_dim=4)
        model = init_model(cfg, np.random.default_rng(0))
        assert parameter_count(cfg) == sum(p.size for p in model.params.values())

    def test_projection_dim_bound_enforced(self):
        with pytest.raises(BadShape):
            ModelConfig(input_dim=4, output_dim=5, hidden_per_direction=4, projection_dim=8)


class TestForward:
    def test_zero_input_zero_params_gives_zero_logits(self):
        model = tiny_model()
        for name in model.params:
            model.params[name] = np.zeros_like(model.params[name])
        feats = np.zeros((2, 3, 5))
        lattices, _ = model_forward(feats, [3, 2], model)
        for lat in lattices:
            np.testing.assert_array_equal(lat.values, 0.0)

    def test_batching_neutrality(self):
        model = tiny_model(3)
        rng = np.random.default_rng(1)
        single = rng.normal(size=(1, 1, 5))
        lattices, _ = model_forward(single, [1], model)
        stacked = np.concatenate([single, rng.normal(size=(1, 1, 5))], axis=0)
        lattices2, _ = model_forward(stacked, [1, 1], model)
        np.testing.assert_allclose(lattices2[0].values, lattices[0].values, atol=1e-12)

    def test_padding_does_not_leak(self):
        model = tiny_model(4)
        rng = np.random.default_rng(2)
        feats = rng.normal(size=(1, 4, 5))
        unpadded, _ = model_forward(feats, [4], model)
        padded_feats = np.concatenate([feats, 99.0 * np.ones((1, 3, 5))], axis=1)
        padded, _ = model_forward(padded_feats, [4], model)
        np.testing.assert_allclose(padded[0].values, unpadded[0].values, atol=1e-12)
        assert padded[0].values.shape[0] == 4

    def test_lengths_validated(self):
        model = tiny_model()
        with pytest.raises(BadShape):
            model_forward(np.zeros((1, 2, 5)), [3], model)
        with pytest.raises(BadShape):
            model_forward(np.zeros((1, 2, 4)), [2], model)

    def test_bidirectionality_mirror(self):
        # swap fwd/bwd parameters and reverse the input: hidden halves swap
        # and the frame order reverses
        cfg = ModelConfig(input_dim=3, output_dim=4, num_layers=1, hidden_per_direction=4,
                          projection_dim=0, dropout_rate=0.0)
        model = tiny_model(5, cfg)
        mirrored = Model(cfg, dict(model.params))
        for tensor in ("W", "R", "b"):
            mirrored.params[f"layers.0.fwd.{tensor}"] = model.params[f"layers.0.bwd.{tensor}"]
            mirrored.params[f"layers.0.bwd.{tensor}"] = model.params[f"layers.0.fwd.{tensor}"]
        rng = np.random.default_rng(8)
        feats = rng.normal(size=(1, 5, 3))
        _, cache = model_forward(feats, [5], model, want_cache=True)
        _, mirror_cache = model_forward(feats[:, ::-1], [5], mirrored, want_cache=True)
        top = cache.concat_top[0]
        mirror_top = mirror_cache.concat_top[0]
        h = cfg.hidden_per_direction
        swapped = np.concatenate([mirror_top[:, h:], mirror_top[:, :h]], axis=1)
        np.testing.assert_allclose(swapped[::-1], top, atol=1e-12)


class TestDropout:
    def test_eval_mode_is_identity(self):
        cfg = ModelConfig(input_dim=5, output_dim=6, num_layers=2, hidden_per_direction=4,
                          projection_dim=3, dropout_rate=0.5)
        model = init_model(cfg, np.random.default_rng(0))
        feats = np.random.default_rng(1).normal(size=(2, 3, 5))
        a, _ = model_forward(feats, [3, 3], model)
        b, _ = model_forward(feats, [3, 3], model)
        for la, lb in zip(a, b):
            np.testing.assert_array_equal(la.values, lb.values)

    def test_train_mode_expectation_preserved(self):
        # inverted dropout: the masked unit's mean over draws recovers its
        # eval value; compare the dropped layer-1 input against the eval one
        cfg = ModelConfig(input_dim=4, output_dim=5, num_layers=2, hidden_per_direction=3,
                          projection_dim=0, dropout_rate=0.25)
        model = init_model(cfg, np.random.default_rng(3))
        feats = np.random.default_rng(4).normal(size=(1, 2, 4))
        _, eval_cache = model_forward(feats, [2], model, want_cache=True)
        undropped = eval_cache.layer_inputs[1]
        rng = np.random.default_rng(99)
        draws = 10_000
        acc = np.zeros_like(undropped)
        for _ in range(draws):
            _, cache = model_forward(feats, [2], model, train_mode=True, rng=rng, want_cache=True)
            acc += cache.layer_inputs[1]
        mean = acc / draws
        scale = np.abs(undropped).max()
        assert np.abs(mean - undropped).max() <= 0.02 * scale

    def test_rate_zero_equals_all_ones_mask(self):
        cfg = ModelConfig(input_dim=5, output_dim=6, num_layers=2, hidden_per_direction=4,
                          projection_dim=3, dropout_rate=0.0)
        model = init_model(cfg, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        feats = rng.normal(size=(2, 4, 5))
        targets = [[1, 2], [3]]
        loss_train, up_train, cache_train = batch_loss(model, feats, [4, 3], targets, mask_seed=5)
        loss_eval, up_eval, cache_eval = batch_loss(model, feats, [4, 3], targets)
        assert loss_train == loss_eval
        ga = model_backward(up_train, cache_train, model)
        gb = model_backward(up_eval, cache_eval, model)
        for name in ga:
            np.testing.assert_array_equal(ga[name], gb[name])


class TestBackward:
    def test_zero_upstream_zero_grads(self):
        model = tiny_model(1)
        feats = np.random.default_rng(0).normal(size=(2, 3, 5))
        _, cache = model_forward(feats, [3, 2], model, want_cache=True)
        upstream = [np.zeros((3, 6)), np.zeros((2, 6))]
        grads = model_backward(upstream, cache, model)
        for g in grads.values():
            np.testing.assert_array_equal(g, 0.0)

    def test_missing_cache_raises(self):
        model = tiny_model()
        with pytest.raises(NoForwardCache):
            model_backward([np.zeros((1, 6))], None, model)

    def test_finite_difference_full_model(self):
        # acceptance runs the bigger sweep; keep a quick spot check here
        cfg = ModelConfig(input_dim=3, output_dim=4, num_layers=1, hidden_per_direction=3,
                          projection_dim=2, dropout_rate=0.25)
        model = init_model(cfg, np.random.default_rng(11))
        rng = np.random.default_rng(12)
        feats = rng.normal(size=(2, 3, 3))
        lengths = [3, 2]
        targets = [[1, 2], [3]]

        def loss_at(params):
            total, _, _ = batch_loss(Model(cfg, params), feats, lengths, targets, mask_seed=77)
            return total

        _, upstream, cache = batch_loss(model, feats, lengths, targets, mask_seed=77)
        grads = model_backward(upstream, cache, model)
        step = 1e-4
        worst = 0.0
        for name, param in model.params.items():
            flat_grad = grads[name].ravel()
            for idx in range(param.size):
                hi_params = {k: v.copy() for k, v in model.params.items()}
                hi_params[name].ravel()[idx] += step
                lo_params = {k: v.copy() for k, v in model.params.items()}
                lo_params[name].ravel()[idx] -= step
                numeric = (loss_at(hi_params) - loss_at(lo_params)) / (2 * step)
                err = abs(flat_grad[idx] - numeric) / max(1.0, abs(flat_grad[idx]))
                worst = max(worst, err)
        assert worst <= 1e-3


class TestWarmStart:
    def test_identical_configs_copy_everything(self):
        source = tiny_model(0)
        target = tiny_model(1)
        report = warm_start(target, {k: v.copy() for k, v in source.params.items()})
        assert not report.skipped
        for name in source.params:
            np.testing.assert_array_equal(target.params[name], source.params[name])

    def test_different_output_size_skips_output_layer(self):
        source = tiny_model(0)
        bigger = ModelConfig(input_dim=5, output_dim=9, num_layers=1, hidden_per_direction=4,
                             projection_dim=3, dropout_rate=0.0)
        target = init_model(bigger, np.random.default_rng(1))
        report = warm_start(target, source.params)
        skipped_names = {name for name, _ in report.skipped}
        assert skipped_names == {"out.W"}
        assert "layers.0.fwd.W" in report.copied
        np.testing.assert_array_equal(target.params["layers.0.fwd.W"], source.params["layers.0.fwd.W"])

    def test_missing_tensors_reported(self):
        target = tiny_model(0)
        report = warm_start(target, {})
        assert len(report.skipped) == len(target.params)
        assert all(reason == "missing from source" for _, reason in report.skipped)
