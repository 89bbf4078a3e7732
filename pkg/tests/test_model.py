import numpy as np
import pytest
from scipy.special import expit

from ethikit.batching import TokenBatch
from ethikit.errors import (
    ConfigError,
    CorruptHeader,
    ShapeMismatch,
    StaleCache,
    TruncatedCheckpoint,
)
from ethikit.loss import bce, bce_grad_logits
from ethikit.model import (
    ModelConfig,
    backward,
    classify,
    cls_representation,
    forward,
    init_params,
    is_weight_param,
    load_checkpoint,
    param_shapes,
    save_checkpoint,
)

TOY = ModelConfig(
    vocab_size=30, max_len=12, n_layers=2, n_heads=2,
    d_model=16, d_ff=32, dropout_p=0.3, seed=7, dtype="float64",
)


def make_batch(cfg, n_rows=4, length=8, seed=0, pad_rows=()):
    rng = np.random.default_rng(seed)
    ids = rng.integers(5, cfg.vocab_size, size=(n_rows, length))
    ids[:, 0] = 2  # CLS
    ids[:, -1] = 3  # SEP
    mask = np.ones((n_rows, length), dtype=np.int8)
    for row, keep in pad_rows:
        mask[row, keep:] = 0
        ids[row, keep - 1] = 3
        ids[row, keep:] = 0
    labels = rng.integers(0, 2, size=n_rows)
    return TokenBatch(ids=ids, mask=mask, labels=labels)


def randomize(params, seed=11, scale=0.5):
    """Unit-ish random parameters: representative of a trained network."""
    rng = np.random.default_rng(seed)
    for name, t in params.tensors.items():
        if is_weight_param(name):
            t[...] = rng.normal(0.0, scale, size=t.shape)
        elif name.endswith(".g"):
            t[...] = 1.0 + rng.normal(0.0, 0.1, size=t.shape)
        else:
            t[...] = rng.normal(0.0, 0.1, size=t.shape)
    return params


class TestConfig:
    def test_heads_must_divide(self):
        with pytest.raises(ConfigError):
            ModelConfig(vocab_size=10, n_heads=3, d_model=16)

    def test_dropout_range(self):
        with pytest.raises(ConfigError):
            ModelConfig(vocab_size=10, dropout_p=1.0)


class TestInit:
    def test_same_seed_identical_bytes(self):
        p1 = init_params(TOY)
        p2 = init_params(TOY)
        for name in p1.names:
            assert p1[name].tobytes() == p2[name].tobytes()

    def test_biases_zero_gains_one(self):
        params = init_params(TOY)
        assert not params["layers.0.attn.bq"].any()
        assert not params["head.b"].any()
        assert (params["layers.1.ln2.g"] == 1.0).all()

    def test_weight_sample_statistics(self):
        cfg = ModelConfig(vocab_size=700, max_len=8, n_layers=1, n_heads=2,
                          d_model=16, d_ff=32, seed=3)
        weights = init_params(cfg)["embed.tok"]
        n = weights.size
        assert n >= 10_000
        assert abs(weights.mean()) < 3 * 0.02 / np.sqrt(n)
        assert np.abs(weights).max() <= 2 * 0.02 + 1e-12


class TestForward:
    def test_zero_head_gives_half_probability(self):
        params = init_params(TOY)
        params.tensors["head.w"][...] = 0.0
        params.tensors["head.b"][...] = 0.0
        batch = make_batch(TOY)
        logits, _ = forward(params, batch)
        assert (logits == 0.0).all()
        assert (classify(params, batch) == 0.5).all()

    def test_eval_deterministic(self):
        params = randomize(init_params(TOY))
        batch = make_batch(TOY)
        l1, _ = forward(params, batch)
        l2, _ = forward(params, batch)
        assert np.array_equal(l1, l2)

    def test_padding_invariance(self):
        params = randomize(init_params(TOY))
        batch = make_batch(TOY, length=8, pad_rows=[(1, 5)])
        base, _ = forward(params, batch)
        for extra in (1, 4):
            ids = np.concatenate([batch.ids, np.zeros((4, extra), np.int64)], axis=1)
            mask = np.concatenate([batch.mask, np.zeros((4, extra), np.int8)], axis=1)
            padded = TokenBatch(ids=ids, mask=mask, labels=batch.labels)
            out, _ = forward(params, padded)
            assert np.abs(out - base).max() <= 1e-5 * np.abs(base).max()

    def test_train_needs_rng_when_dropping(self):
        params = init_params(TOY)
        with pytest.raises(ValueError):
            forward(params, make_batch(TOY), train=True)

    def test_too_long_sequence_rejected(self):
        params = init_params(TOY)
        with pytest.raises(ShapeMismatch):
            forward(params, make_batch(TOY, length=13))

    def test_classify_strictly_inside_unit_interval(self):
        params = randomize(init_params(TOY), scale=3.0)
        probs = classify(params, make_batch(TOY))
        assert (probs > 0.0).all() and (probs < 1.0).all()
        assert probs.min() >= expit(-30.0)
        assert probs.max() <= expit(30.0)


class TestDropout:
    def test_eval_scales_head_input_exactly(self):
        params = randomize(init_params(TOY))
        batch = make_batch(TOY)
        h_cls = cls_representation(params, batch)
        expected = ((1.0 - TOY.dropout_p) * h_cls) @ params["head.w"] + params["head.b"]
        logits, _ = forward(params, batch)
        assert np.array_equal(logits, expected)

    def test_train_mask_zeroes_without_rescaling(self):
        params = randomize(init_params(TOY))
        batch = make_batch(TOY)
        h_cls = cls_representation(params, batch)
        keep = np.zeros_like(h_cls)
        keep[:, : 8] = 1.0
        logits, cache = forward(params, batch, train=True, head_mask=keep)
        manual = (keep * h_cls) @ params["head.w"] + params["head.b"]
        assert np.array_equal(logits, manual)
        assert np.array_equal(cache.h_task, keep * h_cls)

    def test_monte_carlo_mean_links_train_to_eval(self):
        params = randomize(init_params(TOY))
        batch = make_batch(TOY, n_rows=2)
        h_cls = cls_representation(params, batch)
        rng = np.random.default_rng(123)
        n_draws = 10_000
        total = np.zeros_like(h_cls)
        for _ in range(n_draws):
            _, cache = forward(params, batch, train=True, rng=rng)
            total += cache.h_task
        mc_mean = total / n_draws
        p = TOY.dropout_p
        # |mean(D) - (1-p)| <= 3 sqrt(p(1-p)/n), uniformly across coordinates
        tol = 3.0 * np.sqrt(p * (1 - p) / n_draws) * np.abs(h_cls)
        assert (np.abs(mc_mean - (1 - p) * h_cls) <= tol + 1e-15).all()


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        params = randomize(init_params(TOY))
        batch = make_batch(TOY)
        _, cache = forward(params, batch, train=True,
                           rng=np.random.default_rng(0))
        grads = backward(params, cache, np.zeros(4))
        for name, g in grads.items():
            assert not g.any(), name

    def test_head_bias_gradient_is_upstream_sum(self):
        params = randomize(init_params(TOY))
        batch = make_batch(TOY)
        _, cache = forward(params, batch, train=True, rng=np.random.default_rng(0))
        dl = np.array([0.3, -0.1, 0.7, 0.2])
        grads = backward(params, cache, dl)
        assert grads["head.b"] == pytest.approx(dl.sum(), abs=1e-15)

    def test_matches_finite_differences(self):
        params = randomize(init_params(TOY))
        batch = make_batch(TOY, pad_rows=[(2, 6)])
        keep = (np.random.default_rng(9).random((4, 16)) < 0.7).astype(np.float64)
        logits, cache = forward(params, batch, train=True, head_mask=keep)
        grads = backward(params, cache, bce_grad_logits(logits, batch.labels))

        def loss_at():
            out, _ = forward(params, batch, train=True, head_mask=keep)
            return bce(expit(out), batch.labels).mean_loss

        h = 1e-3
        rng = np.random.default_rng(1)
        for name, tensor in params.tensors.items():
            flat = tensor.reshape(-1) if tensor.ndim else tensor.reshape(1)
            gflat = grads[name].reshape(-1) if grads[name].ndim else grads[name].reshape(1)
            picks = rng.choice(flat.size, size=min(4, flat.size), replace=False)
            scale = max(np.abs(gflat).max(), 1e-6)
            for j in picks:
                orig = flat[j]
                flat[j] = orig + h
                up = loss_at()
                flat[j] = orig - h
                down = loss_at()
                flat[j] = orig
                fd = (up - down) / (2 * h)
                assert abs(gflat[j] - fd) / max(scale, abs(fd)) < 1e-4, name

    def test_stale_cache_rejected(self):
        params = randomize(init_params(TOY))
        batch = make_batch(TOY)
        _, cache = forward(params, batch, train=True, rng=np.random.default_rng(0))
        other_cfg = ModelConfig(vocab_size=30, max_len=12, n_layers=1, n_heads=2,
                                d_model=16, d_ff=32, dtype="float64")
        other = init_params(other_cfg)
        with pytest.raises(StaleCache):
            backward(other, cache, np.zeros(4))
        with pytest.raises(StaleCache):
            backward(params, None, np.zeros(4))


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        cfg = ModelConfig(vocab_size=30, max_len=12, n_layers=2, n_heads=2,
                          d_model=16, d_ff=32, seed=5)  # default float32
        params = init_params(cfg)
        path = tmp_path / "model.ckpt"
        save_checkpoint(params, cfg, path)
        loaded, loaded_cfg = load_checkpoint(path)
        assert loaded_cfg == cfg
        for name in params.names:
            assert loaded[name].tobytes() == params[name].tobytes()

    def test_truncated_file(self, tmp_path):
        cfg = ModelConfig(vocab_size=30, max_len=12, n_layers=1, n_heads=2,
                          d_model=16, d_ff=32)
        path = tmp_path / "model.ckpt"
        save_checkpoint(init_params(cfg), cfg, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(TruncatedCheckpoint):
            load_checkpoint(path)

    def test_corrupt_header(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(CorruptHeader):
            load_checkpoint(path)

    def test_layout_mismatch(self, tmp_path):
        cfg = ModelConfig(vocab_size=30, max_len=12, n_layers=1, n_heads=2,
                          d_model=16, d_ff=32)
        params = init_params(cfg)
        # lie about the layer count in the header
        wrong = ModelConfig(vocab_size=30, max_len=12, n_layers=2, n_heads=2,
                            d_model=16, d_ff=32)
        path = tmp_path / "model.ckpt"
        save_checkpoint(params, wrong, path)
        with pytest.raises(ShapeMismatch):
            load_checkpoint(path)

    def test_shapes_cover_every_parameter(self):
        shapes = param_shapes(TOY)
        params = init_params(TOY)
        assert list(shapes) == params.names
        for name, shape in shapes.items():
            assert params[name].shape == shape
