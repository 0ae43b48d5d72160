import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polcnn.cnn import (
    AdamState,
    ModelConfig,
    adam_step,
    conv_valid,
    cross_entropy,
    dropout,
    forward,
    init_model,
    load_model,
    max_pool_1,
    model_to_bytes,
    predict,
    save_model,
    softmax,
)
from polcnn.embeddings import SentenceTensor
from polcnn.errors import ModelFormatError
from polcnn.kernels import numpy_backend

SMALL = ModelConfig(d=5, seq_len=8, widths=(2, 3, 4), filters_per_width=2, classes=7)


def random_tensor(rng, rows=8, d=5, ell=None):
    ell = ell or int(rng.integers(1, rows + 1))
    values = np.zeros((rows, d))
    values[:ell] = rng.normal(size=(ell, d))
    return SentenceTensor(values=values, real_length=ell)


class TestModelConfig:
    def test_feature_count(self):
        assert ModelConfig(d=300).feature_count == 300
        assert SMALL.feature_count == 6

    def test_widths_sorted_and_validated(self):
        assert ModelConfig(d=4, widths=(4, 2, 3)).widths == (2, 3, 4)
        with pytest.raises(ValueError):
            ModelConfig(d=4, seq_len=3, widths=(2, 5))
        with pytest.raises(ValueError):
            ModelConfig(d=4, dropout_rate=1.0)
        with pytest.raises(ValueError):
            ModelConfig(d=4, classes=1)


class TestInitModel:
    def test_deterministic_per_seed(self):
        a = init_model(SMALL, seed=11)
        b = init_model(SMALL, seed=11)
        assert model_to_bytes(a) == model_to_bytes(b)
        assert model_to_bytes(init_model(SMALL, seed=12)) != model_to_bytes(a)

    def test_biases_zero(self):
        m = init_model(SMALL, seed=0)
        for h in SMALL.widths:
            assert not m.conv_b[h].any()
        assert not m.dense_b.any()

    def test_weight_mean_statistics(self):
        # Uniform(-bound, bound) has mean 0 and sd bound/sqrt(3); the
        # empirical mean over 1e5 draws must stay within 3 standard errors.
        cfg = ModelConfig(d=50, seq_len=60, widths=(2,), filters_per_width=1000, classes=7)
        m = init_model(cfg, seed=5)
        draws = m.conv_w[2].ravel()
        assert draws.size == 100_000
        fan_in, fan_out = 2 * 50, 1000 * 2 * 50
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        stderr = bound / math.sqrt(3) / math.sqrt(draws.size)
        assert abs(draws.mean()) < 3 * stderr
        assert abs(draws).max() <= bound


class TestConvValid:
    def test_zero_input_zero_bias(self):
        x = SentenceTensor(values=np.zeros((8, 5)), real_length=4)
        out = conv_valid(x, np.random.default_rng(0).normal(size=(2, 5)), 0.0)
        assert out.shape == (3,)
        assert not out.any()

    def test_hand_arithmetic_d1(self):
        x = SentenceTensor(values=np.array([[1.0], [2.0], [3.0]]), real_length=3)
        out = conv_valid(x, np.array([[1.0], [1.0]]), 0.0)
        np.testing.assert_allclose(out, [3.0, 5.0])

    def test_relu_applied(self):
        x = SentenceTensor(values=np.array([[1.0], [2.0], [3.0]]), real_length=3)
        out = conv_valid(x, np.array([[-1.0], [-1.0]]), 0.0)
        np.testing.assert_allclose(out, [0.0, 0.0])

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            x = random_tensor(rng)
            h = int(rng.integers(1, 5))
            w = rng.normal(size=(h, 5))
            b = float(rng.normal())
            got = conv_valid(x, w, b)
            ell = x.real_length
            positions = max(ell - h + 1, 1)
            want = np.empty(positions)
            for p in range(positions):
                s = b
                for i in range(h):
                    for j in range(5):
                        s += x.values[p + i, j] * w[i, j]
                want[p] = max(s, 0.0)
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_short_sentence_single_window(self):
        x = SentenceTensor(values=np.vstack([np.ones((1, 3)), np.zeros((7, 3))]), real_length=1)
        out = conv_valid(x, np.ones((4, 3)), 0.0)
        assert out.shape == (1,)
        np.testing.assert_allclose(out, [3.0])

    @pytest.mark.parametrize("backend_name", ["active", "numpy"])
    def test_preactivation_linearity(self, backend_name):
        # conv(ax + by) = a conv(x) + b conv(y) before relu, zero bias
        from polcnn import kernels

        backend = kernels if backend_name == "active" else numpy_backend
        rng = np.random.default_rng(3)
        w = rng.normal(size=(1, 3, 5))
        bias = np.zeros(1)
        xa = rng.normal(size=(8, 5))
        xb = rng.normal(size=(8, 5))
        a, b = 1.7, -0.4
        pre_mix, _, _ = backend.conv_relu_pool(a * xa + b * xb, 8, w, bias)
        pre_a, _, _ = backend.conv_relu_pool(xa, 8, w, bias)
        pre_b, _, _ = backend.conv_relu_pool(xb, 8, w, bias)
        np.testing.assert_allclose(pre_mix, a * pre_a + b * pre_b, atol=1e-10)


class TestMaxPool:
    def test_basic(self):
        assert max_pool_1(np.array([3.0, 5.0])) == (5.0, 1)

    def test_tie_lowest_index(self):
        assert max_pool_1(np.array([7.0, 7.0, 2.0])) == (7.0, 0)

    def test_singleton_negative(self):
        assert max_pool_1(np.array([-4.0])) == (-4.0, 0)

    def test_empty_error(self):
        with pytest.raises(ValueError):
            max_pool_1(np.array([]))


class TestSoftmaxAndLoss:
    def test_uniform_loss_is_ln7(self):
        probs = np.full(7, 1.0 / 7.0)
        assert cross_entropy(probs, 3) == pytest.approx(math.log(7), abs=1e-9)

    def test_certain_prediction_zero_loss(self):
        probs = np.zeros(7)
        probs[2] = 1.0
        assert cross_entropy(probs, 2) == 0.0

    def test_quarter_probability(self):
        probs = np.array([0.25, 0.75])
        assert cross_entropy(probs, 0) == pytest.approx(math.log(4), abs=1e-9)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            cross_entropy(np.full(7, 1 / 7), 7)

    # Logit gaps beyond ~708 underflow exp() in float64, so positivity is
    # only promised on realistic ranges.
    @given(st.lists(st.floats(-300, 300), min_size=2, max_size=12),
           st.floats(-200, 200))
    @settings(max_examples=200)
    def test_softmax_properties(self, logits, shift):
        z = np.array(logits)
        p = softmax(z)
        assert np.all(p > 0) and np.all(p < 1 + 1e-15)
        assert abs(p.sum() - 1.0) < 1e-9
        np.testing.assert_allclose(softmax(z + shift), p, atol=1e-9)

    def test_matches_high_precision_oracle(self):
        from mpmath import mp, mpf

        mp.dps = 50
        rng = np.random.default_rng(0)
        z = rng.normal(scale=30, size=9)
        es = [mp.exp(mpf(float(v))) for v in z]
        total = sum(es)
        want = np.array([float(e / total) for e in es])
        np.testing.assert_allclose(softmax(z), want, rtol=1e-12)


class TestDropout:
    def test_p_zero_identity(self):
        v = np.arange(5.0)
        out, mask = dropout(v, 0.0, "train", seed=0)
        np.testing.assert_array_equal(out, v)
        np.testing.assert_array_equal(mask, np.ones(5))

    def test_eval_identity(self):
        v = np.arange(5.0)
        out, mask = dropout(v, 0.5, "eval")
        np.testing.assert_array_equal(out, v)
        np.testing.assert_array_equal(mask, np.ones(5))

    def test_kept_fraction_binomial_bound(self):
        v = np.ones(10_000)
        _, mask = dropout(v, 0.5, "train", seed=0)
        kept = (mask > 0).mean()
        assert 0.48 <= kept <= 0.52

    def test_scale_on_kept_entries(self):
        v = np.ones(1000)
        out, mask = dropout(v, 0.5, "train", seed=1)
        assert set(np.unique(out)) == {0.0, 2.0}
        np.testing.assert_array_equal(out, mask)

    def test_deterministic_per_seed(self):
        v = np.ones(100)
        a = dropout(v, 0.5, "train", seed=9)[1]
        b = dropout(v, 0.5, "train", seed=9)[1]
        np.testing.assert_array_equal(a, b)

    def test_train_without_seed_rejected(self):
        with pytest.raises(ValueError, match="seed"):
            dropout(np.ones(4), 0.5, "train")


class TestForward:
    def test_zero_model_uniform_probs(self):
        m = init_model(SMALL, seed=0)
        for _, p in m.param_items():
            p[...] = 0.0
        x = random_tensor(np.random.default_rng(0))
        probs, _ = forward(m, x, "eval")
        np.testing.assert_allclose(probs, np.full(7, 1 / 7), atol=1e-12)

    def test_eval_deterministic_ignores_seed(self):
        m = init_model(SMALL, seed=1)
        x = random_tensor(np.random.default_rng(1))
        p1, _ = forward(m, x, "eval", seed=1)
        p2, _ = forward(m, x, "eval", seed=999)
        np.testing.assert_array_equal(p1, p2)

    def test_probs_valid_distribution(self):
        rng = np.random.default_rng(5)
        m = init_model(SMALL, seed=5)
        for _ in range(10):
            probs, _ = forward(m, random_tensor(rng), "train", seed=int(rng.integers(1e6)))
            assert np.all(probs > 0) and np.all(probs < 1)
            assert abs(probs.sum() - 1.0) < 1e-9

    def test_dim_mismatch_rejected(self):
        m = init_model(SMALL, seed=0)
        bad = SentenceTensor(values=np.zeros((8, 6)), real_length=2)
        with pytest.raises(ValueError, match="dim"):
            forward(m, bad)

    def test_cache_fields(self):
        m = init_model(SMALL, seed=0)
        x = random_tensor(np.random.default_rng(2), ell=6)
        probs, cache = forward(m, x, "train", seed=4)
        assert set(cache.pre) == {2, 3, 4}
        assert cache.pre[2].shape == (2, 5)  # ell - h + 1 positions
        assert cache.pooled.shape == (6,)
        assert cache.features.shape == (6,)
        np.testing.assert_array_equal(cache.probs, probs)


class TestAdam:
    def test_zero_gradient_identity(self):
        m = init_model(SMALL, seed=3)
        before = model_to_bytes(m)
        state = AdamState.for_model(m)
        zeros = {name: np.zeros_like(p) for name, p in m.param_items()}
        for _ in range(5):
            adam_step(m, zeros, state)
        assert model_to_bytes(m) == before
        assert state.t == 5

    def test_first_step_closed_form(self):
        m = init_model(SMALL, seed=0)
        theta0 = m.dense_b.copy()
        state = AdamState.for_model(m)
        grads = {name: np.zeros_like(p) for name, p in m.param_items()}
        grads["dense_b"] = np.zeros_like(m.dense_b)
        grads["dense_b"][0] = 0.5
        adam_step(m, grads, state)
        delta = m.dense_b[0] - theta0[0]
        assert delta == pytest.approx(-0.001 * 0.5 / (0.5 + 1e-8), abs=1e-12)

    def test_two_steps_match_recurrence_oracle(self):
        # Straight-line scalar reference for the update recurrences.
        def reference(g_seq, alpha=0.001, b1=0.9, b2=0.999, eps=1e-8):
            theta, m, v = 0.0, 0.0, 0.0
            for t, g in enumerate(g_seq, start=1):
                m = b1 * m + (1 - b1) * g
                v = b2 * v + (1 - b2) * g * g
                m_hat = m / (1 - b1**t)
                v_hat = v / (1 - b2**t)
                theta -= alpha * m_hat / (math.sqrt(v_hat) + eps)
            return theta

        m = init_model(SMALL, seed=0)
        m.dense_b[...] = 0.0
        state = AdamState.for_model(m)
        grads = {name: np.zeros_like(p) for name, p in m.param_items()}
        g = 0.37
        grads["dense_b"] = np.full_like(m.dense_b, g)
        adam_step(m, grads, state)
        adam_step(m, grads, state)
        assert m.dense_b[0] == pytest.approx(reference([g, g]), abs=1e-12)

    def test_shape_mismatch_rejected(self):
        m = init_model(SMALL, seed=0)
        state = AdamState.for_model(m)
        grads = {name: np.zeros_like(p) for name, p in m.param_items()}
        grads["dense_b"] = np.zeros(3)
        with pytest.raises(ValueError, match="shape"):
            adam_step(m, grads, state)

    def test_second_moment_nonnegative(self):
        rng = np.random.default_rng(8)
        m = init_model(SMALL, seed=8)
        state = AdamState.for_model(m)
        for _ in range(3):
            grads = {name: rng.normal(size=p.shape) for name, p in m.param_items()}
            adam_step(m, grads, state)
        for v in state.v.values():
            assert np.all(v >= 0)


class TestPredict:
    def test_zero_model_tie_breaks_to_class_zero(self):
        m = init_model(SMALL, seed=0)
        for _, p in m.param_items():
            p[...] = 0.0
        x = random_tensor(np.random.default_rng(0))
        label, probs = predict(m, x)
        assert label == 0
        np.testing.assert_allclose(probs, np.full(7, 1 / 7))

    def test_predict_twice_identical(self):
        m = init_model(SMALL, seed=2)
        x = random_tensor(np.random.default_rng(2))
        assert predict(m, x)[0] == predict(m, x)[0]
        np.testing.assert_array_equal(predict(m, x)[1], predict(m, x)[1])


class TestModelFile:
    def test_round_trip_bit_exact(self, tmp_path):
        m = init_model(ModelConfig(d=9, seq_len=12, widths=(2, 4), filters_per_width=3), seed=4)
        path = tmp_path / "m.pcnn"
        save_model(m, path)
        back = load_model(path)
        assert model_to_bytes(back) == model_to_bytes(m)
        assert back.config == m.config

    def test_corrupted_byte_fails_checksum(self, tmp_path):
        m = init_model(SMALL, seed=4)
        path = tmp_path / "m.pcnn"
        save_model(m, path)
        blob = bytearray(path.read_bytes())
        blob[40] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelFormatError, match="checksum"):
            load_model(path)

    def test_version_mismatch(self, tmp_path):
        import struct
        import zlib

        m = init_model(SMALL, seed=4)
        blob = bytearray(model_to_bytes(m))
        blob[4:8] = struct.pack("<I", 2)
        body = bytes(blob[:-4])
        blob[-4:] = struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
        path = tmp_path / "m.pcnn"
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelFormatError, match="version"):
            load_model(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.pcnn"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(ModelFormatError, match="magic"):
            load_model(path)


class TestKernelBackendParity:
    def test_forward_and_backward_agree(self):
        numba_backend = pytest.importorskip("polcnn.kernels.numba_backend")
        rng = np.random.default_rng(123)
        for _ in range(10):
            d = int(rng.integers(1, 24))
            h = int(rng.integers(1, 5))
            n = int(rng.integers(1, 8))
            rows = int(rng.integers(h, 20))
            ell = int(rng.integers(1, rows + 1))
            x = np.zeros((rows, d))
            x[:ell] = rng.normal(size=(ell, d))
            w = rng.normal(size=(n, h, d))
            b = rng.normal(size=n)
            pre_a, pooled_a, arg_a = numpy_backend.conv_relu_pool(x, ell, w, b)
            pre_b, pooled_b, arg_b = numba_backend.conv_relu_pool(x, ell, w, b)
            np.testing.assert_allclose(pre_a, pre_b, atol=1e-12)
            np.testing.assert_allclose(pooled_a, pooled_b, atol=1e-12)
            np.testing.assert_array_equal(arg_a, arg_b)

            gfeat = rng.normal(size=n)
            dw_a, db_a = np.zeros_like(w), np.zeros_like(b)
            dw_b, db_b = np.zeros_like(w), np.zeros_like(b)
            numpy_backend.conv_pool_backward(x, arg_a, pooled_a, gfeat, h, dw_a, db_a)
            numba_backend.conv_pool_backward(x, arg_b, pooled_b, gfeat, h, dw_b, db_b)
            np.testing.assert_allclose(dw_a, dw_b, atol=1e-12)
            np.testing.assert_allclose(db_a, db_b, atol=1e-12)
