import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import gradcheck
from visbeam import beamnet as bn
from visbeam.errors import BadK, EmptyDataset, LabelOutOfRange, NonFinite, ShapeMismatch


def zero_params(H=4, Q=32):
    return bn.MlpParams(np.zeros((H, 2)), np.zeros(H), np.zeros((Q, H)), np.zeros(Q))


class TestForward:
    def test_zero_weights(self):
        logits, _ = bn.forward(zero_params(), [0.3, 0.7])
        np.testing.assert_array_equal(logits, np.zeros(32))
        np.testing.assert_allclose(bn.softmax(logits), np.full(32, 1 / 32), atol=1e-15)

    def test_eval_deterministic(self):
        p = bn.init_params(seed=1)
        a, _ = bn.forward(p, [0.1, 0.9])
        b, _ = bn.forward(p, [0.1, 0.9])
        assert a.tobytes() == b.tobytes()

    def test_hand_sized(self):
        p = bn.MlpParams(
            W1=np.array([[1.0, -2.0], [0.5, 0.25]]),
            b1=np.array([0.1, -0.3]),
            W2=np.array([[2.0, -1.0], [0.0, 3.0]]),
            b2=np.array([0.5, -0.5]),
        )
        x = [0.4, -0.2]
        # h1 = relu(0.4 + 0.4 + 0.1) = 0.9 ; h2 = relu(0.2 - 0.05 - 0.3) = 0
        h1, h2 = 0.9, 0.0
        expected = [2.0 * h1 - h2 + 0.5, 3.0 * h2 - 0.5]
        logits, _ = bn.forward(p, x)
        np.testing.assert_allclose(logits, expected, atol=1e-12)

    def test_inverted_dropout_mask(self):
        p = bn.init_params(hidden=16, num_classes=4, seed=2)
        mask = np.zeros((1, 16))
        mask[0, ::2] = 2.0
        logits, (_, pre, h, _) = bn.forward(p, [[0.2, 0.3]], mask=mask)
        np.testing.assert_allclose(h, np.maximum(pre, 0) * mask)
        m = bn.dropout_mask((20000, 16), 0.3, np.random.default_rng(0))
        assert set(np.unique(m)) <= {0.0, 1 / 0.7}
        assert m.mean() == pytest.approx(1.0, abs=0.01)

    def test_p_zero_train_equals_eval(self):
        p = bn.init_params(seed=3)
        x = np.random.default_rng(0).random((7, 2))
        train, _ = bn.forward(p, x, dropout=0.0, rng=np.random.default_rng(1))
        ev, _ = bn.forward(p, x)
        np.testing.assert_array_equal(train, ev)

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            bn.forward(bn.init_params(), [np.nan, 0.0])

    def test_init_bounds(self):
        p = bn.init_params(hidden=128, num_classes=32, seed=4)
        assert np.all(np.abs(p.W1) <= 1 / math.sqrt(2)) and np.all(np.abs(p.W2) <= 1 / math.sqrt(128))
        assert p.hidden == 128 and p.num_classes == 32


class TestSoftmax:
    @given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e4, 1e4)))
    def test_normalized(self, logits):
        s = bn.softmax(logits)
        assert np.all(np.isfinite(s))
        assert abs(s.sum() - 1.0) < 1e-12
        assert np.all((s >= 0) & (s <= 1))

    def test_strictly_inside_for_moderate_logits(self):
        s = bn.softmax(np.array([-20.0, 0.0, 20.0]))
        assert np.all((s > 0) & (s < 1))


class TestLoss:
    def test_uniform_logits(self):
        loss, _ = bn.loss_and_grad(zero_params(), np.zeros((3, 2)), [0, 5, 31])
        assert loss == pytest.approx(math.log(32), abs=1e-12)
        assert loss == pytest.approx(3.4657, abs=1e-4)

    def test_confident_correct(self):
        p = zero_params(H=1, Q=4)
        p.b2[:] = [0.0, 60.0, 0.0, 0.0]
        loss, _ = bn.loss_and_grad(p, [[0.0, 0.0]], [1])
        assert 0 <= loss < 1e-20

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            bn.loss_and_grad(zero_params(), np.zeros((1, 2)), [32])
        with pytest.raises(LabelOutOfRange):
            bn.loss_and_grad(zero_params(), np.zeros((1, 2)), [-1])

    def test_label_count(self):
        with pytest.raises(ShapeMismatch):
            bn.loss_and_grad(zero_params(), np.zeros((2, 2)), [1])

    @pytest.mark.parametrize("with_mask", [False, True])
    def test_gradients_match_finite_differences(self, with_mask):
        rng = np.random.default_rng(100 + with_mask)
        worst = max(gradcheck(rng, with_mask) for _ in range(100))
        assert worst < 1e-5


class TestAdam:
    def test_zero_grad_no_change(self):
        p = bn.init_params(hidden=4, num_classes=3, seed=0)
        before = p.copy()
        state = bn.AdamState.for_params(p)
        bn.adam_step(p, bn.MlpParams.zeros_like(p), state, 1e-2)
        for a, b in zip(p.arrays(), before.arrays()):
            np.testing.assert_array_equal(a, b)
        assert state.step == 1

    def test_hand_step(self):
        lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8
        p = bn.MlpParams(np.array([[0.5, 0.0]]), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
        g = bn.MlpParams(np.array([[1.0, 0.0]]), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
        state = bn.AdamState.for_params(p)
        bn.adam_step(p, g, state, lr, b1, b2, eps)
        m_hat = ((1 - b1) * 1.0) / (1 - b1)
        v_hat = ((1 - b2) * 1.0) / (1 - b2)
        assert p.W1[0, 0] == pytest.approx(0.5 - lr * m_hat / (math.sqrt(v_hat) + eps), abs=1e-15)
        assert p.W1[0, 0] == pytest.approx(0.5 - lr / (1 + eps), abs=1e-15)
        # Second step with the same gradient: hand-rolled moments.
        bn.adam_step(p, g, state, lr, b1, b2, eps)
        m = b1 * 0.1 + 0.1
        v = b2 * 0.001 + 0.001
        step2 = lr * (m / (1 - b1**2)) / (math.sqrt(v / (1 - b2**2)) + eps)
        assert p.W1[0, 0] == pytest.approx(0.5 - lr / (1 + eps) - step2, abs=1e-15)
        assert np.all(state.v.W1 >= 0)

    def test_first_step_sign(self):
        rng = np.random.default_rng(1)
        p = bn.init_params(hidden=6, num_classes=5, seed=1)
        before = p.copy()
        g = bn.MlpParams(*(rng.normal(size=a.shape) for a in p.arrays()))
        bn.adam_step(p, g, bn.AdamState.for_params(p), 1e-3)
        for a, b, grad in zip(p.arrays(), before.arrays(), g.arrays()):
            assert np.all(np.sign(a - b) == -np.sign(grad))

    def test_shape_mismatch(self):
        p = bn.init_params(hidden=4, num_classes=3)
        with pytest.raises(ShapeMismatch):
            bn.adam_step(p, bn.init_params(hidden=5, num_classes=3), bn.AdamState.for_params(p), 1e-2)


class TestSchedule:
    def test_table_defaults(self):
        c = bn.TrainConfig()
        assert (c.batch_size, c.lr, c.lr_decay_epochs, c.lr_factor, c.dropout, c.epochs) == (32, 1e-2, (20, 40), 0.1, 0.3, 50)
        assert (c.beta1, c.beta2, c.eps, c.hidden, c.num_classes) == (0.9, 0.999, 1e-8, 128, 32)

    def test_decay_at_epoch_start(self):
        c = bn.TrainConfig()
        assert c.lr_at(1) == 1e-2 and c.lr_at(19) == 1e-2
        assert c.lr_at(20) == pytest.approx(1e-3) and c.lr_at(39) == pytest.approx(1e-3)
        assert c.lr_at(40) == pytest.approx(1e-4) and c.lr_at(50) == pytest.approx(1e-4)

    @pytest.mark.parametrize("kw", [dict(dropout=1.0), dict(dropout=-0.1), dict(lr=0), dict(batch_size=0), dict(epochs=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            bn.TrainConfig(**kw)


def toy_data(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.random((n, 2))
    y = np.minimum((x[:, 0] * 8).astype(int), 7)
    return x, y


class TestTrain:
    def test_single_sample_memorized(self):
        x, y = np.array([[0.3, 0.6]]), np.array([5])
        cfg = bn.TrainConfig(epochs=5, dropout=0.0, seed=0)
        res = bn.train(x, y, x, y, cfg)
        losses = [r.train_loss for r in res.history]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_history_schedule_and_determinism(self):
        x, y = toy_data(300, 0)
        cfg = bn.TrainConfig(epochs=45, hidden=16, num_classes=8, seed=3)
        a = bn.train(x[:200], y[:200], x[200:], y[200:], cfg)
        b = bn.train(x[:200], y[:200], x[200:], y[200:], cfg)
        assert [(r.epoch, r.lr, r.train_loss, r.val_top1) for r in a.history] == [
            (r.epoch, r.lr, r.train_loss, r.val_top1) for r in b.history
        ]
        assert [r.lr for r in a.history][18:21] == [1e-2, pytest.approx(1e-3), pytest.approx(1e-3)]
        assert a.history[40].lr == pytest.approx(1e-4)

    def test_best_checkpoint(self):
        x, y = toy_data(400, 1)
        cfg = bn.TrainConfig(epochs=15, hidden=16, num_classes=8, seed=0)
        res = bn.train(x[:300], y[:300], x[300:], y[300:], cfg)
        best = max(r.val_top1 for r in res.history)
        assert res.history[res.best_epoch - 1].val_top1 == best
        assert bn.top1_accuracy(res.params, x[300:], y[300:]) == best
        assert best > 0.5  # well above the 1/8 chance level

    def test_zero_epochs_keeps_init(self):
        x, y = toy_data(50, 2)
        cfg = bn.TrainConfig(epochs=0, seed=4)
        res = bn.train(x, y, x, y, cfg)
        init = bn.init_params(seed=np.random.SeedSequence(4).spawn(3)[0])
        np.testing.assert_array_equal(res.params.W1, init.W1)
        assert res.history == []

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            bn.train(np.zeros((0, 2)), [], np.zeros((1, 2)), [0])


class TestTopk:
    def test_full_permutation(self):
        p = bn.init_params(seed=5)
        out = bn.predict_topk(p, [0.2, 0.4], 32)
        assert sorted(out.tolist()) == list(range(32))

    def test_unique_max(self):
        p = zero_params(H=1, Q=32)
        p.b2[7] = 1.0
        assert bn.predict_topk(p, [0.0, 0.0], 1).tolist() == [7]

    def test_ties_lowest_index(self):
        assert bn.rank_beams(np.array([1.0, 3.0, 3.0, 0.0])).tolist() == [1, 2, 0, 3]

    def test_sort_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(10_000):
            logits = rng.integers(-3, 4, size=12).astype(float)
            k = int(rng.integers(1, 13))
            oracle = sorted(range(12), key=lambda i: (-logits[i], i))[:k]
            assert bn.rank_beams(logits)[:k].tolist() == oracle

    def test_top1_is_argmax(self):
        p = bn.init_params(seed=7)
        x = np.random.default_rng(1).random((100, 2))
        np.testing.assert_array_equal(bn.predict_topk(p, x, 1)[:, 0], np.argmax(bn.logits_batch(p, x), axis=1))

    @pytest.mark.parametrize("k", [0, 33])
    def test_bad_k(self, k):
        with pytest.raises(BadK):
            bn.predict_topk(bn.init_params(), [0.1, 0.1], k)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31))
    def test_topk_monotone(self, seed):
        rng = np.random.default_rng(seed)
        p = bn.init_params(hidden=8, num_classes=32, seed=seed)
        x = rng.random((50, 2))
        y = rng.integers(0, 32, 50)
        ranked = bn.predict_topk(p, x, 32)
        acc = [np.mean(np.any(ranked[:, :k] == y[:, None], axis=1)) for k in range(1, 33)]
        assert all(b >= a for a, b in zip(acc, acc[1:])) and acc[-1] == 1.0


class TestSerialization:
    def test_round_trip(self):
        p = bn.init_params(hidden=8, num_classes=32, seed=8)
        cfg = bn.TrainConfig(hidden=8, seed=2)
        block = bn.params_to_dict(p, cfg)
        back = bn.params_from_dict(block)
        for a, b in zip(p.arrays(), back.arrays()):
            assert a.tobytes() == b.tobytes()
        assert bn.config_from_dict(block["config"]) == cfg

    def test_shape_mismatch(self):
        block = bn.params_to_dict(bn.init_params(hidden=4, num_classes=3))
        block["values"]["b1"] = block["values"]["b1"][:-1]
        with pytest.raises(ShapeMismatch):
            bn.params_from_dict(block)
