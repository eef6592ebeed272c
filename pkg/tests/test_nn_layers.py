import numpy as np
import pytest

from lcirsp.errors import ShapeMismatch
from lcirsp.nn_core import (
    BatchNormSeq,
    CausalConv,
    ChannelRescale,
    Dense,
    LstmLayer,
    Parameter,
    ResidualBlock,
    TcnConfig,
    Tensor,
    dense,
    dilated_causal_conv,
    dropout,
    effective_span,
    lstm_step,
    mse_loss,
    receptive_field,
)
from lcirsp.nn_core import tensor as T

from test_nn_tensor import fd_check

RNG = np.random.default_rng(77)


class TestDilatedCausalConv:
    def test_identity_kernel(self):
        x = RNG.normal(size=(8, 3))
        w = np.zeros((2, 3, 3))
        w[0] = np.eye(3)
        out = dilated_causal_conv(x, w, dilation=4)
        np.testing.assert_allclose(out.data, x)

    def test_pure_shift(self):
        x = RNG.normal(size=(9, 1))
        w = np.zeros((2, 1, 1))
        w[1, 0, 0] = 1.0
        out = dilated_causal_conv(x, w, dilation=2)
        np.testing.assert_allclose(out.data[:2], 0.0)
        np.testing.assert_allclose(out.data[2:], x[:-2])

    def test_moving_pair_average(self):
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        w = np.full((2, 1, 1), 0.5)
        out = dilated_causal_conv(x, w, dilation=1)
        np.testing.assert_allclose(out.data.ravel(), [0.5, 1.5, 2.5, 3.5])

    def test_direct_convolution_sum_oracle(self):
        # out(s) = sum_i f(i) * x(s - d*i) with zero padding
        x = RNG.normal(size=(10, 2))
        w = RNG.normal(size=(3, 2, 4))
        d = 2
        out = dilated_causal_conv(x, w, dilation=d).data
        for s in range(10):
            expected = np.zeros(4)
            for i in range(3):
                if s - d * i >= 0:
                    expected += x[s - d * i] @ w[i]
            np.testing.assert_allclose(out[s], expected, atol=1e-12)

    def test_causality_perturbation(self):
        x = RNG.normal(size=(1, 12, 2))
        w = RNG.normal(size=(2, 2, 2))
        base = dilated_causal_conv(x, w, dilation=3).data
        for s in range(12):
            x2 = x.copy()
            x2[0, s] += 1.0
            out = dilated_causal_conv(x2, w, dilation=3).data
            changed = np.where(np.abs(out - base).sum(axis=2)[0] > 0)[0]
            assert changed.min() >= s

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            dilated_causal_conv(np.ones((5, 3)), np.ones((2, 4, 1)), 1)

    def test_gradients(self):
        conv = CausalConv(2, 3, 4, dilation=2, rng=RNG)
        x = Parameter(RNG.normal(size=(2, 9, 3)))
        target = RNG.normal(size=(2, 9, 4))
        f = lambda: mse_loss(conv(x), target)
        assert fd_check(f, [x, *conv.parameters()]) <= 1e-4


class TestReceptiveField:
    def test_k2_three_levels(self):
        assert receptive_field(TcnConfig(kernel_size=2, dilations=(1, 2, 4))) == 8

    def test_single_layer(self):
        assert receptive_field(TcnConfig(kernel_size=2, dilations=(1,))) == 2

    def test_k3_two_stacks(self):
        cfg = TcnConfig(kernel_size=3, dilations=(1, 2), n_stacks=2)
        assert receptive_field(cfg) == 13

    def test_effective_span_counts_both_convs(self):
        assert effective_span(2, (1, 2, 4), 1, convs_per_block=2) == 15

    def test_default_dilations_cover_window(self):
        cfg = TcnConfig()
        dil = cfg.resolved_dilations(150)
        assert effective_span(2, dil, 1, 2) >= 150
        assert dil == (1, 2, 4, 8, 16, 32, 64)


def measured_dependency_span(kernel_size, dilations, n_stacks, seed=0):
    """Perturbation oracle: length of the input suffix that can change the
    last output of a plain dilated-causal-conv stack, one conv per dilation
    level per stack. Strictly positive taps rule out cancellation."""
    rng = np.random.default_rng(seed)
    weights = [
        rng.uniform(0.5, 1.5, size=(kernel_size, 1, 1))
        for _ in range(n_stacks)
        for _ in dilations
    ]
    rf = 1 + (kernel_size - 1) * n_stacks * sum(dilations)
    T_len = rf + 5
    x = rng.normal(size=(1, T_len, 1))

    def forward(inp):
        h = Tensor(inp)
        k = 0
        for _ in range(n_stacks):
            for d in dilations:
                h = dilated_causal_conv(h, weights[k], dilation=d)
                k += 1
        return h.data[0, :, 0]

    base = forward(x)
    influences = []
    for s in range(T_len):
        x2 = x.copy()
        x2[0, s, 0] += 1.0
        if abs(forward(x2)[-1] - base[-1]) > 1e-9:
            influences.append(s)
    return T_len - 1 - min(influences) + 1


class TestDependencySpanOracle:
    def test_k2_three_levels_measured_matches_closed_form(self):
        assert measured_dependency_span(2, (1, 2, 4), 1) == 8

    def test_k3_stacked(self):
        cfg = TcnConfig(kernel_size=3, dilations=(1, 2), n_stacks=2)
        assert measured_dependency_span(3, (1, 2), 2) == receptive_field(cfg)


class TestDense:
    def test_identity(self):
        x = RNG.normal(size=(4, 3))
        out = dense(x, np.eye(3), np.zeros(3), "none")
        np.testing.assert_allclose(out.data, x)

    def test_softmax_uniform(self):
        out = dense(np.zeros((2, 3)), np.eye(3), np.zeros(3), "softmax")
        np.testing.assert_allclose(out.data, np.full((2, 3), 1 / 3), atol=1e-12)

    def test_relu(self):
        out = dense(np.array([[-1.0, 2.0]]), np.eye(2), np.zeros(2), "relu")
        np.testing.assert_allclose(out.data, [[0.0, 2.0]])

    def test_gradients_all_activations(self):
        for act in ("none", "relu", "tanh", "softmax"):
            layer = Dense(4, 3, act, rng=np.random.default_rng(3))
            x = Parameter(RNG.normal(size=(5, 4)))
            target = RNG.uniform(0.1, 0.9, size=(5, 3))
            f = lambda: mse_loss(layer(x), target)
            assert fd_check(f, [x, *layer.parameters()]) <= 1e-4, act


class TestBatchNorm:
    def test_train_normalizes_batch(self):
        bn = BatchNormSeq(3)
        x = RNG.normal(loc=5.0, scale=3.0, size=(4, 10, 3))
        out = bn(Tensor(x), training=True).data
        np.testing.assert_allclose(out.mean(axis=(0, 1)), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.std(axis=(0, 1)), 1.0, atol=1e-3)

    def test_running_stats_inference(self):
        bn = BatchNormSeq(2, momentum=0.0)  # adopt batch stats immediately
        x = RNG.normal(loc=2.0, scale=1.5, size=(8, 6, 2))
        bn(Tensor(x), training=True)
        out = bn(Tensor(x), training=False).data
        np.testing.assert_allclose(out.mean(axis=(0, 1)), 0.0, atol=1e-6)

    def test_gradients_train_and_eval(self):
        for training in (True, False):
            bn = BatchNormSeq(3)
            bn._buffers["running_mean"][:] = RNG.normal(size=3)
            bn._buffers["running_var"][:] = RNG.uniform(0.5, 2.0, size=3)
            x = Parameter(RNG.normal(size=(3, 5, 3)))
            target = RNG.normal(size=(3, 5, 3))
            f = lambda: mse_loss(bn(x, training=training), target)
            assert fd_check(f, [x, *bn.parameters()]) <= 1e-4

    def test_channel_rescale_gradients(self):
        cr = ChannelRescale(3)
        x = Parameter(RNG.normal(size=(2, 4, 3)))
        target = RNG.normal(size=(2, 4, 3))
        f = lambda: mse_loss(cr(x, training=True), target)
        assert fd_check(f, [x, *cr.parameters()]) <= 1e-4


class TestDropout:
    def test_rate_zero_identity(self):
        x = Tensor(RNG.normal(size=(3, 3)))
        assert dropout(x, 0.0, training=True, rng=np.random.default_rng(0)) is x

    def test_inference_identity(self):
        x = Tensor(RNG.normal(size=(3, 3)))
        assert dropout(x, 0.9, training=False) is x

    def test_mean_preserved(self):
        x = Tensor(np.ones(100000))
        out = dropout(x, 0.3, training=True, rng=np.random.default_rng(5))
        assert abs(out.data.mean() - 1.0) < 0.02

    def test_survivors_scaled(self):
        x = Tensor(np.ones(1000))
        out = dropout(x, 0.3, training=True, rng=np.random.default_rng(1))
        kept = out.data[out.data != 0]
        np.testing.assert_allclose(kept, 1.0 / 0.7)

    def test_gradient_through_mask(self):
        p = Parameter(RNG.normal(size=(4, 4)))
        rng_state = np.random.default_rng(9)
        masks = [dropout(Tensor(np.ones((4, 4))), 0.5, True, rng_state).data]

        def f():
            out = T.mul(p, Tensor(masks[0]))
            return T.mean_all(T.mul(out, out))

        assert fd_check(f, [p]) <= 1e-6


class TestLstm:
    def test_zero_weights_closed_form(self):
        H = 4
        W, U, b = np.zeros((3, 4 * H)), np.zeros((H, 4 * H)), np.zeros(4 * H)
        x = Tensor(RNG.normal(size=(2, 3)))
        h0, c0 = Tensor(np.zeros((2, H))), Tensor(np.zeros((2, H)))
        h, c = lstm_step(x, h0, c0, W, U, b)
        np.testing.assert_allclose(c.data, 0.0)
        np.testing.assert_allclose(h.data, 0.0)

        c_prev = RNG.normal(size=(2, H))
        h, c = lstm_step(x, h0, Tensor(c_prev), W, U, b)
        np.testing.assert_allclose(c.data, 0.5 * c_prev, atol=1e-12)
        np.testing.assert_allclose(h.data, 0.5 * np.tanh(0.5 * c_prev), atol=1e-12)

    def test_fused_matches_step_reference(self):
        layer = LstmLayer(3, 5, rng=np.random.default_rng(4))
        x = RNG.normal(size=(2, 7, 3)) * 0.5
        fused = layer(Tensor(x)).data
        h = Tensor(np.zeros((2, 5)))
        c = Tensor(np.zeros((2, 5)))
        for t in range(7):
            h, c = layer.step(Tensor(x[:, t, :]), h, c)
            np.testing.assert_allclose(h.data, fused[:, t, :], atol=1e-12)

    def test_hidden_state_bounded(self):
        layer = LstmLayer(3, 4, rng=np.random.default_rng(2))
        x = RNG.normal(size=(3, 50, 3)) * 10
        out = layer(Tensor(x)).data
        assert np.all(np.abs(out) <= 1.0 + 1e-12)

    def test_step_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            lstm_step(np.ones((2, 3)), np.ones((2, 4)), np.ones((2, 4)),
                      np.ones((5, 16)), np.ones((4, 16)), np.ones(16))

    def test_fused_gradients(self):
        layer = LstmLayer(3, 4, rng=np.random.default_rng(6))
        x = Parameter(RNG.normal(size=(2, 6, 3)))
        target = RNG.normal(size=(2, 6, 4))
        f = lambda: mse_loss(layer(x), target)
        assert fd_check(f, [x, *layer.parameters()]) <= 1e-4

    def test_step_gradients(self):
        layer = LstmLayer(3, 4, rng=np.random.default_rng(8))
        x = Parameter(RNG.normal(size=(2, 3)))
        c_prev = Parameter(RNG.normal(size=(2, 4)))
        target = RNG.normal(size=(2, 4))

        def f():
            h, c = layer.step(x, Tensor(np.zeros((2, 4))), c_prev)
            return mse_loss(h, target)

        assert fd_check(f, [x, c_prev, *layer.parameters()]) <= 1e-4


class TestResidualBlock:
    def test_zero_branch_is_identity(self):
        blk = ResidualBlock(3, 3, 2, 1, dropout_rate=0.0, rng=np.random.default_rng(0))
        for conv in (blk.conv1, blk.conv2):
            conv.W.data[...] = 0.0
            conv.b.data[...] = 0.0
        x = RNG.normal(size=(2, 6, 3))
        out = blk(Tensor(x), training=False).data
        np.testing.assert_allclose(out, x, atol=1e-12)

    def test_projection_identity_on_padded_channels(self):
        # 1x1 projection initialized to copy the input channels into the
        # first rows of a wider block reproduces the input on the skip path
        blk = ResidualBlock(2, 4, 2, 1, dropout_rate=0.0, rng=np.random.default_rng(0))
        for conv in (blk.conv1, blk.conv2):
            conv.W.data[...] = 0.0
            conv.b.data[...] = 0.0
        blk.projection.W.data[...] = 0.0
        blk.projection.W.data[0, :, :2] = np.eye(2)
        blk.projection.b.data[...] = 0.0
        x = RNG.normal(size=(1, 5, 2))
        out = blk(Tensor(x), training=False).data
        np.testing.assert_allclose(out[..., :2], x, atol=1e-12)
        np.testing.assert_allclose(out[..., 2:], 0.0, atol=1e-12)

    def test_causality(self):
        blk = ResidualBlock(2, 3, 2, 2, dropout_rate=0.0, rng=np.random.default_rng(1))
        x = RNG.normal(size=(1, 10, 2))
        base = blk(Tensor(x), training=False).data
        for s in range(10):
            x2 = x.copy()
            x2[0, s] += 0.5
            out = blk(Tensor(x2), training=False).data
            changed = np.where(np.abs(out - base).sum(axis=2)[0] > 1e-12)[0]
            assert changed.min() >= s

    def test_gradients(self):
        blk = ResidualBlock(3, 4, 2, 2, dropout_rate=0.0, rng=np.random.default_rng(3))
        x = Parameter(RNG.normal(size=(2, 7, 3)))
        target = RNG.normal(size=(2, 7, 4))
        f = lambda: mse_loss(blk(x, training=True), target)
        assert fd_check(f, [x, *blk.parameters()]) <= 1e-4

    def test_rescale_norm_mode_gradients(self):
        blk = ResidualBlock(3, 4, 2, 1, dropout_rate=0.0, norm="rescale",
                            rng=np.random.default_rng(5))
        x = Parameter(RNG.normal(size=(2, 6, 3)))
        target = RNG.normal(size=(2, 6, 4))
        f = lambda: mse_loss(blk(x, training=True), target)
        assert fd_check(f, [x, *blk.parameters()]) <= 1e-4
