"""Network layers: dilated causal convolution, batch normalization, LSTM,
dense, dropout and the TCN residual block.

Sequences are (batch, time, channels) float64. The LSTM sequence layer has a
hand-written BPTT backward (one graph node for the whole sequence) because a
step-by-step graph is too slow at 150-frame windows; `lstm_step` is the
plain composed-op reference cell the fused layer is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from . import tensor as T
from .tensor import Parameter, as_tensor


# ---------------------------------------------------------------------------
# configuration

@dataclass
class TcnConfig:
    kernel_size: int = 2
    n_filters: int = 64
    dilations: tuple | None = None   # None -> grown at build to cover the window
    n_stacks: int = 1
    dropout: float = 0.3
    norm: str = "batchnorm"          # or "rescale"
    convs_per_block: int = 2

    def resolved_dilations(self, window_length):
        """Default schedule {1, 2, 4, ...} grown until the effective span of
        the residual-block stack covers the window."""
        if self.dilations is not None:
            return tuple(self.dilations)
        dil = [1]
        while effective_span(
            self.kernel_size, dil, self.n_stacks, self.convs_per_block
        ) < window_length:
            dil.append(dil[-1] * 2)
        return tuple(dil)


def receptive_field(config: TcnConfig) -> int:
    """1 + (K - 1) * N_stack * sum(d): the dependency span of a plain stack
    of dilated causal convolutions, one conv per dilation level per stack."""
    if config.dilations is None:
        raise ValueError("receptive_field needs explicit dilations")
    return 1 + (config.kernel_size - 1) * config.n_stacks * int(sum(config.dilations))


def effective_span(kernel_size, dilations, n_stacks=1, convs_per_block=2):
    """Dependency span of a residual-block stack (convs_per_block convs share
    each block's dilation)."""
    return 1 + convs_per_block * (kernel_size - 1) * n_stacks * int(sum(dilations))


# ---------------------------------------------------------------------------
# initialization

def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# module base

class Module:
    """Parameter container; submodules are discovered from attributes."""

    def named_parameters(self, prefix=""):
        out = []
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                out.append((name, value))
            elif isinstance(value, Module):
                out.extend(value.named_parameters(prefix=f"{name}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(prefix=f"{name}.{i}."))
                    elif isinstance(item, Parameter):
                        out.append((f"{name}.{i}", item))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def n_parameters(self):
        return sum(p.data.size for p in self.parameters())

    def state_arrays(self):
        """name -> array for checkpointing, including non-trainable buffers."""
        out = {name: p.data for name, p in self.named_parameters()}
        for key, value in vars(self).items():
            if isinstance(value, Module):
                for n, a in value.state_arrays().items():
                    out.setdefault(f"{key}.{n}", a)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        for n, a in item.state_arrays().items():
                            out.setdefault(f"{key}.{i}.{n}", a)
        for n, a in getattr(self, "_buffers", {}).items():
            out[n] = a
        return out

    def load_state_arrays(self, state, prefix=""):
        for name, p in self.named_parameters():
            p.data[...] = state[name]
        self._load_buffers(state, "")

    def _load_buffers(self, state, prefix):
        for n, a in getattr(self, "_buffers", {}).items():
            key = f"{prefix}{n}"
            if key in state:
                a[...] = state[key]
        for key, value in vars(self).items():
            if isinstance(value, Module):
                value._load_buffers(state, f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        item._load_buffers(state, f"{prefix}{key}.{i}.")


# ---------------------------------------------------------------------------
# functional ops

def dilated_causal_conv(x, filters, dilation, bias=None):
    """out(s) = sum_i f(i) . x(s - d*i), left zero-padded to keep length.

    x: (B, T, C_in) or (T, C_in); filters: (k, C_in, C_out).
    """
    x = as_tensor(x)
    w = as_tensor(filters)
    squeeze = x.data.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3 or w.data.ndim != 3 or w.data.shape[1] != xd.shape[2]:
        raise ShapeMismatch(
            f"conv expects (B,T,Cin) x (k,Cin,Cout); got {x.data.shape} and {w.data.shape}"
        )
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    k = w.data.shape[0]
    B, T_len, _ = xd.shape
    c_out = w.data.shape[2]
    out = xd @ w.data[0]  # tap 0 has no shift
    for i in range(1, k):
        shift = dilation * i
        if shift >= T_len:
            continue
        out[:, shift:, :] += xd[:, : T_len - shift, :] @ w.data[i]
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data

    parents = (x, w) if bias is None else (x, w, bias)

    def backward(g):
        gg = g[None] if squeeze else g
        if x.requires_grad:
            dx = gg @ w.data[0].T
            for i in range(1, k):
                shift = dilation * i
                if shift >= T_len:
                    continue
                dx[:, : T_len - shift, :] += gg[:, shift:, :] @ w.data[i].T
            x._accumulate(dx[0] if squeeze else dx, fresh=not squeeze)
        if w.requires_grad:
            dw = np.empty_like(w.data)
            flat_x = xd.reshape(-1, xd.shape[2])
            flat_g = gg.reshape(-1, c_out)
            dw[0] = flat_x.T @ flat_g
            for i in range(1, k):
                shift = dilation * i
                if shift >= T_len:
                    dw[i] = 0.0
                    continue
                dw[i] = np.tensordot(
                    xd[:, : T_len - shift, :], gg[:, shift:, :], axes=([0, 1], [0, 1])
                )
            w._accumulate(dw, fresh=True)
        if bias is not None and bias.requires_grad:
            bias._accumulate(gg.sum(axis=(0, 1)), fresh=True)

    out_data = out[0] if squeeze else out
    return T._node(out_data, parents, backward)


def dropout(x, rate, training, rng=None):
    """Inverted dropout; identity at inference or rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = rng.random(x.data.shape, dtype=np.float32) >= rate
    scale = 1.0 / (1.0 - rate)
    mask = keep * scale

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * mask, fresh=True)

    return T._node(x.data * mask, (x,), backward)


def lstm_step(x_t, h_prev, c_prev, W, U, b):
    """One LSTM cell step from composed primitive ops (reference path).

    Gate packing along the last axis of W/U/b is [i, f, g, o].
    Returns (h_t, c_t) tensors.
    """
    x_t, h_prev, c_prev = as_tensor(x_t), as_tensor(h_prev), as_tensor(c_prev)
    W, U, b = as_tensor(W), as_tensor(U), as_tensor(b)
    H = U.data.shape[0]
    if W.data.shape[1] != 4 * H or b.data.shape[-1] != 4 * H:
        raise ShapeMismatch("LSTM parameters disagree on hidden size")
    if x_t.data.shape[-1] != W.data.shape[0]:
        raise ShapeMismatch(
            f"LSTM input width {x_t.data.shape[-1]} != W rows {W.data.shape[0]}"
        )
    z = T.add(T.add(T.matmul(x_t, W), T.matmul(h_prev, U)), b)
    i = T.sigmoid(T.col_slice(z, 0, H))
    f = T.sigmoid(T.col_slice(z, H, 2 * H))
    g = T.tanh(T.col_slice(z, 2 * H, 3 * H))
    o = T.sigmoid(T.col_slice(z, 3 * H, 4 * H))
    c_t = T.add(T.mul(f, c_prev), T.mul(i, g))
    h_t = T.mul(o, T.tanh(c_t))
    return h_t, c_t


def lstm_sequence(x, W, U, b):
    """Fused LSTM over a (B, T, C) sequence -> (B, T, H) hidden states.

    Single graph node with a hand-written BPTT backward; initial states are
    zero.
    """
    x = as_tensor(x)
    W, U, b = as_tensor(W), as_tensor(U), as_tensor(b)
    H = U.data.shape[0]
    if x.data.shape[-1] != W.data.shape[0] or W.data.shape[1] != 4 * H:
        raise ShapeMismatch("lstm_sequence shape disagreement")
    B, T_len, _ = x.data.shape

    xW = x.data @ W.data  # (B, T, 4H)
    hs = np.zeros((B, T_len, H))
    gates_i = np.zeros((B, T_len, H))
    gates_f = np.zeros((B, T_len, H))
    gates_g = np.zeros((B, T_len, H))
    gates_o = np.zeros((B, T_len, H))
    cs_prev = np.zeros((B, T_len, H))
    taus = np.zeros((B, T_len, H))

    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T_len):
        z = xW[:, t, :] + h @ U.data + b.data
        i = 1.0 / (1.0 + np.exp(-z[:, :H]))
        f = 1.0 / (1.0 + np.exp(-z[:, H:2 * H]))
        g = np.tanh(z[:, 2 * H:3 * H])
        o = 1.0 / (1.0 + np.exp(-z[:, 3 * H:]))
        cs_prev[:, t, :] = c
        c = f * c + i * g
        tau = np.tanh(c)
        h = o * tau
        gates_i[:, t, :] = i
        gates_f[:, t, :] = f
        gates_g[:, t, :] = g
        gates_o[:, t, :] = o
        taus[:, t, :] = tau
        hs[:, t, :] = h

    def backward(gH):
        dW = np.zeros_like(W.data) if W.requires_grad else None
        dU = np.zeros_like(U.data) if U.requires_grad else None
        db = np.zeros_like(b.data) if b.requires_grad else None
        dx = np.zeros_like(x.data) if x.requires_grad else None
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        dz = np.zeros((B, 4 * H))
        for t in range(T_len - 1, -1, -1):
            i, f = gates_i[:, t, :], gates_f[:, t, :]
            g, o = gates_g[:, t, :], gates_o[:, t, :]
            tau = taus[:, t, :]
            dh = gH[:, t, :] + dh_next
            do = dh * tau
            dc = dc_next + dh * o * (1.0 - tau * tau)
            di = dc * g
            dg = dc * i
            df = dc * cs_prev[:, t, :]
            dc_next = dc * f
            dz[:, :H] = di * i * (1.0 - i)
            dz[:, H:2 * H] = df * f * (1.0 - f)
            dz[:, 2 * H:3 * H] = dg * (1.0 - g * g)
            dz[:, 3 * H:] = do * o * (1.0 - o)
            h_prev = hs[:, t - 1, :] if t > 0 else np.zeros((B, H))
            if dW is not None:
                dW += x.data[:, t, :].T @ dz
            if dU is not None:
                dU += h_prev.T @ dz
            if db is not None:
                db += dz.sum(axis=0)
            if dx is not None:
                dx[:, t, :] = dz @ W.data.T
            dh_next = dz @ U.data.T
        if x.requires_grad:
            x._accumulate(dx, fresh=True)
        if W.requires_grad:
            W._accumulate(dW, fresh=True)
        if U.requires_grad:
            U._accumulate(dU, fresh=True)
        if b.requires_grad:
            b._accumulate(db, fresh=True)

    return T._node(hs, (x, W, U, b), backward)


# ---------------------------------------------------------------------------
# layer classes

class Dense(Module):
    def __init__(self, in_dim, out_dim, activation="none", rng=None, name="dense"):
        rng = rng or np.random.default_rng(0)
        self.W = Parameter(
            glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim), name=f"{name}.W"
        )
        self.b = Parameter(np.zeros(out_dim), name=f"{name}.b")
        self.activation = activation

    def __call__(self, x):
        return dense(x, self.W, self.b, self.activation)


def dense(x, W, b, activation="none"):
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if x.data.shape[-1] != W.data.shape[0]:
        raise ShapeMismatch(f"dense: {x.data.shape} @ {W.data.shape}")
    out = T.add(T.matmul(x, W), b)
    if activation == "none":
        return out
    if activation == "relu":
        return T.relu(out)
    if activation == "tanh":
        return T.tanh(out)
    if activation == "softmax":
        return T.softmax(out, axis=-1)
    raise ValueError(f"unknown activation {activation!r}")


class BatchNormSeq(Module):
    """Batch normalization over (batch, time) per channel with running stats."""

    def __init__(self, channels, momentum=0.9, eps=1e-5, name="bn"):
        self.gamma = Parameter(np.ones(channels), name=f"{name}.gamma")
        self.beta = Parameter(np.zeros(channels), name=f"{name}.beta")
        self.momentum = momentum
        self.eps = eps
        self._buffers = {
            "running_mean": np.zeros(channels),
            "running_var": np.ones(channels),
        }

    def __call__(self, x, training):
        x = as_tensor(x)
        if x.data.ndim != 3:
            raise ShapeMismatch("BatchNormSeq expects (B, T, C)")
        gamma, beta, eps = self.gamma, self.beta, self.eps
        if training:
            mu = x.data.mean(axis=(0, 1))
            var = x.data.var(axis=(0, 1))
            rm, rv = self._buffers["running_mean"], self._buffers["running_var"]
            rm *= self.momentum
            rm += (1.0 - self.momentum) * mu
            rv *= self.momentum
            rv += (1.0 - self.momentum) * var
        else:
            mu = self._buffers["running_mean"]
            var = self._buffers["running_var"]
        inv = 1.0 / np.sqrt(var + eps)
        xhat = x.data - mu
        xhat *= inv
        out = xhat * gamma.data
        out += beta.data
        m = x.data.shape[0] * x.data.shape[1]

        def backward(g):
            gx = g * xhat
            if gamma.requires_grad:
                gamma._accumulate(gx.sum(axis=(0, 1)), fresh=True)
            if beta.requires_grad:
                beta._accumulate(g.sum(axis=(0, 1)), fresh=True)
            if x.requires_grad:
                if training:
                    gsum = g.sum(axis=(0, 1)) / m
                    gxsum = gx.sum(axis=(0, 1)) / m
                    # dx = gamma*inv * (g - gsum - xhat*gxsum), built in place
                    dx = xhat * gxsum
                    dx += gsum
                    np.subtract(g, dx, out=dx)
                    dx *= gamma.data * inv
                    x._accumulate(dx, fresh=True)
                else:
                    x._accumulate(g * (gamma.data * inv), fresh=True)

        return T._node(out, (x, gamma, beta), backward)


class ChannelRescale(Module):
    """Learned per-channel affine (the batch-norm-free alternative)."""

    def __init__(self, channels, name="rescale"):
        self.gamma = Parameter(np.ones(channels), name=f"{name}.gamma")
        self.beta = Parameter(np.zeros(channels), name=f"{name}.beta")

    def __call__(self, x, training):
        return T.add(T.mul(x, self.gamma), self.beta)


class CausalConv(Module):
    def __init__(self, kernel_size, in_channels, out_channels, dilation, rng=None,
                 name="conv"):
        rng = rng or np.random.default_rng(0)
        fan_in = kernel_size * in_channels
        self.W = Parameter(
            glorot_uniform(rng, (kernel_size, in_channels, out_channels),
                           fan_in, out_channels),
            name=f"{name}.W",
        )
        self.b = Parameter(np.zeros(out_channels), name=f"{name}.b")
        self.dilation = dilation

    def __call__(self, x):
        return dilated_causal_conv(x, self.W, self.dilation, self.b)


class ResidualBlock(Module):
    """Two (conv -> norm -> ReLU -> dropout) stages plus a skip connection,
    with a 1x1 projection when channel counts differ. The stage sum is
    returned without a further activation."""

    def __init__(self, in_channels, out_channels, kernel_size, dilation,
                 dropout_rate=0.3, norm="batchnorm", rng=None, name="block"):
        rng = rng or np.random.default_rng(0)
        norm_cls = BatchNormSeq if norm == "batchnorm" else ChannelRescale
        self.conv1 = CausalConv(kernel_size, in_channels, out_channels, dilation,
                                rng, f"{name}.conv1")
        self.norm1 = norm_cls(out_channels, name=f"{name}.norm1")
        self.conv2 = CausalConv(kernel_size, out_channels, out_channels, dilation,
                                rng, f"{name}.conv2")
        self.norm2 = norm_cls(out_channels, name=f"{name}.norm2")
        self.projection = None
        if in_channels != out_channels:
            self.projection = CausalConv(1, in_channels, out_channels, 1,
                                         rng, f"{name}.proj")
        self.dropout_rate = dropout_rate

    def __call__(self, x, training=False, rng=None):
        y = self.conv1(x)
        y = self.norm1(y, training)
        y = T.relu(y)
        y = dropout(y, self.dropout_rate, training, rng)
        y = self.conv2(y)
        y = self.norm2(y, training)
        y = T.relu(y)
        y = dropout(y, self.dropout_rate, training, rng)
        skip = x if self.projection is None else self.projection(x)
        return T.add(y, skip)


class LstmLayer(Module):
    """One LSTM layer over a sequence; forget-gate bias starts at +1."""

    def __init__(self, in_dim, hidden, rng=None, name="lstm"):
        rng = rng or np.random.default_rng(0)
        self.W = Parameter(
            glorot_uniform(rng, (in_dim, 4 * hidden), in_dim, 4 * hidden),
            name=f"{name}.W",
        )
        self.U = Parameter(
            glorot_uniform(rng, (hidden, 4 * hidden), hidden, 4 * hidden),
            name=f"{name}.U",
        )
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        self.b = Parameter(b, name=f"{name}.b")
        self.hidden = hidden

    def __call__(self, x):
        return lstm_sequence(x, self.W, self.U, self.b)

    def step(self, x_t, h_prev, c_prev):
        return lstm_step(x_t, h_prev, c_prev, self.W, self.U, self.b)
