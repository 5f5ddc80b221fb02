"""Neural building blocks composed from tape operations.

Layers register their weights in a ParameterStore at construction (uniform
+-sqrt(1/fan_in), zero biases) and are plain callables afterwards.
"""

from __future__ import annotations

import numpy as np

from movetone import _kernels
from movetone.engine import tensor as T
from movetone.engine.params import ParameterStore
from movetone.engine.tensor import DimensionError, Tensor


class EmptySequenceError(ValueError):
    """A recurrent layer received a zero-length sequence."""


# -- functional ops -----------------------------------------------------------


def attention_forward(q, k, v, causal=False):
    """Scaled dot-product attention: softmax(QK^T / sqrt(D_k)) V.

    Operates on the last two axes; leading axes broadcast (batch, heads).
    With ``causal`` set, position t attends only to positions <= t.
    """
    q, k, v = T.as_tensor(q), T.as_tensor(k), T.as_tensor(v)
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError(
            f"attention key dim mismatch: Q last axis {q.shape[-1]} vs K last axis {k.shape[-1]}"
        )
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError(
            f"attention length mismatch: K has {k.shape[-2]} rows, V has {v.shape[-2]}"
        )
    t_q, t_k = q.shape[-2], k.shape[-2]
    if causal and t_q != t_k:
        raise DimensionError(f"causal attention requires square scores, got {t_q}x{t_k}")
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = T.mul(T.matmul(q, T.swap_last_axes(k)), scale)
    if causal:
        mask = np.triu(np.full((t_q, t_k), -1e9, dtype=q.dtype), k=1)
        scores = T.add(scores, Tensor(mask))
    weights = T.softmax(scores, axis=-1)
    return T.matmul(weights, v)


def attention_weights(q, k, causal=False):
    """The softmax weight matrix alone, as a plain array (for inspection)."""
    q = q.data if isinstance(q, Tensor) else np.asarray(q)
    k = k.data if isinstance(k, Tensor) else np.asarray(k)
    scores = q @ np.swapaxes(k, -1, -2) / np.sqrt(q.shape[-1])
    if causal:
        scores = scores + np.triu(np.full(scores.shape[-2:], -1e9, dtype=scores.dtype), k=1)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def feed_forward(x, w1, b1, w2, b2):
    """Two affine maps with a ReLU between: max(0, xW1 + b1) W2 + b2."""
    hidden = T.relu(T.add(T.matmul(x, w1), b1))
    return T.add(T.matmul(hidden, w2), b2)


def gru_scan(x, h0, wx, wh, bx, bh):
    """Fused single-direction GRU over (T, B, I) as one tape node.

    The forward and the backprop-through-time run in the selected kernel
    backend; gradients flow to x and all four weight tensors.
    """
    x = T.as_tensor(x)
    h0_data = h0 if isinstance(h0, np.ndarray) else h0.data
    states_data, cache = _kernels.gru_sequence_forward(
        x.data, h0_data, wx.data, wh.data, bx.data, bh.data
    )
    parents = (x, wx, wh, bx, bh)

    def backward(grad):
        dx, _, dwx, dwh, dbx, dbh = _kernels.gru_sequence_backward(
            np.ascontiguousarray(grad), cache
        )
        if x.requires_grad:
            x._accumulate(dx)
        if wx.requires_grad:
            wx._accumulate(dwx)
        if wh.requires_grad:
            wh._accumulate(dwh)
        if bx.requires_grad:
            bx._accumulate(dbx)
        if bh.requires_grad:
            bh._accumulate(dbh)

    return Tensor._node(states_data, parents, backward)


# -- layers ---------------------------------------------------------------------


class Linear:
    def __init__(self, store: ParameterStore, name: str, d_in: int, d_out: int, rng):
        self.w = store.uniform(f"{name}.w", (d_in, d_out), d_in, rng)
        self.b = store.zeros(f"{name}.b", (d_out,))

    def __call__(self, x):
        return T.add(T.matmul(x, self.w), self.b)


class Embedding:
    def __init__(self, store: ParameterStore, name: str, vocab: int, dim: int, rng):
        self.table = store.uniform(f"{name}.table", (vocab, dim), dim, rng)

    def __call__(self, indices):
        return T.embedding(self.table, indices)


class LayerNorm:
    def __init__(self, store: ParameterStore, name: str, dim: int):
        self.g = store.create(f"{name}.g", np.ones(dim))
        self.b = store.zeros(f"{name}.b", (dim,))

    def __call__(self, x):
        return T.layer_norm(x, self.g, self.b)


class Conv1d:
    def __init__(self, store, name, c_in, c_out, width, rng, stride=1, padding=0):
        self.stride = stride
        self.padding = padding
        self.w = store.uniform(f"{name}.w", (c_out, c_in, width), c_in * width, rng)
        self.b = store.zeros(f"{name}.b", (c_out,))

    def __call__(self, x):
        return T.conv1d(x, self.w, self.b, stride=self.stride, padding=self.padding)


class ConvTranspose1d:
    def __init__(self, store, name, c_in, c_out, width, rng, stride=1, padding=0):
        self.stride = stride
        self.padding = padding
        self.w = store.uniform(f"{name}.w", (c_in, c_out, width), c_in * width, rng)
        self.b = store.zeros(f"{name}.b", (c_out,))

    def __call__(self, x):
        return T.conv1d_transpose(x, self.w, self.b, stride=self.stride, padding=self.padding)


class FeedForward:
    def __init__(self, store, name, dim, inner, rng):
        self.w1 = store.uniform(f"{name}.w1", (dim, inner), dim, rng)
        self.b1 = store.zeros(f"{name}.b1", (inner,))
        self.w2 = store.uniform(f"{name}.w2", (inner, dim), inner, rng)
        self.b2 = store.zeros(f"{name}.b2", (dim,))

    def __call__(self, x):
        return feed_forward(x, self.w1, self.b1, self.w2, self.b2)


class MultiHeadAttention:
    """Head-split projection attention with a final linear merge."""

    def __init__(self, store, name, dim, heads, rng):
        if dim % heads:
            raise DimensionError(f"model dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.q = Linear(store, f"{name}.q", dim, dim, rng)
        self.k = Linear(store, f"{name}.k", dim, dim, rng)
        self.v = Linear(store, f"{name}.v", dim, dim, rng)
        self.out = Linear(store, f"{name}.out", dim, dim, rng)

    def _split(self, x, batch, t_len):
        # (B, T, D) -> (B, H, T, dh)
        return T.transpose(T.reshape(x, (batch, t_len, self.heads, self.head_dim)), (0, 2, 1, 3))

    def __call__(self, x_q, x_kv=None, causal=False):
        if x_kv is None:
            x_kv = x_q
        batch, t_q, _ = x_q.shape
        t_k = x_kv.shape[1]
        q = self._split(self.q(x_q), batch, t_q)
        k = self._split(self.k(x_kv), batch, t_k)
        v = self._split(self.v(x_kv), batch, t_k)
        ctx = attention_forward(q, k, v, causal=causal)
        merged = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (batch, t_q, self.heads * self.head_dim))
        return self.out(merged)


class BiGRU:
    """Stacked bidirectional GRU; inputs are (T, B, I), states (T, B, 2H)."""

    def __init__(self, store, name, input_dim, hidden, layers, rng):
        self.hidden = hidden
        self.layers = layers
        self.weights = []
        d_in = input_dim
        for layer in range(layers):
            per_dir = []
            for direction in ("fw", "bw"):
                prefix = f"{name}.l{layer}.{direction}"
                per_dir.append(
                    (
                        store.uniform(f"{prefix}.wx", (3 * hidden, d_in), d_in, rng),
                        store.uniform(f"{prefix}.wh", (3 * hidden, hidden), hidden, rng),
                        store.zeros(f"{prefix}.bx", (3 * hidden,)),
                        store.zeros(f"{prefix}.bh", (3 * hidden,)),
                    )
                )
            self.weights.append(per_dir)
            d_in = 2 * hidden

    def __call__(self, x):
        """Returns (states, final): (T, B, 2H) and (B, 2H) from the top layer."""
        if x.shape[0] == 0:
            raise EmptySequenceError("GRU input has zero time steps")
        batch = x.shape[1]
        h0 = np.zeros((batch, self.hidden), dtype=x.dtype)
        stream = x
        for layer, ((fwx, fwh, fbx, fbh), (bwx, bwh, bbx, bbh)) in enumerate(self.weights):
            fw = gru_scan(stream, h0, fwx, fwh, fbx, fbh)
            bw = T.flip(gru_scan(T.flip(stream, 0), h0, bwx, bwh, bbx, bbh), 0)
            stream = T.concat([fw, bw], axis=2)
        final = T.concat([fw[-1], bw[0]], axis=-1)
        return stream, final


def gru_bidirectional_forward(gru: BiGRU, x_features_by_time):
    """Single-sequence convenience: input (J, T) feature-major, output
    (states (2H, T), final (2H,))."""
    x = T.as_tensor(x_features_by_time)
    if x.shape[1] == 0:
        raise EmptySequenceError("GRU input has zero time steps")
    seq = T.reshape(T.transpose(x, (1, 0)), (x.shape[1], 1, x.shape[0]))
    states, final = gru(seq)
    return T.transpose(T.reshape(states, (x.shape[1], 2 * gru.hidden)), (1, 0)), final[0]
