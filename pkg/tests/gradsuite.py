"""Shared inventory of differentiable-op probes for finite-difference checks.

Each builder returns (store, fn) where fn() recomputes a scalar loss from the
store's float64 parameters.  The loss for most ops is a weighted sum of the
op output against fixed random coefficients, which exercises every output
element with a generic upstream gradient.
"""

import numpy as np

from movetone.engine import layers as L
from movetone.engine import tensor as T
from movetone.engine.params import ParameterStore


def _store(seed):
    return ParameterStore(dtype=np.float64), np.random.default_rng(seed)


def _away_from_kinks(values, margin=0.08):
    """Shift values whose magnitude is below ``margin`` so central differences
    never straddle a ReLU corner."""
    out = values.copy()
    small = np.abs(out) < margin
    out[small] += np.sign(out[small] + 1e-12) * 2 * margin
    return out


def _weighted_sum(out, coeffs):
    return T.reduce_sum(T.mul(out, T.Tensor(coeffs)))


def build_arithmetic(seed):
    store, rng = _store(seed)
    a = store.create("a", rng.normal(size=(3, 4)))
    b = store.create("b", rng.normal(size=(4,)))
    c = rng.normal(size=(3, 4))

    def fn():
        mixed = T.mul(T.add(a, b), T.add(T.mul(a, 0.5), 2.0))
        return _weighted_sum(T.add(mixed, T.mul(a, T.Tensor(c))), c + 0.3)

    return store, fn


def build_matmul(seed):
    store, rng = _store(seed)
    a = store.create("a", rng.normal(size=(2, 3, 4)))
    b = store.create("b", rng.normal(size=(4, 5)))
    c = rng.normal(size=(2, 3, 5))

    def fn():
        return _weighted_sum(T.matmul(a, b), c)

    return store, fn


def build_shapes(seed):
    store, rng = _store(seed)
    a = store.create("a", rng.normal(size=(3, 4, 2)))
    c = rng.normal(size=(4, 6))

    def fn():
        moved = T.transpose(a, (1, 0, 2))
        flat = T.reshape(moved, (4, 6))
        flipped = T.flip(flat, 0)
        joined = T.concat([flipped[:2], flipped[2:]], axis=0)
        return _weighted_sum(joined, c)

    return store, fn


def build_activations(seed):
    store, rng = _store(seed)
    a = store.create("a", _away_from_kinks(rng.normal(size=(4, 3))))
    c = rng.normal(size=(4, 3))

    def fn():
        mix = T.add(T.relu(a), T.add(T.sigmoid(a), T.tanh(a)))
        mix = T.add(mix, T.exp(T.mul(a, 0.3)))
        mix = T.add(mix, T.log(T.add(T.sigmoid(a), 1.0)))
        return _weighted_sum(mix, c)

    return store, fn


def build_reductions(seed):
    store, rng = _store(seed)
    a = store.create("a", rng.normal(size=(3, 5)))

    def fn():
        return T.add(
            T.reduce_sum(T.mul(a, a)),
            T.mul(T.reduce_mean(T.power(T.add(a, 3.0), 2.0), axis=1).sum(), 0.5),
        )

    return store, fn


def build_softmax(seed):
    store, rng = _store(seed)
    a = store.create("a", rng.normal(size=(4, 6)) * 2.0)
    c = rng.normal(size=(4, 6))

    def fn():
        return T.add(
            _weighted_sum(T.softmax(a, axis=-1), c),
            _weighted_sum(T.log_softmax(a, axis=-1), c * 0.2),
        )

    return store, fn


def build_embedding(seed):
    store, rng = _store(seed)
    table = store.create("table", rng.normal(size=(7, 3)))
    idx = rng.integers(0, 7, size=(2, 5))
    c = rng.normal(size=(2, 5, 3))

    def fn():
        return _weighted_sum(T.embedding(table, idx), c)

    return store, fn


def build_layer_norm(seed):
    store, rng = _store(seed)
    x = store.create("x", rng.normal(size=(3, 4, 6)))
    g = store.create("g", rng.normal(size=6) * 0.5 + 1.0)
    b = store.create("b", rng.normal(size=6) * 0.1)
    c = rng.normal(size=(3, 4, 6))

    def fn():
        return _weighted_sum(T.layer_norm(x, g, b), c)

    return store, fn


def build_conv1d(seed):
    store, rng = _store(seed)
    x = store.create("x", rng.normal(size=(2, 3, 11)))
    w = store.create("w", rng.normal(size=(4, 3, 3)) * 0.5)
    b = store.create("b", rng.normal(size=4) * 0.2)
    out_len = (11 + 2 * 1 - 3) // 2 + 1
    c = rng.normal(size=(2, 4, out_len))

    def fn():
        return _weighted_sum(T.conv1d(x, w, b, stride=2, padding=1), c)

    return store, fn


def build_conv1d_transpose(seed):
    store, rng = _store(seed)
    x = store.create("x", rng.normal(size=(2, 3, 6)))
    w = store.create("w", rng.normal(size=(3, 4, 4)) * 0.5)
    b = store.create("b", rng.normal(size=4) * 0.2)
    out_len = (6 - 1) * 2 + 4 - 2 * 1
    c = rng.normal(size=(2, 4, out_len))

    def fn():
        return _weighted_sum(T.conv1d_transpose(x, w, b, stride=2, padding=1), c)

    return store, fn


def build_attention(seed):
    store, rng = _store(seed)
    q = store.create("q", rng.normal(size=(2, 5, 3)))
    k = store.create("k", rng.normal(size=(2, 5, 3)))
    v = store.create("v", rng.normal(size=(2, 5, 4)))
    c = rng.normal(size=(2, 5, 4))

    def fn():
        plain = L.attention_forward(q, k, v, causal=False)
        masked = L.attention_forward(q, k, v, causal=True)
        return T.add(_weighted_sum(plain, c), _weighted_sum(masked, c * 0.7))

    return store, fn


def build_feed_forward(seed):
    store, rng = _store(seed)
    x = store.create("x", _away_from_kinks(rng.normal(size=(4, 3))))
    w1 = store.create("w1", rng.normal(size=(3, 6)))
    b1 = store.create("b1", rng.normal(size=6) * 0.5)
    w2 = store.create("w2", rng.normal(size=(6, 3)))
    b2 = store.create("b2", rng.normal(size=3) * 0.5)
    c = rng.normal(size=(4, 3))

    def fn():
        return _weighted_sum(L.feed_forward(x, w1, b1, w2, b2), c)

    return store, fn


def build_gru(seed):
    store, rng = _store(seed)
    gru = L.BiGRU(store, "gru", input_dim=3, hidden=2, layers=2, rng=rng)
    x = store.create("x", rng.normal(size=(5, 2, 3)))
    c = rng.normal(size=(2, 4))

    def fn():
        _, final = gru(x)
        return _weighted_sum(final, c)

    return store, fn


def build_multi_head_attention(seed):
    store, rng = _store(seed)
    mha = L.MultiHeadAttention(store, "mha", dim=4, heads=2, rng=rng)
    x = store.create("x", rng.normal(size=(2, 5, 4)))
    c = rng.normal(size=(2, 5, 4))

    def fn():
        return _weighted_sum(mha(x, causal=True), c)

    return store, fn


def build_stop_gradient(seed):
    store, rng = _store(seed)
    a = store.create("a", rng.normal(size=(3, 3)))
    c = rng.normal(size=(3, 3))

    def fn():
        # only the plain `a` path may carry gradient
        blocked = T.mul(T.stop_gradient(a), T.Tensor(c))
        return T.add(T.reduce_sum(blocked), T.reduce_sum(T.mul(a, 2.0)))

    return store, fn


ALL_BUILDERS = {
    "arithmetic": build_arithmetic,
    "matmul": build_matmul,
    "shapes": build_shapes,
    "activations": build_activations,
    "reductions": build_reductions,
    "softmax": build_softmax,
    "embedding": build_embedding,
    "layer_norm": build_layer_norm,
    "conv1d": build_conv1d,
    "conv1d_transpose": build_conv1d_transpose,
    "attention": build_attention,
    "feed_forward": build_feed_forward,
    "gru": build_gru,
    "multi_head_attention": build_multi_head_attention,
    "stop_gradient": build_stop_gradient,
}
