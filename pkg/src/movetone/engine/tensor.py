"""Reverse-mode automatic differentiation over an explicit operation tape.

Every operation builds a node holding its parents and a closure that routes
the upstream gradient to them; ``Tensor.backward`` walks the graph in reverse
topological order.  Arrays are plain numpy; the dtype of a graph is whatever
its leaves carry (float32 for training, float64 for gradient checks).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible, naming the offending axes."""


def _as_array(value, dtype=None):
    arr = np.asarray(value)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    elif arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """An array node on the tape.

    ``data`` is a numpy array, ``grad`` accumulates the gradient during the
    backward pass.  Nodes created by operations carry their parents and a
    backward closure; leaves carry neither.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _node(data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _accumulate(self, grad):
        if self.grad is None:
            # views (possibly zero-stride broadcasts) must not be mutated by a
            # later in-place accumulation
            self.grad = grad if grad.flags.owndata else grad.copy()
        else:
            self.grad += grad

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output, got shape %r" % (self.shape,))
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)
                node._backward = None
                node._parents = ()

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take_slice(self, index)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)


def as_tensor(value, like=None):
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(_as_array(value, dtype))


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- arithmetic ---------------------------------------------------------------


def add(a, b):
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    out_data = a.data + b.data

    def backward(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad, b.shape))

    return Tensor._node(out_data, (a, b), backward)


def mul(a, b):
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    out_data = a.data * b.data

    def backward(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad * a.data, b.shape))

    return Tensor._node(out_data, (a, b), backward)


def power(a, exponent):
    a = as_tensor(a)
    out_data = a.data ** exponent

    def backward(grad):
        if a.requires_grad:
            a._accumulate(grad * exponent * a.data ** (exponent - 1))

    return Tensor._node(out_data, (a,), backward)


def matmul(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise DimensionError(
            f"matmul inner axes disagree: a.shape[-1]={a.shape[-1]} vs b contraction axis={b.shape[-2 if b.ndim > 1 else 0]}"
        )
    out_data = a.data @ b.data

    def backward(grad):
        if a.requires_grad:
            if b.ndim == 1:
                ga = np.multiply.outer(grad, b.data) if grad.ndim else grad * b.data
            else:
                ga = grad @ np.swapaxes(b.data, -1, -2)
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            if a.ndim == 1:
                gb = np.multiply.outer(a.data, grad)
            elif b.ndim == 1:
                gb = (np.swapaxes(a.data, -1, -2) @ grad[..., None])[..., 0]
            else:
                gb = np.swapaxes(a.data, -1, -2) @ grad
            b._accumulate(_unbroadcast(gb, b.shape))

    return Tensor._node(out_data, (a, b), backward)


# -- shape manipulation -------------------------------------------------------


def reshape(a, shape):
    a = as_tensor(a)
    in_shape = a.shape
    out_data = a.data.reshape(shape)

    def backward(grad):
        a._accumulate(grad.reshape(in_shape))

    return Tensor._node(out_data, (a,), backward)


def transpose(a, axes=None):
    a = as_tensor(a)
    out_data = np.transpose(a.data, axes)
    inverse = None if axes is None else np.argsort(axes)

    def backward(grad):
        a._accumulate(np.transpose(grad, inverse))

    return Tensor._node(out_data, (a,), backward)


def swap_last_axes(a):
    a = as_tensor(a)
    out_data = np.swapaxes(a.data, -1, -2)

    def backward(grad):
        a._accumulate(np.swapaxes(grad, -1, -2))

    return Tensor._node(out_data, (a,), backward)


def flip(a, axis):
    a = as_tensor(a)
    out_data = np.flip(a.data, axis)

    def backward(grad):
        a._accumulate(np.flip(grad, axis))

    return Tensor._node(out_data, (a,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * grad.ndim
                index[axis] = slice(start, stop)
                t._accumulate(grad[tuple(index)])

    return Tensor._node(out_data, tuple(tensors), backward)


def take_slice(a, index):
    """Basic slicing on the tape; the backward pass scatters into zeros."""
    a = as_tensor(a)
    out_data = a.data[index]
    in_shape = a.shape

    def backward(grad):
        full = np.zeros(in_shape, dtype=grad.dtype)
        full[index] = grad
        a._accumulate(full)

    return Tensor._node(out_data, (a,), backward)


# -- elementwise nonlinearities ------------------------------------------------


def relu(a):
    a = as_tensor(a)
    out_data = np.maximum(a.data, 0.0)

    def backward(grad):
        a._accumulate(grad * (a.data > 0))

    return Tensor._node(out_data, (a,), backward)


def sigmoid(a):
    a = as_tensor(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(grad):
        a._accumulate(grad * out_data * (1.0 - out_data))

    return Tensor._node(out_data, (a,), backward)


def tanh(a):
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def backward(grad):
        a._accumulate(grad * (1.0 - out_data * out_data))

    return Tensor._node(out_data, (a,), backward)


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def backward(grad):
        a._accumulate(grad * out_data)

    return Tensor._node(out_data, (a,), backward)


def log(a):
    a = as_tensor(a)
    out_data = np.log(a.data)

    def backward(grad):
        a._accumulate(grad / a.data)

    return Tensor._node(out_data, (a,), backward)


# -- reductions ----------------------------------------------------------------


def reduce_sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    in_shape = a.shape

    def backward(grad):
        g = grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, in_shape).astype(g.dtype, copy=True))

    return Tensor._node(out_data, (a,), backward)


def reduce_mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod(
        [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    scaled = reduce_sum(a, axis, keepdims)
    return mul(scaled, 1.0 / float(count))


# -- softmax family -------------------------------------------------------------


def softmax(a, axis=-1):
    """Numerically stable softmax; the running max is detached, which leaves
    the gradient exact because softmax is shift-invariant."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(grad):
        inner = (grad * out_data).sum(axis=axis, keepdims=True)
        a._accumulate(out_data * (grad - inner))

    return Tensor._node(out_data, (a,), backward)


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out_data = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(grad):
        soft = np.exp(out_data)
        a._accumulate(grad - soft * grad.sum(axis=axis, keepdims=True))

    return Tensor._node(out_data, (a,), backward)


# -- structural ops --------------------------------------------------------------


def stop_gradient(a):
    """Identity in the forward pass with zero partial derivatives."""
    a = as_tensor(a)
    return Tensor(a.data)


def embedding(table, indices):
    """Row gather from a 2-D table; backward scatter-adds into the table."""
    table = as_tensor(table)
    idx = np.asarray(indices)
    if idx.min(initial=0) < 0 or (idx.size and idx.max() >= table.shape[0]):
        raise IndexError(f"embedding index out of range for table with {table.shape[0]} rows")
    out_data = table.data[idx]

    def backward(grad):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx.reshape(-1), grad.reshape(-1, table.shape[1]))
        table._accumulate(gt)

    return Tensor._node(out_data, (table,), backward)


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalization over the last axis with learned gain and bias."""
    x = as_tensor(x)
    gain = as_tensor(gain)
    bias = as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = xhat * gain.data + bias.data
    dim = x.shape[-1]

    def backward(grad):
        if gain.requires_grad:
            gain._accumulate((grad * xhat).reshape(-1, dim).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(grad.reshape(-1, dim).sum(axis=0))
        if x.requires_grad:
            gg = grad * gain.data
            m1 = gg.mean(axis=-1, keepdims=True)
            m2 = (gg * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gg - m1 - xhat * m2))

    return Tensor._node(out_data, (x, gain, bias), backward)


# -- 1-D convolutions -------------------------------------------------------------


def _conv_windows(data, width, stride, padding):
    if padding:
        data = np.pad(data, ((0, 0), (0, 0), (padding, padding)))
    windows = sliding_window_view(data, width, axis=2)[:, :, ::stride, :]
    return data.shape[2], windows


def conv1d(x, weight, bias=None, stride=1, padding=0):
    """Cross-correlation along the last axis.

    ``x`` is (C_in, T) or (B, C_in, T); ``weight`` is (C_out, C_in, K).
    Output length is floor((T + 2*padding - K)/stride) + 1.
    """
    x = as_tensor(x)
    weight = as_tensor(weight)
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    batch, c_in, t_in = xd.shape
    c_out, c_in_w, width = weight.shape
    if c_in != c_in_w:
        raise DimensionError(f"conv1d channel mismatch: input C_in={c_in}, weight C_in={c_in_w}")
    if width > t_in + 2 * padding:
        raise DimensionError(f"conv1d kernel width {width} exceeds padded length {t_in + 2 * padding}")
    if stride < 1:
        raise ValueError("conv1d stride must be >= 1")

    t_pad, windows = _conv_windows(xd, width, stride, padding)
    t_out = windows.shape[2]
    flat = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(batch, t_out, c_in * width)
    wmat = weight.data.reshape(c_out, c_in * width)
    y = flat @ wmat.T
    if bias is not None:
        bias = as_tensor(bias)
        y = y + bias.data
    out_data = y.transpose(0, 2, 1)
    if squeeze:
        out_data = out_data[0]
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(grad):
        g = grad[None] if squeeze else grad
        gflat = g.transpose(0, 2, 1)
        if bias is not None and bias.requires_grad:
            bias._accumulate(gflat.reshape(-1, c_out).sum(axis=0))
        if weight.requires_grad:
            gw = gflat.reshape(-1, c_out).T @ flat.reshape(-1, c_in * width)
            weight._accumulate(gw.reshape(c_out, c_in, width))
        if x.requires_grad:
            gwin = (gflat @ wmat).reshape(batch, t_out, c_in, width).transpose(0, 2, 1, 3)
            gx = np.zeros((batch, c_in, t_pad), dtype=g.dtype)
            for k in range(width):
                gx[:, :, k : k + stride * t_out : stride] += gwin[:, :, :, k]
            if padding:
                gx = gx[:, :, padding : padding + t_in]
            x._accumulate(gx[0] if squeeze else gx)

    return Tensor._node(out_data, parents, backward)


def conv1d_transpose(x, weight, bias=None, stride=1, padding=0):
    """Gradient-of-conv upsampling; output length (T-1)*stride + K - 2*padding.

    ``weight`` is (C_in, C_out, K).
    """
    x = as_tensor(x)
    weight = as_tensor(weight)
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    batch, c_in, t_in = xd.shape
    c_in_w, c_out, width = weight.shape
    if c_in != c_in_w:
        raise DimensionError(f"conv1d_transpose channel mismatch: input C_in={c_in}, weight C_in={c_in_w}")
    t_full = (t_in - 1) * stride + width
    t_out = t_full - 2 * padding
    if t_out < 1:
        raise DimensionError(f"conv1d_transpose output length {t_out} < 1")

    wmat = weight.data.reshape(c_in, c_out * width)
    cols = (xd.transpose(0, 2, 1) @ wmat).reshape(batch, t_in, c_out, width).transpose(0, 2, 1, 3)
    y = np.zeros((batch, c_out, t_full), dtype=xd.dtype)
    for k in range(width):
        y[:, :, k : k + stride * t_in : stride] += cols[:, :, :, k]
    if padding:
        y = y[:, :, padding : padding + t_out]
    if bias is not None:
        bias = as_tensor(bias)
        y = y + bias.data[:, None]
    out_data = y[0] if squeeze else y
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(grad):
        g = grad[None] if squeeze else grad
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2)))
        gfull = np.zeros((batch, c_out, t_full), dtype=g.dtype) if padding else g
        if padding:
            gfull[:, :, padding : padding + t_out] = g
        gcols = np.empty((batch, c_out, t_in, width), dtype=g.dtype)
        for k in range(width):
            gcols[:, :, :, k] = gfull[:, :, k : k + stride * t_in : stride]
        gcols_flat = gcols.transpose(0, 2, 1, 3).reshape(batch, t_in, c_out * width)
        if weight.requires_grad:
            gwm = np.tensordot(xd, gcols_flat, axes=([0, 2], [0, 1]))
            weight._accumulate(gwm.reshape(c_in, c_out, width))
        if x.requires_grad:
            gx = (gcols_flat @ wmat.T).transpose(0, 2, 1)
            x._accumulate(gx[0] if squeeze else gx)

    return Tensor._node(out_data, parents, backward)
