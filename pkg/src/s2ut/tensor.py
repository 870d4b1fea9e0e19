"""Dense float64 tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a row-major ``numpy`` float64 array plus an
optional gradient buffer. Operations build a computation graph on the
fly; ``backward()`` on a scalar walks the graph in reverse topological
order and accumulates (``+=``) gradients into every reachable leaf.
Repeated backward calls without zeroing therefore sum contributions.

All computation is float64. Stochastic ops (dropout) take an explicit
:class:`~s2ut.rng.RngStream` so identical inputs and stream state give
bit-identical results.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import erf as _erf

_SQRT1_2 = math.sqrt(0.5)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LN_EPS = 1e-12

_grad_enabled = True


class no_grad:
    """Context manager that disables graph construction."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward = None

    # -- construction ---------------------------------------------------
    @staticmethod
    def zeros(shape, requires_grad=False) -> "Tensor":
        return Tensor(np.zeros(shape), requires_grad)

    @staticmethod
    def ones(shape, requires_grad=False) -> "Tensor":
        return Tensor(np.ones(shape), requires_grad)

    # -- bookkeeping ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- autograd -------------------------------------------------------
    def backward(self, seed: np.ndarray | None = None):
        """Reverse-mode sweep from this node.

        ``seed`` defaults to 1.0 and requires a scalar tensor. Gradients
        accumulate into ``.grad`` of every leaf (a tensor created with
        ``requires_grad=True`` rather than by an operation).
        """
        if seed is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar tensor")
            seed = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.asarray(seed, dtype=np.float64)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    if node.grad is None:
                        node.grad = g.copy()
                    else:
                        node.grad += g
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                acc = grads.get(id(parent))
                if acc is None:
                    # ops may hand back views or the upstream buffer itself;
                    # own the accumulator before in-place adds
                    grads[id(parent)] = np.array(pg)
                else:
                    acc += pg

    # -- operators ------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, k):
        return power(self, k)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 or not isinstance(shape[0], (tuple, list)) else shape[0])

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise arithmetic ---------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(g):
        return ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(g, b.data.shape)))

    return _make(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data

    def backward(g):
        return ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(-g, b.data.shape)))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward(g):
        return (
            (a, _unbroadcast(g * b.data, a.data.shape)),
            (b, _unbroadcast(g * a.data, b.data.shape)),
        )

    return _make(data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def backward(g):
        return (
            (a, _unbroadcast(g / b.data, a.data.shape)),
            (b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)),
        )

    return _make(data, (a, b), backward)


def power(a, k: float) -> Tensor:
    a = as_tensor(a)
    k = float(k)
    data = a.data**k

    def backward(g):
        return ((a, g * k * a.data ** (k - 1.0)),)

    return _make(data, (a,), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward(g):
        return ((a, g * data),)

    return _make(data, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)
    data = np.log(a.data)

    def backward(g):
        return ((a, g / a.data),)

    return _make(data, (a,), backward)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    data = np.sqrt(a.data)

    def backward(g):
        return ((a, g * 0.5 / data),)

    return _make(data, (a,), backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def backward(g):
        return ((a, g * (1.0 - data * data)),)

    return _make(data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        return ((a, g * data * (1.0 - data)),)

    return _make(data, (a,), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward(g):
        return ((a, g * (a.data > 0.0)),)

    return _make(data, (a,), backward)


def gelu(a) -> Tensor:
    """Exact (erf-based) GELU."""
    a = as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + _erf(x * _SQRT1_2))
    data = x * cdf

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return ((a, g * (cdf + x * pdf)),)

    return _make(data, (a,), backward)


def swish(a) -> Tensor:
    a = as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    data = a.data * s

    def backward(g):
        return ((a, g * (s + a.data * s * (1.0 - s))),)

    return _make(data, (a,), backward)


# -- reductions and shape ops --------------------------------------------

def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.data.shape).copy()),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return ((a, np.broadcast_to(g, a.data.shape).copy()),)

    return _make(data, (a,), backward)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis] if isinstance(axis, int) else int(np.prod([a.data.shape[i] for i in axis]))

    def backward(g):
        if axis is None:
            return ((a, np.broadcast_to(g / n, a.data.shape).copy()),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return ((a, np.broadcast_to(g / n, a.data.shape).copy()),)

    return _make(data, (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g):
        return ((a, g.reshape(a.data.shape)),)

    return _make(data, (a,), backward)


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    data = a.data.transpose(axes)

    def backward(g):
        if axes is None:
            return ((a, g.transpose()),)
        inv = np.argsort(axes)
        return ((a, g.transpose(inv)),)

    return _make(data, (a,), backward)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        out = []
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            out.append((p, g[tuple(idx)]))
        return tuple(out)

    return _make(data, tuple(parts), backward)


def getitem(a, key) -> Tensor:
    a = as_tensor(a)
    data = a.data[key]

    def backward(g):
        da = np.zeros_like(a.data)
        da[key] += g
        return ((a, da),)

    return _make(data, (a,), backward)


def pad1d(a, left: int, right: int) -> Tensor:
    """Zero-pad along axis -2 (the time axis of [..., T, C] tensors)."""
    a = as_tensor(a)
    width = [(0, 0)] * a.data.ndim
    width[-2] = (left, right)
    data = np.pad(a.data, width)
    t = a.data.shape[-2]

    def backward(g):
        idx = [slice(None)] * g.ndim
        idx[-2] = slice(left, left + t)
        return ((a, g[tuple(idx)]),)

    return _make(data, (a,), backward)


# -- linear algebra -------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul requires tensors with ndim >= 2")
    data = np.matmul(a.data, b.data)

    def backward(g):
        da = np.matmul(g, np.swapaxes(b.data, -1, -2))
        db = np.matmul(np.swapaxes(a.data, -1, -2), g)
        if da.shape != a.data.shape:
            da = _unbroadcast(da, a.data.shape)
        if db.shape != b.data.shape:
            db = _unbroadcast(db, b.data.shape)
        return ((a, da), (b, db))

    return _make(data, (a, b), backward)


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup into ``weight`` [V, d] by an integer array of any shape."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.data.shape[0]):
        raise ValueError("embedding ids out of range")
    data = weight.data[ids]

    def backward(g):
        dw = np.zeros_like(weight.data)
        np.add.at(dw, ids.reshape(-1), g.reshape(-1, weight.data.shape[1]))
        return ((weight, dw),)

    return _make(data, (weight,), backward)


def take_along_last(a, ids: np.ndarray) -> Tensor:
    """Per-row gather: out[...] = a[..., ids[...]] with ids shaped like a[..., 0]."""
    a = as_tensor(a)
    ids = np.asarray(ids)
    data = np.take_along_axis(a.data, ids[..., None], axis=-1)[..., 0]

    def backward(g):
        da = np.zeros_like(a.data)
        mesh = np.meshgrid(*[np.arange(s) for s in ids.shape], indexing="ij") if ids.ndim else []
        np.add.at(da, tuple(mesh) + (ids,), g)
        return ((a, da),)

    return _make(data, (a,), backward)


# -- fused neural-net ops --------------------------------------------------

def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return ((a, data * (g - dot)),)

    return _make(data, (a,), backward)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse

    def backward(g):
        return ((a, g - np.exp(data) * g.sum(axis=axis, keepdims=True)),)

    return _make(data, (a,), backward)


def layer_norm(a, eps: float = _LN_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance (no affine)."""
    a = as_tensor(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    data = xc * inv

    def backward(g):
        n = a.data.shape[-1]
        gm = g.mean(axis=-1, keepdims=True)
        gxm = (g * data).mean(axis=-1, keepdims=True)
        return ((a, inv * (g - gm - data * gxm)),)

    return _make(data, (a,), backward)


def conv1d(a, w, stride: int = 1) -> Tensor:
    """1-D convolution, no padding.

    ``a`` is [B, T, C_in], ``w`` is [K, C_in, C_out]; output is
    [B, T', C_out] with T' = floor((T - K) / stride) + 1.
    """
    a, w = as_tensor(a), as_tensor(w)
    if a.data.ndim != 3 or w.data.ndim != 3:
        raise ValueError("conv1d expects input [B, T, C_in] and weight [K, C_in, C_out]")
    k = w.data.shape[0]
    t = a.data.shape[1]
    if t < k:
        raise ValueError(f"conv1d input length {t} shorter than kernel {k}")
    windows = np.lib.stride_tricks.sliding_window_view(a.data, k, axis=1)
    # windows: [B, T-K+1, C_in, K] -> subsample stride
    windows = windows[:, ::stride]
    data = np.einsum("btck,kco->bto", windows, w.data)
    t_out = data.shape[1]

    def backward(g):
        dw = np.einsum("btck,bto->kco", windows, g)
        da = np.zeros_like(a.data)
        dwin = np.einsum("bto,kco->btkc", g, w.data)
        for j in range(k):
            da[:, j : j + stride * t_out : stride] += dwin[:, :, j]
        return ((a, da), (w, dw))

    return _make(data, (a, w), backward)


def depthwise_conv1d(a, w) -> Tensor:
    """Per-channel 1-D convolution, no padding; ``a`` [B, T, C], ``w`` [K, C]."""
    a, w = as_tensor(a), as_tensor(w)
    if a.data.ndim != 3 or w.data.ndim != 2:
        raise ValueError("depthwise_conv1d expects input [B, T, C] and weight [K, C]")
    k = w.data.shape[0]
    t = a.data.shape[1]
    if t < k:
        raise ValueError(f"depthwise_conv1d input length {t} shorter than kernel {k}")
    windows = np.lib.stride_tricks.sliding_window_view(a.data, k, axis=1)
    data = np.einsum("btck,kc->btc", windows, w.data)
    t_out = data.shape[1]

    def backward(g):
        dw = np.einsum("btck,btc->kc", windows, g)
        da = np.zeros_like(a.data)
        for j in range(k):
            da[:, j : j + t_out] += g * w.data[j]
        return ((a, da), (w, dw))

    return _make(data, (a, w), backward)


def dropout(a, p: float, rng, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    a = as_tensor(a)
    if not training or p <= 0.0:
        return a
    keep = np.asarray(rng.bernoulli(1.0 - p, a.data.shape), dtype=np.float64) / (1.0 - p)
    data = a.data * keep

    def backward(g):
        return ((a, g * keep),)

    return _make(data, (a,), backward)


def custom_op(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    """Create a graph node with an explicit backward closure.

    ``backward(g)`` must return a sequence of ``(parent, grad_array)``
    pairs, one per differentiable parent.
    """
    return _make(np.asarray(data, dtype=np.float64), tuple(parents), backward)
