"""Parameter modules and core neural layers.

Modules register parameters under a dotted naming grammar
(``component.layer_index.sublayer.role``, e.g.
``encoder.3.self_attn.q_weight`` or ``decoder.1.encoder_attn.out_bias``)
that the partial-finetuning partitioner keys on. Initialization draws come
from a stream derived per parameter name, so values never depend on
construction order.

``meta_params()`` switches construction to shape-only stubs, letting
full-scale configurations be counted without allocating their buffers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..rng import RngStream
from ..tensor import Tensor

NEG_INF = -1e9

_meta_mode = False


class meta_params:
    """Construct models with shape-only parameter stubs (for counting)."""

    def __enter__(self):
        global _meta_mode
        self._prev = _meta_mode
        _meta_mode = True
        return self

    def __exit__(self, *exc):
        global _meta_mode
        _meta_mode = self._prev
        return False


@dataclass
class MetaParam:
    shape: tuple

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1


class Module:
    """Minimal parameter/children registry with dotted names."""

    def __init__(self):
        self._params: dict[str, Tensor | MetaParam] = {}
        self._children: dict[str, Module] = {}

    def param(self, name: str, shape: tuple, init: str, rng: RngStream | None) -> Tensor | MetaParam:
        if _meta_mode:
            p = MetaParam(tuple(shape))
        elif init == "zeros":
            p = Tensor(np.zeros(shape), requires_grad=True)
        elif init == "ones":
            p = Tensor(np.ones(shape), requires_grad=True)
        elif init == "trunc_normal":
            p = Tensor(rng.split("init", name).truncated_normal(shape, std=0.02), requires_grad=True)
        else:
            raise ValueError(f"unknown init {init!r}")
        self._params[name] = p
        return p

    def child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_params(self, prefix: str = "") -> dict[str, Tensor | MetaParam]:
        out = {}
        for name, p in self._params.items():
            out[f"{prefix}{name}" if prefix else name] = p
        for name, c in self._children.items():
            sub = f"{prefix}{name}." if prefix else f"{name}."
            out.update(c.named_params(sub))
        return out

    def zero_grads(self):
        for p in self.named_params().values():
            if isinstance(p, Tensor):
                p.grad = None


def param_count(params: dict) -> int:
    total = 0
    for p in params.values():
        total += p.size if isinstance(p, MetaParam) else p.data.size
    return total


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: RngStream | None):
        super().__init__()
        self.weight = self.param("weight", (d_in, d_out), "trunc_normal", rng)
        self.bias = self.param("bias", (d_out,), "zeros", rng)

    def forward(self, x: Tensor) -> Tensor:
        return T.matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, d: int, rng=None):
        super().__init__()
        self.gain = self.param("gain", (d,), "ones", None)
        self.bias = self.param("bias", (d,), "zeros", None)

    def forward(self, x: Tensor) -> Tensor:
        return T.layer_norm(x) * self.gain + self.bias


class Embedding(Module):
    def __init__(self, vocab: int, d: int, rng: RngStream | None):
        super().__init__()
        self.weight = self.param("weight", (vocab, d), "trunc_normal", rng)

    def forward(self, ids: np.ndarray) -> Tensor:
        return T.embedding(self.weight, ids)


class LearnedPositions(Module):
    def __init__(self, max_positions: int, d: int, rng: RngStream | None):
        super().__init__()
        self.max_positions = max_positions
        self.weight = self.param("weight", (max_positions, d), "trunc_normal", rng)

    def forward(self, x: Tensor) -> Tensor:
        t = x.shape[-2]
        if t > self.max_positions:
            raise ValueError(f"sequence length {t} exceeds max positions {self.max_positions}")
        return x + self.weight[:t]


_sinusoid_cache: dict[tuple[int, int], np.ndarray] = {}


def sinusoidal_positions(t: int, d: int) -> np.ndarray:
    key = (t, d)
    if key not in _sinusoid_cache:
        pos = np.arange(t)[:, None]
        dim = np.arange(0, d, 2)[None, :]
        angle = pos / np.power(10_000.0, dim / d)
        table = np.zeros((t, d))
        table[:, 0::2] = np.sin(angle)
        table[:, 1::2] = np.cos(angle[:, : table[:, 1::2].shape[1]])
        _sinusoid_cache[key] = table
    return _sinusoid_cache[key]


class MultiHeadAttention(Module):
    """Scaled dot-product attention with additive masks."""

    def __init__(self, d: int, n_heads: int, rng: RngStream | None):
        super().__init__()
        if d % n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        self.d = d
        self.n_heads = n_heads
        self.head_dim = d // n_heads
        for role in ("q", "k", "v", "out"):
            setattr(self, f"{role}_weight", self.param(f"{role}_weight", (d, d), "trunc_normal", rng))
            setattr(self, f"{role}_bias", self.param(f"{role}_bias", (d,), "zeros", rng))

    def _split_heads(self, x: Tensor, b: int, t: int) -> Tensor:
        return T.transpose(T.reshape(x, (b, t, self.n_heads, self.head_dim)), (0, 2, 1, 3))

    def forward(self, query: Tensor, kv: Tensor, mask: np.ndarray | None = None) -> Tensor:
        b, t_q = query.shape[0], query.shape[1]
        t_k = kv.shape[1]
        q = self._split_heads(T.matmul(query, self.q_weight) + self.q_bias, b, t_q)
        k = self._split_heads(T.matmul(kv, self.k_weight) + self.k_bias, b, t_k)
        v = self._split_heads(T.matmul(kv, self.v_weight) + self.v_bias, b, t_k)
        scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(self.head_dim))
        if mask is not None:
            scores = scores + Tensor(mask)
        attn = T.softmax(scores, axis=-1)
        ctx = T.matmul(attn, v)
        merged = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (b, t_q, self.d))
        return T.matmul(merged, self.out_weight) + self.out_bias


class FeedForward(Module):
    def __init__(self, d: int, ffn_dim: int, rng: RngStream | None):
        super().__init__()
        self.fc1 = self.child("fc1", Linear(d, ffn_dim, rng))
        self.fc2 = self.child("fc2", Linear(ffn_dim, d, rng))

    def forward(self, x: Tensor, dropout: float, mode: str, rng: RngStream | None) -> Tensor:
        h = T.gelu(self.fc1.forward(x))
        h = T.dropout(h, dropout, rng, mode == "train")
        return self.fc2.forward(h)


def lengths_to_pad_mask(lengths: np.ndarray, t: int) -> np.ndarray:
    """[B, T] True at padded positions."""
    return np.arange(t)[None, :] >= np.asarray(lengths)[:, None]


def key_pad_additive(pad_mask: np.ndarray) -> np.ndarray:
    """[B, 1, 1, T_k] additive mask from a boolean pad mask."""
    return np.where(pad_mask, NEG_INF, 0.0)[:, None, None, :]


_causal_cache: dict[int, np.ndarray] = {}


def causal_additive(t: int) -> np.ndarray:
    """[1, 1, T, T] additive mask hiding positions > query index."""
    if t not in _causal_cache:
        m = np.triu(np.full((t, t), NEG_INF), k=1)
        _causal_cache[t] = m[None, None]
    return _causal_cache[t]


def zero_padded(x: Tensor, pad_mask: np.ndarray) -> Tensor:
    """Zero features at padded positions (keeps convs padding-invariant)."""
    return x * (~pad_mask).astype(np.float64)[:, :, None]
