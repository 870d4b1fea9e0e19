"""Transformer and Conformer stacks plus the token sequence-to-sequence model.

All blocks are pre-norm. Encoder stacks honor layerdrop (per-layer
Bernoulli skip, train mode only) and expose every intermediate layer
output for auxiliary heads. Decoders share one tensor between the input
embedding and the output projection.
"""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..configs import ModelConfig
from ..rng import RngStream
from ..tensor import Tensor
from .layers import (
    Embedding,
    FeedForward,
    LayerNorm,
    LearnedPositions,
    Linear,
    Module,
    MultiHeadAttention,
    causal_additive,
    key_pad_additive,
    lengths_to_pad_mask,
    sinusoidal_positions,
    zero_padded,
)


class TransformerEncoderBlock(Module):
    def __init__(self, cfg: ModelConfig, rng):
        super().__init__()
        d = cfg.d_model
        self.cfg = cfg
        self.ln1 = self.child("ln1", LayerNorm(d))
        self.self_attn = self.child("self_attn", MultiHeadAttention(d, cfg.n_heads, rng))
        self.ln2 = self.child("ln2", LayerNorm(d))
        self.fc1 = self.child("fc1", Linear(d, cfg.ffn_dim, rng))
        self.fc2 = self.child("fc2", Linear(cfg.ffn_dim, d, rng))

    def forward(self, x: Tensor, attn_mask, mode: str, rng) -> Tensor:
        train = mode == "train"
        h = self.ln1.forward(x)
        h = self.self_attn.forward(h, h, attn_mask)
        x = x + T.dropout(h, self.cfg.dropout, rng, train)
        h = T.gelu(self.fc1.forward(self.ln2.forward(x)))
        h = T.dropout(h, self.cfg.dropout, rng, train)
        h = self.fc2.forward(h)
        return x + T.dropout(h, self.cfg.dropout, rng, train)


class ConformerConvModule(Module):
    """Pointwise conv -> GLU -> depthwise conv -> norm -> swish -> pointwise."""

    def __init__(self, cfg: ModelConfig, rng):
        super().__init__()
        d = cfg.d_model
        self.cfg = cfg
        self.kernel = cfg.conformer_kernel
        self.pw1 = self.child("pw1", Linear(d, 2 * d, rng))
        self.dw = self.child("dw", _DepthwiseConv(self.kernel, d, rng))
        self.dw_ln = self.child("dw_ln", LayerNorm(d))
        self.pw2 = self.child("pw2", Linear(d, d, rng))

    def forward(self, x: Tensor, pad_mask, mode: str, rng) -> Tensor:
        d = self.cfg.d_model
        h = self.pw1.forward(x)
        a, b = h[:, :, :d], h[:, :, d:]
        h = a * T.sigmoid(b)
        if pad_mask is not None:
            h = zero_padded(h, pad_mask)
        pad = (self.kernel - 1) // 2
        h = self.dw.forward(T.pad1d(h, pad, self.kernel - 1 - pad))
        h = T.swish(self.dw_ln.forward(h))
        h = self.pw2.forward(h)
        return T.dropout(h, self.cfg.dropout, rng, mode == "train")


class _DepthwiseConv(Module):
    def __init__(self, kernel: int, d: int, rng):
        super().__init__()
        self.weight = self.param("weight", (kernel, d), "trunc_normal", rng)
        self.bias = self.param("bias", (d,), "zeros", rng)

    def forward(self, x: Tensor) -> Tensor:
        return T.depthwise_conv1d(x, self.weight) + self.bias


class ConformerBlock(Module):
    """Half-step FFN, attention, conv module, half-step FFN, final norm."""

    def __init__(self, cfg: ModelConfig, rng):
        super().__init__()
        d = cfg.d_model
        self.cfg = cfg
        self.ffn1_ln = self.child("ffn1_ln", LayerNorm(d))
        self.ffn1 = self.child("ffn1", FeedForward(d, cfg.ffn_dim, rng))
        self.self_attn_ln = self.child("self_attn_ln", LayerNorm(d))
        self.self_attn = self.child("self_attn", MultiHeadAttention(d, cfg.n_heads, rng))
        self.conv_ln = self.child("conv_ln", LayerNorm(d))
        self.conv = self.child("conv", ConformerConvModule(cfg, rng))
        self.ffn2_ln = self.child("ffn2_ln", LayerNorm(d))
        self.ffn2 = self.child("ffn2", FeedForward(d, cfg.ffn_dim, rng))
        self.final_ln = self.child("final_ln", LayerNorm(d))

    def forward(self, x: Tensor, attn_mask, mode: str, rng, pad_mask=None) -> Tensor:
        train = mode == "train"
        drop = self.cfg.dropout
        x = x + 0.5 * T.dropout(self.ffn1.forward(self.ffn1_ln.forward(x), drop, mode, rng), drop, rng, train)
        h = self.self_attn_ln.forward(x)
        x = x + T.dropout(self.self_attn.forward(h, h, attn_mask), drop, rng, train)
        x = x + self.conv.forward(self.conv_ln.forward(x), pad_mask, mode, rng)
        x = x + 0.5 * T.dropout(self.ffn2.forward(self.ffn2_ln.forward(x), drop, mode, rng), drop, rng, train)
        return self.final_ln.forward(x)


class EncoderStack(Module):
    """Stack of encoder blocks with layerdrop and a final layer norm."""

    def __init__(self, cfg: ModelConfig, rng, prefix_rng_key: str = "enc"):
        super().__init__()
        self.cfg = cfg
        self.blocks = []
        block_cls = ConformerBlock if cfg.block_kind == "conformer" else TransformerEncoderBlock
        for i in range(cfg.enc_layers):
            block = block_cls(cfg, rng.split(prefix_rng_key, i) if rng else None)
            self.blocks.append(self.child(str(i), block))
        self.final_ln = self.child("final_ln", LayerNorm(cfg.d_model))

    def forward(self, x: Tensor, pad_mask, mode: str, rng):
        attn_mask = key_pad_additive(pad_mask) if pad_mask is not None else None
        intermediates = []
        for block in self.blocks:
            if mode == "train" and self.cfg.layerdrop > 0.0 and rng.uniform() < self.cfg.layerdrop:
                intermediates.append(x)
                continue
            if isinstance(block, ConformerBlock):
                x = block.forward(x, attn_mask, mode, rng, pad_mask=pad_mask)
            else:
                x = block.forward(x, attn_mask, mode, rng)
            intermediates.append(x)
        return self.final_ln.forward(x), intermediates


class DecoderBlock(Module):
    def __init__(self, cfg: ModelConfig, rng):
        super().__init__()
        d = cfg.d_model
        self.cfg = cfg
        self.ln1 = self.child("ln1", LayerNorm(d))
        self.self_attn = self.child("self_attn", MultiHeadAttention(d, cfg.n_heads, rng))
        self.ln2 = self.child("ln2", LayerNorm(d))
        self.encoder_attn = self.child("encoder_attn", MultiHeadAttention(d, cfg.n_heads, rng))
        self.ln3 = self.child("ln3", LayerNorm(d))
        self.fc1 = self.child("fc1", Linear(d, cfg.ffn_dim, rng))
        self.fc2 = self.child("fc2", Linear(cfg.ffn_dim, d, rng))

    def forward(self, x, memory, causal_mask, mem_mask, mode, rng):
        train = mode == "train"
        drop = self.cfg.dropout
        h = self.ln1.forward(x)
        x = x + T.dropout(self.self_attn.forward(h, h, causal_mask), drop, rng, train)
        h = self.ln2.forward(x)
        x = x + T.dropout(self.encoder_attn.forward(h, memory, mem_mask), drop, rng, train)
        h = T.gelu(self.fc1.forward(self.ln3.forward(x)))
        h = T.dropout(h, drop, rng, train)
        return x + T.dropout(self.fc2.forward(h), drop, rng, train)


class Decoder(Module):
    """Causal token decoder; input and output embeddings share one tensor."""

    def __init__(self, cfg: ModelConfig, vocab: int, rng, d_model: int | None = None,
                 dec_layers: int | None = None):
        super().__init__()
        self.cfg = cfg
        d = d_model or cfg.d_model
        layers = dec_layers or cfg.dec_layers
        self.vocab = vocab
        self.embed = self.child("embed", Embedding(vocab, d, rng.split("dec_embed") if rng else None))
        self.pos = self.child("pos", LearnedPositions(cfg.max_tgt_positions, d, rng.split("dec_pos") if rng else None))
        self.blocks = []
        block_cfg = cfg if d == cfg.d_model and layers == cfg.dec_layers else cfg.scaled(d_model=d, dec_layers=layers)
        for i in range(layers):
            self.blocks.append(self.child(str(i), DecoderBlock(block_cfg, rng.split("dec", i) if rng else None)))
        self.final_ln = self.child("final_ln", LayerNorm(d))

    def forward(self, tgt_in: np.ndarray, memory: Tensor, mem_pad_mask, mode: str, rng) -> Tensor:
        t = tgt_in.shape[1]
        x = self.embed.forward(tgt_in)
        x = self.pos.forward(x)
        x = T.dropout(x, self.cfg.dropout, rng, mode == "train")
        causal = causal_additive(t)
        mem_mask = key_pad_additive(mem_pad_mask) if mem_pad_mask is not None else None
        for block in self.blocks:
            x = block.forward(x, memory, causal, mem_mask, mode, rng)
        x = self.final_ln.forward(x)
        return T.matmul(x, T.transpose(self.embed.weight))


class TokenSeq2Seq(Module):
    """Encoder-decoder over token sequences (denoising LM, MT, T2U)."""

    def __init__(self, cfg: ModelConfig, rng: RngStream | None):
        super().__init__()
        if cfg.src_vocab <= 0 or cfg.tgt_vocab <= 0:
            raise ValueError("TokenSeq2Seq needs src_vocab and tgt_vocab")
        self.cfg = cfg
        self.enc_stack = self.child("encoder", EncoderStack(cfg, rng))
        self.enc_embed = self.enc_stack.child(
            "embed", Embedding(cfg.src_vocab, cfg.d_model, rng.split("enc_embed") if rng else None)
        )
        self.enc_pos = self.enc_stack.child(
            "pos", LearnedPositions(cfg.max_src_positions, cfg.d_model, rng.split("enc_pos") if rng else None)
        )
        self.decoder = self.child("decoder", Decoder(cfg, cfg.tgt_vocab, rng))

    def encode(self, src: np.ndarray, src_lengths: np.ndarray, mode: str, rng):
        pad_mask = lengths_to_pad_mask(src_lengths, src.shape[1])
        x = self.enc_embed.forward(src)
        x = self.enc_pos.forward(x)
        x = T.dropout(x, self.cfg.dropout, rng, mode == "train")
        memory, _ = self.enc_stack.forward(x, pad_mask, mode, rng)
        return memory, pad_mask

    def forward(self, src: np.ndarray, src_lengths: np.ndarray, tgt_in: np.ndarray,
                mode: str = "eval", rng: RngStream | None = None) -> Tensor:
        if src.shape[1] > self.cfg.max_src_positions or tgt_in.shape[1] > self.cfg.max_tgt_positions:
            raise ValueError("input exceeds max positions")
        memory, pad_mask = self.encode(src, src_lengths, mode, rng)
        return self.decoder.forward(tgt_in, memory, pad_mask, mode, rng)

    # decoding interface
    def begin(self, src: np.ndarray, src_lengths: np.ndarray):
        memory, pad_mask = self.encode(src, src_lengths, "eval", None)
        return memory, pad_mask

    def step_logprobs(self, state, prefix: np.ndarray) -> np.ndarray:
        memory, pad_mask = state
        b = prefix.shape[0]
        if memory.shape[0] == 1 and b > 1:
            mem = Tensor(np.broadcast_to(memory.data, (b,) + memory.shape[1:]).copy())
            pm = np.broadcast_to(pad_mask, (b, pad_mask.shape[1]))
        else:
            mem, pm = memory, pad_mask
        with T.no_grad():
            logits = self.decoder.forward(prefix, mem, pm, "eval", None)
            return T.log_softmax(logits[:, -1], axis=-1).data
