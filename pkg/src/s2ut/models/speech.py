"""Speech encoder, stride-2 adaptor, S2UT assembly, aux heads, CTC head.

The speech encoder is a two-layer convolutional frontend over filterbank
frames followed by context blocks (Transformer or Conformer). Masked
positions swap their latent for a learned mask embedding; the contrastive
objective pulls the context output at masked frames toward the pre-mask
latents against negatives drawn from other masked frames of the same
utterance.
"""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..checkpoint import load_params_into
from ..configs import ModelConfig
from ..rng import RngStream
from ..tensor import Tensor
from .layers import (
    Linear,
    Module,
    lengths_to_pad_mask,
    sinusoidal_positions,
    zero_padded,
)
from .nets import Decoder, EncoderStack


class ConvLayer(Module):
    def __init__(self, kernel: int, c_in: int, c_out: int, rng):
        super().__init__()
        self.kernel = kernel
        self.weight = self.param("weight", (kernel, c_in, c_out), "trunc_normal", rng)
        self.bias = self.param("bias", (c_out,), "zeros", rng)

    def forward(self, x: Tensor, stride: int = 1, same: bool = True) -> Tensor:
        if same:
            left = (self.kernel - 1) // 2
            x = T.pad1d(x, left, self.kernel - 1 - left)
        return T.conv1d(x, self.weight, stride=stride) + self.bias


class Frontend(Module):
    def __init__(self, cfg: ModelConfig, rng):
        super().__init__()
        k = cfg.frontend_kernel
        self.conv0 = self.child("conv0", ConvLayer(k, cfg.feat_dim, cfg.d_model, rng.split("fe0") if rng else None))
        self.conv1 = self.child("conv1", ConvLayer(k, cfg.d_model, cfg.d_model, rng.split("fe1") if rng else None))

    def forward(self, x: Tensor) -> Tensor:
        return T.gelu(self.conv1.forward(T.gelu(self.conv0.forward(x))))


class SpeechEncoder(EncoderStack):
    """Conv frontend + sinusoidal positions + context blocks."""

    def __init__(self, cfg: ModelConfig, rng: RngStream | None):
        super().__init__(cfg, rng)
        self.frontend = self.child("frontend", Frontend(cfg, rng))
        me = self.child("mask_embed", Module())
        self.mask_embed = me.param("weight", (cfg.d_model,), "trunc_normal",
                                   rng.split("mask_embed") if rng else None)

    def forward_features(self, features: np.ndarray, lengths: np.ndarray, mode: str,
                         rng: RngStream | None, time_mask: np.ndarray | None = None,
                         channel_mask: np.ndarray | None = None):
        """Returns (context, latents, intermediates, pad_mask)."""
        b, t, _ = features.shape
        if t > self.cfg.max_src_positions:
            raise ValueError(f"{t} frames exceed max positions {self.cfg.max_src_positions}")
        pad_mask = lengths_to_pad_mask(lengths, t)
        x = Tensor(features)
        if channel_mask is not None:
            x = x * (~channel_mask).astype(np.float64)[None, None, :]
        x = zero_padded(x, pad_mask)
        latents = self.frontend.forward(x)
        h = latents
        if time_mask is not None:
            m = time_mask.astype(np.float64)[:, :, None]
            h = h * (1.0 - m) + T.reshape(self.mask_embed, (1, 1, -1)) * m
        h = h + sinusoidal_positions(t, self.cfg.d_model)
        h = T.dropout(h, self.cfg.dropout, rng, mode == "train")
        context, intermediates = super().forward(h, pad_mask, mode, rng)
        return context, latents, intermediates, pad_mask


class Adaptor(Module):
    """Single stride-2 1-D convolution (kernel 3, no padding) + GELU."""

    def __init__(self, cfg: ModelConfig, rng):
        super().__init__()
        self.kernel = cfg.adaptor_kernel
        self.conv = self.child(
            "conv", ConvLayer(self.kernel, cfg.d_model, cfg.d_model, rng.split("adaptor") if rng else None)
        )

    def out_length(self, t: int) -> int:
        return (t - self.kernel) // 2 + 1

    def forward(self, x: Tensor, lengths: np.ndarray):
        if int(np.min(lengths)) < self.kernel:
            raise ValueError(f"adaptor needs at least {self.kernel} frames, got {int(np.min(lengths))}")
        pad_mask = lengths_to_pad_mask(lengths, x.shape[1])
        x = zero_padded(x, pad_mask)
        y = T.gelu(self.conv.forward(x, stride=2, same=False))
        new_lengths = (np.asarray(lengths) - self.kernel) // 2 + 1
        return y, new_lengths


class AuxHead(Module):
    """Small causal decoder reading one intermediate encoder layer."""

    def __init__(self, cfg: ModelConfig, layer_index: int, vocab: int, rng):
        super().__init__()
        self.layer_index = layer_index
        d = cfg.aux_d_model or cfg.d_model
        self.in_proj = None
        if d != cfg.d_model:
            self.in_proj = self.child("in_proj", Linear(cfg.d_model, d, rng.split("aux_proj") if rng else None))
        self.decoder = self.child(
            "decoder", Decoder(cfg, vocab, rng, d_model=d, dec_layers=cfg.aux_dec_layers)
        )

    def forward(self, intermediate: Tensor, enc_pad_mask, tgt_in, mode, rng) -> Tensor:
        memory = intermediate if self.in_proj is None else self.in_proj.forward(intermediate)
        return self.decoder.forward(tgt_in, memory, enc_pad_mask, mode, rng)


class S2UTModel(Module):
    """Speech encoder -> adaptor -> unit decoder, with optional aux heads."""

    def __init__(self, cfg: ModelConfig, unit_vocab_size: int, rng: RngStream | None):
        super().__init__()
        self.cfg = cfg
        self.encoder = self.child("encoder", SpeechEncoder(cfg, rng.split("encoder") if rng else None))
        self.adaptor = self.child("adaptor", Adaptor(cfg, rng.split("adaptor") if rng else None))
        self.decoder = self.child("decoder", Decoder(cfg, unit_vocab_size, rng.split("decoder") if rng else None))
        self.aux_heads: list[AuxHead] = []
        if cfg.aux_heads:
            container = self.child("aux", Module())
            for j, (layer_idx, _kind, vocab) in enumerate(cfg.aux_heads):
                head = AuxHead(cfg, layer_idx, vocab, rng.split("aux", j) if rng else None)
                self.aux_heads.append(container.child(str(j), head))

    def encode(self, features: np.ndarray, lengths: np.ndarray, mode: str = "eval",
               rng: RngStream | None = None, time_mask=None, channel_mask=None):
        context, _, intermediates, pad_mask = self.encoder.forward_features(
            features, lengths, mode, rng, time_mask=time_mask, channel_mask=channel_mask
        )
        memory, mem_lengths = self.adaptor.forward(context, lengths)
        mem_pad = lengths_to_pad_mask(mem_lengths, memory.shape[1])
        return memory, mem_pad, intermediates, pad_mask

    def forward(self, features: np.ndarray, lengths: np.ndarray, tgt_in: np.ndarray,
                mode: str = "eval", rng: RngStream | None = None,
                aux_tgt_in: list[np.ndarray] | None = None,
                time_mask=None, channel_mask=None):
        memory, mem_pad, intermediates, enc_pad = self.encode(
            features, lengths, mode, rng, time_mask, channel_mask
        )
        logits = self.decoder.forward(tgt_in, memory, mem_pad, mode, rng)
        aux_logits = []
        if aux_tgt_in is not None:
            for head, a_in in zip(self.aux_heads, aux_tgt_in):
                aux_logits.append(
                    head.forward(intermediates[head.layer_index], enc_pad, a_in, mode, rng)
                )
        return logits, aux_logits

    # decoding interface
    def begin(self, features: np.ndarray, lengths: np.ndarray):
        memory, mem_pad, _, _ = self.encode(features, lengths, "eval", None)
        return memory, mem_pad

    def step_logprobs(self, state, prefix: np.ndarray) -> np.ndarray:
        memory, mem_pad = state
        b = prefix.shape[0]
        if memory.shape[0] == 1 and b > 1:
            memory = Tensor(np.broadcast_to(memory.data, (b,) + memory.shape[1:]).copy())
            mem_pad = np.broadcast_to(mem_pad, (b, mem_pad.shape[1]))
        with T.no_grad():
            logits = self.decoder.forward(prefix, memory, mem_pad, "eval", None)
            return T.log_softmax(logits[:, -1], axis=-1).data


class Wav2VecModel(Module):
    """Speech encoder plus contrastive projection head (pretraining only)."""

    def __init__(self, cfg: ModelConfig, rng: RngStream | None):
        super().__init__()
        self.cfg = cfg
        self.encoder = self.child("encoder", SpeechEncoder(cfg, rng.split("encoder") if rng else None))
        contr = self.child("contrastive", Module())
        self.proj = contr.child("proj", Linear(cfg.d_model, cfg.d_model, rng.split("contrastive") if rng else None))


class CtcAsrModel(Module):
    """Speech encoder with a linear CTC head over text tokens + blank."""

    def __init__(self, cfg: ModelConfig, vocab_size: int, rng: RngStream | None):
        super().__init__()
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.encoder = self.child("encoder", SpeechEncoder(cfg, rng.split("encoder") if rng else None))
        self.ctc_head = self.child("ctc_head", Linear(cfg.d_model, vocab_size, rng.split("ctc") if rng else None))

    def log_probs(self, features: np.ndarray, lengths: np.ndarray, mode: str = "eval",
                  rng: RngStream | None = None, time_mask=None, channel_mask=None) -> Tensor:
        context, _, _, _ = self.encoder.forward_features(
            features, lengths, mode, rng, time_mask=time_mask, channel_mask=channel_mask
        )
        return T.log_softmax(self.ctc_head.forward(context), axis=-1)


def cosine_rows(x: Tensor) -> Tensor:
    return x / T.sqrt(T.tsum(x * x, axis=-1, keepdims=True) + 1e-12)


def w2v_contrastive_loss(context: Tensor, targets: Tensor, time_mask: np.ndarray,
                         n_negatives: int, temperature: float, rng: RngStream) -> Tensor:
    """Mean over masked frames of -log softmax over cosine similarities.

    The positive is the pre-mask latent at the same frame; negatives are
    drawn uniformly from the other masked frames of the utterance.
    """
    masked = np.flatnonzero(time_mask)
    if masked.size < 1:
        raise ValueError("contrastive loss needs at least one masked position")
    if n_negatives >= 1 and masked.size < 2:
        raise ValueError("need >= 2 masked positions to draw negatives")
    m = masked.size
    cn = cosine_rows(context)
    zn = cosine_rows(targets)
    c_m = T.embedding(cn, masked)
    z_m = T.embedding(zn, masked)
    pos = T.tsum(c_m * z_m, axis=-1, keepdims=True)
    # negatives: uniform over the other masked positions
    draw = np.asarray(rng.integers(m - 1, (m, n_negatives)))
    own = np.arange(m)[:, None]
    neg_local = draw + (draw >= own)
    neg_idx = masked[neg_local]
    z_neg = T.reshape(T.embedding(zn, neg_idx.reshape(-1)), (m, n_negatives, -1))
    sims = T.tsum(T.reshape(c_m, (m, 1, -1)) * z_neg, axis=-1)
    logits = T.concat([pos, sims], axis=1) * (1.0 / temperature)
    return T.tmean(-T.log_softmax(logits, axis=-1)[:, 0])


def build_s2ut(cfg: ModelConfig, unit_vocab_size: int, seed: int) -> S2UTModel:
    return S2UTModel(cfg, unit_vocab_size, RngStream(seed).split("s2ut"))


def assemble_s2ut(encoder_ckpt, decoder_ckpt, cfg: ModelConfig, unit_vocab_size: int,
                  seed: int) -> S2UTModel:
    """Fresh S2UT model with encoder/decoder weights copied from checkpoints.

    Either checkpoint may be None (that side stays freshly initialized);
    the adaptor is always fresh. Shape mismatches raise with every
    offending name listed.
    """
    model = build_s2ut(cfg, unit_vocab_size, seed)
    params = model.named_params()
    if encoder_ckpt is not None:
        load_params_into(encoder_ckpt, params, subset="encoder")
    if decoder_ckpt is not None:
        load_params_into(decoder_ckpt, params, subset="decoder")
    return model
