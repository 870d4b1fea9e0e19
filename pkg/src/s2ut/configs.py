"""Model configuration and full-scale presets."""

from __future__ import annotations

from dataclasses import dataclass, field, replace


@dataclass
class ModelConfig:
    d_model: int = 64
    n_heads: int = 4
    ffn_dim: int = 128
    enc_layers: int = 2
    dec_layers: int = 2
    dropout: float = 0.1
    layerdrop: float = 0.0
    src_vocab: int = 0  # 0: feature input (speech); >0: token encoder
    tgt_vocab: int = 0
    feat_dim: int = 16
    max_src_positions: int = 512
    max_tgt_positions: int = 128
    block_kind: str = "transformer"  # encoder block family
    frontend_kernel: int = 3
    adaptor_kernel: int = 3
    conformer_kernel: int = 7
    aux_heads: list = field(default_factory=list)  # [(layer_index, "src"|"tgt", vocab)]
    aux_weight: float = 8.0
    aux_dec_layers: int = 2
    aux_d_model: int = 0  # 0: same as d_model

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.enc_layers < 1 or self.dec_layers < 1:
            raise ValueError("layers must be >= 1")
        if self.block_kind not in ("transformer", "conformer"):
            raise ValueError(f"unknown block_kind {self.block_kind!r}")
        for idx, _kind, _vocab in self.aux_heads:
            if not (0 <= idx < self.enc_layers):
                raise ValueError(f"aux head index {idx} out of range for {self.enc_layers} layers")

    def scaled(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


def full_scale_speech_encoder() -> ModelConfig:
    """24 Conformer blocks at width 1024 (counting preset, never trained here)."""
    return ModelConfig(
        d_model=1024,
        n_heads=16,
        ffn_dim=4096,
        enc_layers=24,
        dec_layers=1,
        block_kind="conformer",
        conformer_kernel=31,
        feat_dim=80,
        max_src_positions=5000,
    )


def full_scale_unit_decoder() -> ModelConfig:
    """12+12 Transformer layers at width 1024 with 1000 + specials units."""
    return ModelConfig(
        d_model=1024,
        n_heads=16,
        ffn_dim=4096,
        enc_layers=12,
        dec_layers=12,
        src_vocab=1006,
        tgt_vocab=1006,
        max_src_positions=1024,
        max_tgt_positions=1024,
    )
