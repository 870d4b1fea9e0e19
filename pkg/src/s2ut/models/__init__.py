from .layers import MetaParam, Module, meta_params, param_count
from .nets import ConformerBlock, Decoder, EncoderStack, TokenSeq2Seq, TransformerEncoderBlock
from .speech import (
    Adaptor,
    AuxHead,
    CtcAsrModel,
    S2UTModel,
    SpeechEncoder,
    Wav2VecModel,
    assemble_s2ut,
    build_s2ut,
    w2v_contrastive_loss,
)

__all__ = [
    "Adaptor",
    "AuxHead",
    "ConformerBlock",
    "CtcAsrModel",
    "Decoder",
    "EncoderStack",
    "MetaParam",
    "Module",
    "S2UTModel",
    "SpeechEncoder",
    "TokenSeq2Seq",
    "TransformerEncoderBlock",
    "Wav2VecModel",
    "assemble_s2ut",
    "build_s2ut",
    "meta_params",
    "param_count",
    "w2v_contrastive_loss",
]
