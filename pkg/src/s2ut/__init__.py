"""Desk-scale speech-to-unit translation lab.

A numpy/scipy implementation of the full S2UT recipe on synthetic toy
language pairs: discrete-unit extraction via k-means over filterbank
features, wav2vec-style contrastive encoder pretraining, denoising unit
decoder pretraining with span masking, LNA partial finetuning, weakly
supervised augmentation through ASR -> MT -> T2U, and ASR-BLEU evaluation.
"""

from .rng import RngStream
from .tensor import Tensor, no_grad
from .gradcheck import grad_check
from .optim import AdamState, LrSchedule, adam_step, lr_at
from .losses import ctc_loss, label_smoothed_nll

__all__ = [
    "RngStream",
    "Tensor",
    "no_grad",
    "grad_check",
    "AdamState",
    "LrSchedule",
    "adam_step",
    "lr_at",
    "ctc_loss",
    "label_smoothed_nll",
]

__version__ = "0.1.0"
