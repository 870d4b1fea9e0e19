"""Stochastic corruption: span masking over unit text, time/channel masking
over feature frames.

Span masking repeatedly draws (uniform start, Poisson length) spans and
unions them into a boolean mask until coverage reaches ``ceil(p * length)``
unique positions; overlaps are merged and never double-counted, which
also guarantees termination. Zero-length Poisson draws are discarded and
resampled. Masked runs are later replaced by a single mask token each, so
the denoising decoder has to regenerate span lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream
from .units import UnitSequence, UnitVocab


@dataclass
class NoiseConfig:
    lam: float  # Poisson mean of span lengths
    p: float  # target masked fraction
    mask_symbol: int

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError("p must lie in [0, 1]")


@dataclass
class MaskSpec:
    length: int
    spans: list[tuple[int, int]] = field(default_factory=list)
    bool_mask: np.ndarray = None
    total_masked: int = 0

    def __post_init__(self):
        if self.bool_mask is None:
            self.bool_mask = np.zeros(self.length, dtype=bool)
        self.validate()

    def validate(self):
        union = np.zeros(self.length, dtype=bool)
        for start, length in self.spans:
            if not (0 <= start and start + length <= self.length and length >= 1):
                raise ValueError(f"span ({start}, {length}) escapes bounds [0, {self.length})")
            union[start : start + length] = True
        if not np.array_equal(union, self.bool_mask):
            raise ValueError("bool_mask is not the union of the spans")
        if self.total_masked != int(self.bool_mask.sum()):
            raise ValueError("total_masked does not match popcount(bool_mask)")


@dataclass
class W2vMaskConfig:
    mask_prob: float = 0.1
    mask_length: int = 3
    channel_mask_prob: float = 0.0
    mask_channel_length: int = 1

    def __post_init__(self):
        for p in (self.mask_prob, self.channel_mask_prob):
            if not (0.0 <= p <= 1.0):
                raise ValueError("mask probabilities must lie in [0, 1]")
        if self.mask_length < 1 or self.mask_channel_length < 1:
            raise ValueError("mask lengths must be >= 1")


def sample_poisson(lam: float, rng: RngStream) -> int:
    """Exact Poisson draw: Knuth's product method for small means, PTRS
    transformed rejection above 30."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    if lam <= 30.0:
        limit = math.exp(-lam)
        k = 0
        prod = 1.0
        while True:
            prod *= rng.uniform()
            if prod <= limit:
                return k
            k += 1
    # PTRS (Hormann's transformed rejection with squeeze)
    b = 0.931 + 2.53 * math.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_lam = math.log(lam)
    while True:
        u = rng.uniform() - 0.5
        v = rng.uniform()
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + lam + 0.43))
        if us >= 0.07 and v <= v_r:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if math.log(v * inv_alpha / (a / (us * us) + b)) <= k * log_lam - lam - math.lgamma(k + 1):
            return k


def _positive_poisson(lam: float, rng: RngStream) -> int:
    while True:
        k = sample_poisson(lam, rng)
        if k > 0:
            return k


def span_mask(length: int, cfg: NoiseConfig, rng: RngStream) -> MaskSpec:
    """Sample spans until coverage reaches ceil(p * length) unique positions."""
    if length < 1:
        raise ValueError("length must be >= 1")
    target = math.ceil(cfg.p * length)
    mask = np.zeros(length, dtype=bool)
    spans: list[tuple[int, int]] = []
    covered = 0
    while covered < target:
        start = rng.integers(length)
        span_len = min(_positive_poisson(cfg.lam, rng), length - start)
        spans.append((start, span_len))
        mask[start : start + span_len] = True
        covered = int(mask.sum())
    return MaskSpec(length=length, spans=spans, bool_mask=mask, total_masked=covered)


def apply_unit_noise(seq: UnitSequence, spec: MaskSpec, vocab: UnitVocab) -> UnitSequence:
    """Replace each maximal masked run with a single mask token."""
    if spec.length != len(seq.units):
        raise ValueError(f"mask built for length {spec.length}, sequence has {len(seq.units)}")
    out: list[int] = []
    in_run = False
    for unit, masked in zip(seq.units, spec.bool_mask):
        if masked:
            if not in_run:
                out.append(vocab.mask)
                in_run = True
        else:
            out.append(unit)
            in_run = False
    return UnitSequence(seq.lang, out, form="raw")


def _span_starts_mask(n: int, prob: float, span: int, rng: RngStream) -> np.ndarray:
    starts = np.asarray(rng.bernoulli(prob, (n,)))
    mask = np.zeros(n, dtype=bool)
    for i in np.flatnonzero(starts):
        mask[i : i + span] = True
    return mask


def w2v_time_channel_mask(t: int, d: int, cfg: W2vMaskConfig, rng: RngStream):
    """Bernoulli span-start masks over frames and feature channels.

    When ``mask_prob > 0`` at least one frame is always masked: an empty
    draw is resampled once and, failing that, a single forced span is
    placed at a uniform start.
    """
    if t < 1 or d < 1:
        raise ValueError("t and d must be >= 1")
    time_mask = _span_starts_mask(t, cfg.mask_prob, cfg.mask_length, rng)
    if cfg.mask_prob > 0.0 and not time_mask.any():
        time_mask = _span_starts_mask(t, cfg.mask_prob, cfg.mask_length, rng)
        if not time_mask.any():
            start = rng.integers(t)
            time_mask[start : start + cfg.mask_length] = True
    channel_mask = _span_starts_mask(d, cfg.channel_mask_prob, cfg.mask_channel_length, rng)
    return time_mask, channel_mask
