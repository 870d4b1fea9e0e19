"""Waveform rendering and framewise feature extraction.

Audio is a vocoder stand-in: every discrete unit id owns a pure tone on a
fixed frequency grid, emitted as one 20-ms frame (320 samples at 16 kHz)
per raw unit, with phase reset at each frame. Frames of the same unit are
therefore bit-identical, which makes the k-means quantizer round trip
exact: render -> extract_features -> assign recovers the raw unit string.

Features are a windowed log-magnitude filterbank: Hann window, rFFT
magnitude, triangular filters linearly spaced over [0, 8 kHz].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SAMPLE_RATE = 16_000
FRAME_SAMPLES = 320  # 20 ms
DEFAULT_K = 32
DEFAULT_FEAT_DIM = 16
_TONE_AMPLITUDE = 0.8
_FREQ_BASE = 400.0
_FREQ_TOP = 7_400.0


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.size and not np.isfinite(self.samples).all():
            raise ValueError("waveform samples must be finite")
        if self.samples.size % FRAME_SAMPLES != 0:
            raise ValueError("waveform length must be a multiple of one frame hop")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def n_frames(self) -> int:
        return self.samples.size // FRAME_SAMPLES


def unit_frequency(unit_id: int, k: int = DEFAULT_K) -> float:
    """Tone frequency of a unit id on the fixed grid."""
    if k == 1:
        return _FREQ_BASE
    return _FREQ_BASE + unit_id * (_FREQ_TOP - _FREQ_BASE) / (k - 1)


@lru_cache(maxsize=8)
def _tone_table(k: int) -> np.ndarray:
    t = np.arange(FRAME_SAMPLES) / SAMPLE_RATE
    table = np.empty((k, FRAME_SAMPLES))
    for u in range(k):
        table[u] = _TONE_AMPLITUDE * np.sin(2.0 * np.pi * unit_frequency(u, k) * t)
    return table


def render_units_to_audio(units, k: int = DEFAULT_K) -> Waveform:
    """One fixed 20-ms tone segment per unit id, in order."""
    ids = np.asarray(getattr(units, "units", units), dtype=np.int64)
    if ids.size == 0:
        return Waveform(np.empty(0))
    if ids.min() < 0 or ids.max() >= k:
        raise ValueError(f"unit id out of range for K={k}")
    return Waveform(_tone_table(k)[ids].reshape(-1))


@lru_cache(maxsize=8)
def _filterbank(n_filters: int) -> np.ndarray:
    freqs = np.fft.rfftfreq(FRAME_SAMPLES, d=1.0 / SAMPLE_RATE)
    edges = np.linspace(0.0, SAMPLE_RATE / 2, n_filters + 2)
    bank = np.zeros((n_filters, freqs.size))
    for i in range(n_filters):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        bank[i] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def extract_features(wave: Waveform, feat_dim: int = DEFAULT_FEAT_DIM) -> np.ndarray:
    """[T, D] log-magnitude filterbank, one row per 20-ms frame."""
    if wave.samples.size < FRAME_SAMPLES:
        raise ValueError("waveform shorter than one frame")
    t = wave.samples.size // FRAME_SAMPLES
    frames = wave.samples[: t * FRAME_SAMPLES].reshape(t, FRAME_SAMPLES)
    window = np.hanning(FRAME_SAMPLES)
    spectra = np.abs(np.fft.rfft(frames * window, axis=1))
    return np.log(spectra @ _filterbank(feat_dim).T + 1e-8)


def unit_signatures(k: int = DEFAULT_K, feat_dim: int = DEFAULT_FEAT_DIM) -> np.ndarray:
    """[K, D] feature vector of a single frame of each unit tone."""
    wave = render_units_to_audio(list(range(k)), k)
    return extract_features(wave, feat_dim)
