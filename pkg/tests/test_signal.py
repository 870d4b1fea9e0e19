import numpy as np
import pytest

from s2ut.signal import (
    DEFAULT_K,
    FRAME_SAMPLES,
    Waveform,
    extract_features,
    render_units_to_audio,
    unit_signatures,
)


def test_render_empty_sequence():
    assert render_units_to_audio([]).samples.size == 0


def test_render_single_unit_is_320_samples():
    wave = render_units_to_audio([5])
    assert wave.samples.size == 320
    assert wave.duration_s == pytest.approx(0.02)


def test_render_rejects_out_of_range():
    with pytest.raises(ValueError):
        render_units_to_audio([DEFAULT_K])


def test_render_preserves_order_and_amplitude():
    wave = render_units_to_audio([0, 3, 0])
    assert wave.samples.size == 3 * FRAME_SAMPLES
    assert np.abs(wave.samples).max() <= 1.0
    first = wave.samples[:FRAME_SAMPLES]
    third = wave.samples[2 * FRAME_SAMPLES :]
    assert np.array_equal(first, third)


def test_extract_frame_counts():
    assert extract_features(render_units_to_audio([1])).shape[0] == 1
    assert extract_features(render_units_to_audio([1] * 10)).shape[0] == 10
    with pytest.raises(ValueError):
        extract_features(Waveform(np.empty(0)))


def test_extract_framing_matches_raw_unit_count():
    raw = [3, 3, 7, 1, 1, 1]
    feats = extract_features(render_units_to_audio(raw))
    assert feats.shape == (len(raw), 16)


def test_signatures_pairwise_distinct():
    sig = unit_signatures()
    for a in range(DEFAULT_K):
        for b in range(a + 1, DEFAULT_K):
            assert np.linalg.norm(sig[a] - sig[b]) > 1e-6


def test_features_of_distinct_units_differ():
    fa = extract_features(render_units_to_audio([4]))
    fb = extract_features(render_units_to_audio([5]))
    assert np.linalg.norm(fa - fb) > 0


def test_held_unit_frames_identical():
    feats = extract_features(render_units_to_audio([9, 9, 9]))
    assert np.array_equal(feats[0], feats[1])
    assert np.array_equal(feats[1], feats[2])


def test_waveform_invariants():
    with pytest.raises(ValueError):
        Waveform(np.full(FRAME_SAMPLES, np.nan))
    with pytest.raises(ValueError):
        Waveform(np.zeros(100))
