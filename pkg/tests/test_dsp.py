import math

import numpy as np
import pytest
from scipy.signal import butter

from vehiclesound.audio_io import AudioSignal
from vehiclesound.dsp import (apply_filter, autocorrelation, center_clip,
                              clipping_level, design_butterworth_lowpass,
                              frame_signal, frequency_response, poles)

from conftest import make_sine

TABLE_FILTER = (4, 4000.0, 11025.0)


def test_design_gain_contract():
    coeffs = design_butterworth_lowpass(*TABLE_FILTER)
    assert abs(frequency_response(coeffs, 0.0)) == pytest.approx(1.0, abs=1e-6)
    assert abs(frequency_response(coeffs, 4000.0)) == pytest.approx(1 / math.sqrt(2), abs=1e-3)


def test_design_monotone_and_stable():
    coeffs = design_butterworth_lowpass(*TABLE_FILTER)
    grid = np.linspace(0.0, 11025.0 / 2, 512)
    mag = np.abs(frequency_response(coeffs, grid))
    assert np.all(np.diff(mag) <= 1e-12)
    assert np.all(np.abs(poles(coeffs)) < 1.0)


def test_design_order2_matches_symbolic_bilinear():
    # order 2 with cutoff fs/4: prewarped wc = 2 fs, poles 2 fs exp(+-j 3pi/4).
    # Working the bilinear substitution through by hand gives
    #   b = [1, 2, 1] / (2 + sqrt 2),  a = [1, 0, 3 - 2 sqrt 2]
    fs = 8000.0
    coeffs = design_butterworth_lowpass(2, fs / 4, fs)
    s2 = math.sqrt(2.0)
    expected_b = np.array([1.0, 2.0, 1.0]) / (2.0 + s2)
    expected_a = np.array([1.0, 0.0, 3.0 - 2.0 * s2])
    np.testing.assert_allclose(coeffs.b, expected_b, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(coeffs.a, expected_a, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("order,cutoff,fs", [(4, 4000.0, 11025.0),
                                             (2, 2756.25, 11025.0),
                                             (5, 1000.0, 8000.0),
                                             (1, 300.0, 16000.0)])
def test_design_matches_scipy(order, cutoff, fs):
    coeffs = design_butterworth_lowpass(order, cutoff, fs)
    b, a = butter(order, cutoff, btype="low", fs=fs)
    np.testing.assert_allclose(coeffs.b, b, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(coeffs.a, a, rtol=1e-9, atol=1e-12)


def test_design_rejects_bad_arguments():
    with pytest.raises(ValueError):
        design_butterworth_lowpass(4, 6000.0, 11025.0)  # above Nyquist
    with pytest.raises(ValueError):
        design_butterworth_lowpass(0, 100.0, 11025.0)


def test_apply_filter_dc_gain():
    coeffs = design_butterworth_lowpass(*TABLE_FILTER)
    sig = AudioSignal(np.full(11025, 0.5), 11025)
    out = apply_filter(coeffs, sig).samples
    assert len(out) == 11025
    tail = out[-1102:]
    assert np.max(np.abs(tail - 0.5)) < 1e-3


def test_apply_filter_attenuates_above_cutoff():
    coeffs = design_butterworth_lowpass(*TABLE_FILTER)
    sig = AudioSignal(make_sine(5000.0, 1.0), 11025)
    out = apply_filter(coeffs, sig).samples
    assert np.max(np.abs(out[-1102:])) < 1.0 / math.sqrt(2)


def test_apply_filter_matches_recurrence_oracle():
    coeffs = design_butterworth_lowpass(*TABLE_FILTER)
    impulse = np.zeros(200)
    impulse[0] = 1.0
    got = apply_filter(coeffs, AudioSignal(impulse, 11025)).samples

    b, a = coeffs.b, coeffs.a
    expected = []
    for n in range(200):
        acc = sum(b[k] * impulse[n - k] for k in range(len(b)) if n - k >= 0)
        acc -= sum(a[k] * expected[n - k] for k in range(1, len(a)) if n - k >= 0)
        expected.append(acc)
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_apply_filter_linearity(rng):
    coeffs = design_butterworth_lowpass(*TABLE_FILTER)
    x = rng.normal(0, 1, 400)
    y = rng.normal(0, 1, 400)
    combo = apply_filter(coeffs, AudioSignal(0.7 * x - 1.3 * y, 11025)).samples
    parts = (0.7 * apply_filter(coeffs, AudioSignal(x, 11025)).samples
             - 1.3 * apply_filter(coeffs, AudioSignal(y, 11025)).samples)
    np.testing.assert_allclose(combo, parts, atol=1e-9)


def test_frame_signal_table_layout():
    sig = AudioSignal(np.arange(385, dtype=float), 11025)
    frames = frame_signal(sig, 165, 55)
    assert [f.start for f in frames] == [0, 110, 220]
    assert all(len(f) == 165 for f in frames)


def test_frame_signal_too_short():
    with pytest.raises(ValueError):
        frame_signal(AudioSignal(np.zeros(164), 11025), 165, 55)


def test_frame_signal_exactly_one_window():
    frames = frame_signal(AudioSignal(np.ones(165), 11025), 165, 100)
    assert len(frames) == 1


def test_frames_overlay_reproduces_prefix(rng):
    x = rng.normal(0, 1, 500)
    frames = frame_signal(AudioSignal(x, 11025), 165, 55)
    covered = frames[-1].start + 165
    rebuilt = np.full(covered, np.nan)
    for f in frames:
        rebuilt[f.start:f.start + 165] = f.samples
    np.testing.assert_array_equal(rebuilt, x[:covered])


def test_clipping_level_min_of_thirds():
    frame = np.array([0.5, 0, 0, 0.1, 0.1, 0.1, -0.8, 0, 0])
    assert clipping_level(frame) == pytest.approx(0.34)
    assert clipping_level(frame[::-1]) == pytest.approx(0.34)


def test_clipping_level_zero_frame():
    assert clipping_level(np.zeros(9)) == 0.0


def test_clipping_level_needs_three_samples():
    with pytest.raises(ValueError):
        clipping_level(np.array([1.0, 2.0]))


def test_center_clip_values():
    out = center_clip(np.array([0.9, 0.2, -0.9]), 0.3)
    np.testing.assert_allclose(out, [0.6, 0.0, -0.6])


def test_center_clip_odd_symmetry(rng):
    x = rng.normal(0, 1, 100)
    np.testing.assert_array_equal(center_clip(-x, 0.4), -center_clip(x, 0.4))


def test_center_clip_zero_level_identity(rng):
    x = rng.normal(0, 1, 50)
    np.testing.assert_array_equal(center_clip(x, 0.0), x)


def test_center_clip_rejects_negative_level():
    with pytest.raises(ValueError):
        center_clip(np.ones(3), -0.1)


def test_autocorrelation_r0_is_energy(rng):
    x = rng.normal(0, 1, 165)
    r = autocorrelation(x, 164)
    assert r[0] == pytest.approx(float(np.sum(x * x)), rel=1e-12)


def test_autocorrelation_zero_frame():
    assert not autocorrelation(np.zeros(50), 20).any()


def test_autocorrelation_matches_nested_loop_oracle(rng):
    x = rng.normal(0, 1, 165)
    r = autocorrelation(x, 164)
    for tau in range(165):
        expected = sum(x[m] * x[m + tau] for m in range(165 - tau))
        assert r[tau] == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_autocorrelation_bounded_by_r0(rng):
    for _ in range(20):
        x = rng.normal(0, 1, 80)
        r = autocorrelation(x, 79)
        assert np.all(np.abs(r) <= r[0] + 1e-12)


def test_autocorrelation_lag_bound():
    with pytest.raises(ValueError):
        autocorrelation(np.zeros(10), 10)
