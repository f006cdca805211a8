"""Per-frame features: short-time energy, zero-cross rate, and pitch.

A signal becomes a track of (energy, zcr, pitch) triples: normalize, low-pass
filter, cut into overlapping rectangular windows, measure each window, then
median-smooth the pitch sequence. Frames without a detectable pitch carry
pitch 0 and are dropped before classification; an optional second stage keeps
only the loud, slowly alternating frames (above-mean energy and below-mean
zero-cross rate), which tend to carry the vehicle rather than the background.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .audio_io import AudioSignal, normalize
from .dsp import (apply_filter, autocorrelation, center_clip, clipping_level,
                  design_butterworth_lowpass, frame_signal)

FEATURE_CSV_HEADER = ("signal,frame_index,start_sample,energy,zcr,pitch_hz,"
                      "selected_periodic,selected_high_energy")


@dataclass(frozen=True)
class ExtractionConfig:
    """Knobs of the framing / filtering / pitch pipeline.

    Window and overlap are in samples; alpha and zeta scale the means in the
    high-energy selection (keep frames with E > alpha * mean(E) and
    Z < zeta * mean(Z)).
    """

    window_len: int = 165
    overlap: int = 55
    filter_order: int = 4
    cutoff_hz: float = 4000.0
    clip_fraction: float = 0.68
    periodicity_threshold: float = 0.30
    max_pitch_hz: float = 1000.0
    median_width: int = 3
    alpha: float = 1.0
    zeta: float = 1.0

    def __post_init__(self):
        if not 0 <= self.overlap < self.window_len:
            raise ValueError("need 0 <= overlap < window_len")
        if not 0.0 < self.clip_fraction < 1.0:
            raise ValueError("clip_fraction must lie in (0, 1)")
        if not 0.0 < self.periodicity_threshold < 1.0:
            raise ValueError("periodicity_threshold must lie in (0, 1)")
        if self.median_width < 1 or self.median_width % 2 == 0:
            raise ValueError("median_width must be odd and >= 1")
        if self.max_pitch_hz <= 0:
            raise ValueError("max_pitch_hz must be positive")
        if self.alpha <= 0 or self.zeta <= 0:
            raise ValueError("alpha and zeta must be positive")


class FrameFeatures(NamedTuple):
    energy: float
    zcr: float
    pitch_hz: float


@dataclass(frozen=True, eq=False)
class FeatureTrack:
    """Per-frame features of one signal, in frame order."""

    sample_rate: float
    starts: np.ndarray
    energy: np.ndarray
    zcr: np.ndarray
    pitch_hz: np.ndarray

    def __len__(self):
        return len(self.starts)

    def __getitem__(self, i) -> FrameFeatures:
        return FrameFeatures(float(self.energy[i]), float(self.zcr[i]),
                             float(self.pitch_hz[i]))

    def subset(self, mask) -> FeatureTrack:
        mask = np.asarray(mask)
        return FeatureTrack(self.sample_rate, self.starts[mask],
                            self.energy[mask], self.zcr[mask], self.pitch_hz[mask])

    def vectors(self) -> np.ndarray:
        """Frame vectors as rows: (energy, zero-cross rate, pitch in Hz)."""
        return np.column_stack([self.energy, self.zcr, self.pitch_hz])


def short_time_energy(samples) -> float:
    """Sum of squared amplitudes over the frame (rectangular window)."""
    x = np.asarray(samples, dtype=float)
    return float(np.dot(x, x))


def zero_cross_rate(samples) -> float:
    """Number of sign changes between adjacent samples.

    sgn(0) counts as +1 so exact zeros do not double-count a crossing. The
    result is integer-valued and bounded by len(frame) - 1.
    """
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        raise ValueError("frame must have at least 2 samples")
    s = np.where(x >= 0.0, 1.0, -1.0)
    return float(0.5 * np.abs(np.diff(s)).sum())


def estimate_pitch(samples, sample_rate: float, config: ExtractionConfig) -> float:
    """Pitch in Hz of one frame, or 0 when the frame is not periodic.

    Center-clips the frame, autocorrelates it, and takes the strongest lag at
    or above the minimum admitted by max_pitch_hz. The frame counts as
    periodic only if that peak reaches periodicity_threshold times the
    clipped frame's energy; ties go to the smaller lag (higher frequency).
    """
    x = np.asarray(samples, dtype=float)
    n = len(x)
    min_lag = math.ceil(sample_rate / config.max_pitch_hz)
    if n < min_lag + 1:
        raise ValueError(f"frame of {n} samples is too short for a "
                         f"{min_lag}-sample minimum lag")
    clipped = center_clip(x, clipping_level(x, config.clip_fraction))
    r = autocorrelation(clipped, n - 1)
    if r[0] <= 0.0:
        return 0.0
    lag = min_lag + int(np.argmax(r[min_lag:]))
    if r[lag] < config.periodicity_threshold * r[0]:
        return 0.0
    return sample_rate / lag


def median_smooth(values, width: int) -> np.ndarray:
    """Sliding-window median of odd width.

    Edge windows are truncated to what exists; even-sized (edge) windows take
    the lower median, so every output value is one of the input values.
    """
    if width < 1 or width % 2 == 0:
        raise ValueError("width must be odd and >= 1")
    v = np.asarray(values, dtype=float)
    half = width // 2
    out = np.empty_like(v)
    for i in range(len(v)):
        window = np.sort(v[max(0, i - half):i + half + 1])
        out[i] = window[(len(window) - 1) // 2]
    return out


def extract_track(signal: AudioSignal, config: ExtractionConfig = ExtractionConfig()) -> FeatureTrack:
    """Full per-signal pipeline: normalize, filter, frame, measure, smooth pitch."""
    sig = normalize(signal)
    coeffs = design_butterworth_lowpass(config.filter_order, config.cutoff_hz,
                                        sig.sample_rate)
    filtered = apply_filter(coeffs, sig)
    frames = frame_signal(filtered, config.window_len, config.overlap)

    starts = np.array([f.start for f in frames], dtype=int)
    energy = np.array([short_time_energy(f.samples) for f in frames])
    zcr = np.array([zero_cross_rate(f.samples) for f in frames])
    pitch = np.array([estimate_pitch(f.samples, sig.sample_rate, config)
                      for f in frames])
    pitch = median_smooth(pitch, config.median_width)
    return FeatureTrack(sig.sample_rate, starts, energy, zcr, pitch)


def select_periodic(track: FeatureTrack) -> FeatureTrack:
    """Keep exactly the frames with a nonzero pitch, order preserved."""
    return track.subset(track.pitch_hz > 0)


def high_energy_mask(energy, zcr, alpha: float = 1.0, zeta: float = 1.0) -> np.ndarray:
    """Frames with strictly above-mean energy and strictly below-mean zcr."""
    energy = np.asarray(energy, dtype=float)
    zcr = np.asarray(zcr, dtype=float)
    if len(energy) == 0:
        return np.zeros(0, dtype=bool)
    return (energy > alpha * energy.mean()) & (zcr < zeta * zcr.mean())


def select_high_energy(track: FeatureTrack, alpha: float = 1.0, zeta: float = 1.0) -> FeatureTrack:
    """Apply the high-energy criterion to one signal's periodic frames.

    The means are taken over the given track, so selection never depends on
    any other signal in the dataset.
    """
    return track.subset(high_energy_mask(track.energy, track.zcr, alpha, zeta))


def selection_flags(track: FeatureTrack, config: ExtractionConfig):
    """Full-length boolean masks (periodic, high_energy) for a track."""
    periodic = track.pitch_hz > 0
    high = np.zeros(len(track), dtype=bool)
    if periodic.any():
        sub = track.subset(periodic)
        high[np.flatnonzero(periodic)] = high_energy_mask(
            sub.energy, sub.zcr, config.alpha, config.zeta)
    return periodic, high


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def write_feature_csv(stream, named_tracks, config: ExtractionConfig):
    """Dump per-frame rows for a sequence of (name, FeatureTrack) pairs."""
    stream.write(FEATURE_CSV_HEADER + "\n")
    for name, track in named_tracks:
        periodic, high = selection_flags(track, config)
        for i in range(len(track)):
            stream.write(f"{name},{i},{track.starts[i]},{_fmt(track.energy[i])},"
                         f"{_fmt(track.zcr[i])},{_fmt(track.pitch_hz[i])},"
                         f"{int(periodic[i])},{int(high[i])}\n")
