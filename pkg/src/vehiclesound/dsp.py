"""Numeric kernels: IIR low-pass design, framing, center clipping, autocorrelation."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .audio_io import AudioSignal


@dataclass(frozen=True, eq=False)
class FilterCoefficients:
    """Difference-equation coefficients, numerator b and denominator a (a[0] = 1)."""

    b: np.ndarray
    a: np.ndarray
    order: int
    cutoff_hz: float
    sample_rate_hz: float


def design_butterworth_lowpass(order: int, cutoff_hz: float, sample_rate_hz: float) -> FilterCoefficients:
    """Design a digital Butterworth low-pass filter.

    The analog prototype has its poles equally spaced on the left half of the
    circle |s| = wc; the bilinear transform maps them into the z-plane with
    the cutoff prewarped so the -3 dB point lands exactly on cutoff_hz.
    """
    if order < 1:
        raise ValueError("filter order must be >= 1")
    nyquist = sample_rate_hz / 2.0
    if not 0.0 < cutoff_hz < nyquist:
        raise ValueError(f"cutoff must lie in (0, {nyquist}) Hz, got {cutoff_hz}")

    fs2 = 2.0 * sample_rate_hz
    warped = fs2 * math.tan(math.pi * cutoff_hz / sample_rate_hz)
    k = np.arange(1, order + 1)
    poles = warped * np.exp(1j * math.pi * (2 * k + order - 1) / (2 * order))

    # s = fs2 (z - 1)/(z + 1); every analog pole contributes a zero at z = -1
    zpoles = (fs2 + poles) / (fs2 - poles)
    gain = (warped ** order / np.prod(fs2 - poles)).real
    a = np.poly(zpoles).real
    b = gain * np.poly(-np.ones(order)).real
    return FilterCoefficients(b=b, a=a, order=order,
                              cutoff_hz=float(cutoff_hz),
                              sample_rate_hz=float(sample_rate_hz))


def frequency_response(coeffs: FilterCoefficients, freq_hz):
    """Complex gain of the filter at the given frequencies in Hz."""
    f = np.atleast_1d(np.asarray(freq_hz, dtype=float))
    w = 2.0 * math.pi * f / coeffs.sample_rate_hz
    kb = np.arange(len(coeffs.b))
    ka = np.arange(len(coeffs.a))
    num = np.exp(-1j * np.outer(w, kb)) @ coeffs.b
    den = np.exp(-1j * np.outer(w, ka)) @ coeffs.a
    h = num / den
    return h[0] if np.isscalar(freq_hz) else h


def poles(coeffs: FilterCoefficients) -> np.ndarray:
    return np.roots(coeffs.a)


def apply_filter(coeffs: FilterCoefficients, signal: AudioSignal) -> AudioSignal:
    """Run the causal difference equation over the signal, zero initial state."""
    y = lfilter(coeffs.b, coeffs.a, signal.samples)
    return AudioSignal(y, signal.sample_rate)


@dataclass(frozen=True, eq=False)
class Frame:
    """A contiguous window of samples and its start index in the source."""

    samples: np.ndarray
    start: int

    def __len__(self):
        return len(self.samples)


def frame_signal(signal: AudioSignal, window_len: int, overlap: int):
    """Split into windows of window_len samples every window_len - overlap samples.

    The trailing remainder shorter than one window is discarded.
    """
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    if not 0 <= overlap < window_len:
        raise ValueError("overlap must satisfy 0 <= overlap < window_len")
    x = signal.samples
    if len(x) < window_len:
        raise ValueError(f"signal of {len(x)} samples is shorter than one "
                         f"{window_len}-sample window")
    hop = window_len - overlap
    count = (len(x) - window_len) // hop + 1
    return [Frame(x[i * hop:i * hop + window_len], i * hop) for i in range(count)]


def clipping_level(samples, fraction: float = 0.68) -> float:
    """Clipping level from the quieter of the frame's outer thirds.

    max1 and max2 are the peak magnitudes of the first and last floor(N/3)
    samples; the level is fraction * min(max1, max2).
    """
    x = np.asarray(samples)
    n = len(x)
    if n < 3:
        raise ValueError("frame must have at least 3 samples")
    third = n // 3
    max1 = float(np.max(np.abs(x[:third])))
    max2 = float(np.max(np.abs(x[-third:])))
    return fraction * min(max1, max2)


def center_clip(samples, level: float) -> np.ndarray:
    """Symmetric center clipper.

    Samples with |x| <= level map to zero, larger ones shift toward zero by
    the level. Suppresses low-level detail so autocorrelation periodicity
    peaks stand out.
    """
    if level < 0:
        raise ValueError("clipping level must be non-negative")
    x = np.asarray(samples, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - level, 0.0)


def autocorrelation(samples, max_lag: int) -> np.ndarray:
    """Short-time autocorrelation r[0..max_lag], zero padded beyond the frame.

    Biased (unnormalized) form, so r[0] equals the frame's sum of squares;
    the periodicity test is expressed as a fraction of it.
    """
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if max_lag >= n:
        raise ValueError("max_lag must be smaller than the frame length")
    full = np.correlate(x, x, mode="full")
    return full[n - 1:n + max_lag].copy()
