"""Deterministic synthetic corpus: harmonic tones over white noise.

Stands in for field recordings at desk scale. Each class gets a fundamental
frequency; each signal is a sum of decaying harmonics with random phases plus
white noise at a configured tone-to-noise ratio. With tone_duty < 1 the tone
drops out periodically, leaving noise-only stretches that mimic background
between vehicle passes.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from .audio_io import (DEFAULT_LABELS, LabeledDataset, ManifestEntry,
                       write_manifest, write_wav)


@dataclass(frozen=True)
class SynthSpec:
    labels: tuple = DEFAULT_LABELS
    f0_hz: tuple = (80.0, 150.0, 300.0, 500.0)
    harmonics: int = 3
    decay: float = 0.7
    amplitude: float = 0.8
    snr_db: float = 10.0
    per_class: int = 40
    duration_s: float = 2.0
    sample_rate: int = 11025
    tone_duty: float = 1.0
    segment_s: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if len(self.f0_hz) != len(self.labels):
            raise ValueError("need one fundamental per label")
        if any(f <= 0 for f in self.f0_hz):
            raise ValueError("fundamentals must be positive")
        if not 0.0 < self.tone_duty <= 1.0:
            raise ValueError("tone_duty must lie in (0, 1]")
        if self.harmonics < 1 or self.per_class < 1:
            raise ValueError("harmonics and per_class must be >= 1")
        if self.duration_s * self.sample_rate < 330:
            raise ValueError("signals must cover at least two analysis windows")


def _tone_mask(n: int, spec: SynthSpec) -> np.ndarray:
    if spec.tone_duty >= 1.0:
        return np.ones(n)
    block = spec.segment_s / spec.tone_duty
    t = np.arange(n) / spec.sample_rate
    return (np.mod(t, block) < spec.segment_s).astype(float)


def generate_signal(rng: np.random.Generator, f0: float, spec: SynthSpec) -> np.ndarray:
    n = int(round(spec.duration_s * spec.sample_rate))
    t = np.arange(n) / spec.sample_rate
    tone = np.zeros(n)
    for h in range(1, spec.harmonics + 1):
        phase = rng.uniform(0.0, 2.0 * math.pi)
        tone += spec.decay ** (h - 1) * np.sin(2.0 * math.pi * h * f0 * t + phase)
    tone *= spec.amplitude / np.max(np.abs(tone))

    x = tone * _tone_mask(n, spec)
    if math.isfinite(spec.snr_db):
        # noise floor sized against the tone's power, present in the gaps too
        tone_power = float(np.mean(tone * tone))
        sigma = math.sqrt(tone_power * 10.0 ** (-spec.snr_db / 10.0))
        x = x + rng.normal(0.0, sigma, n)
    return x / np.max(np.abs(x))


def generate_corpus(spec: SynthSpec, out_dir) -> str:
    """Write one WAV per (class, index) plus a manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    entries = []
    for label, f0 in zip(spec.labels, spec.f0_hz):
        for j in range(spec.per_class):
            x = generate_signal(rng, f0, spec)
            name = f"{label}_{j:03d}.wav"
            write_wav(os.path.join(out_dir, name), x, spec.sample_rate)
            entries.append(ManifestEntry(os.path.join(os.path.abspath(out_dir), name),
                                         label, name))
    manifest = os.path.join(out_dir, "manifest.csv")
    write_manifest(LabeledDataset(tuple(entries), spec.labels), manifest)
    return manifest
