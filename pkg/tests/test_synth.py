import math
import wave

import numpy as np
import pytest

from vehiclesound.audio_io import load_manifest
from vehiclesound.features import ExtractionConfig, extract_track
from vehiclesound.synth import SynthSpec, generate_corpus, generate_signal

SMALL = SynthSpec(per_class=10, duration_s=2.0)


def test_corpus_files_and_manifest(tmp_path):
    manifest = generate_corpus(SMALL, tmp_path / "corpus")
    ds = load_manifest(manifest)
    assert len(ds) == 40
    assert ds.class_counts() == {lab: 10 for lab in SMALL.labels}
    wavs = sorted((tmp_path / "corpus").glob("*.wav"))
    assert len(wavs) == 40
    with wave.open(str(wavs[0])) as w:
        assert w.getnchannels() == 1
        assert w.getsampwidth() == 2
        assert w.getframerate() == 11025
        assert w.getnframes() == 22050


def test_corpus_deterministic(tmp_path):
    spec = SynthSpec(per_class=2, duration_s=0.5)
    m1 = generate_corpus(spec, tmp_path / "a")
    m2 = generate_corpus(spec, tmp_path / "b")
    for p1, p2 in zip(sorted((tmp_path / "a").glob("*.wav")),
                      sorted((tmp_path / "b").glob("*.wav"))):
        assert p1.read_bytes() == p2.read_bytes()
    assert (tmp_path / "a" / "manifest.csv").read_text() == \
        (tmp_path / "b" / "manifest.csv").read_text()
    m3 = generate_corpus(SynthSpec(per_class=2, duration_s=0.5, seed=9), tmp_path / "c")
    assert (tmp_path / "a" / sorted(x.name for x in (tmp_path / 'a').glob('*.wav'))[0]).read_bytes() != \
        (tmp_path / "c" / sorted(x.name for x in (tmp_path / 'c').glob('*.wav'))[0]).read_bytes()


def test_noiseless_tone_recovers_fundamental(tmp_path):
    spec = SynthSpec(labels=("a", "b"), f0_hz=(150.0, 420.0), harmonics=1,
                     snr_db=math.inf, per_class=1, duration_s=1.0)
    manifest = generate_corpus(spec, tmp_path / "pure")
    ds = load_manifest(manifest, label_set=("a", "b"))
    for i, f0 in enumerate(spec.f0_hz):
        track = extract_track(ds.load_signal(i), ExtractionConfig())
        lags = 11025.0 / track.pitch_hz[track.pitch_hz > 0]
        hits = np.abs(lags - 11025.0 / f0) <= 1.0
        assert hits.mean() > 0.95
        assert (track.pitch_hz > 0).mean() > 0.95


def test_tone_duty_leaves_noise_only_gaps(rng):
    spec = SynthSpec(per_class=1, duration_s=1.0, tone_duty=0.5, segment_s=0.25,
                     snr_db=math.inf)
    x = generate_signal(np.random.default_rng(0), 150.0, spec)
    # with noise off the gap halves are exact silence
    gap = x[int(0.26 * 11025):int(0.49 * 11025)]
    tone = x[:int(0.24 * 11025)]
    assert np.max(np.abs(gap)) == 0.0
    assert np.max(np.abs(tone)) > 0.5


def test_signal_normalized_and_snr_applied():
    spec = SynthSpec(per_class=1, duration_s=1.0, snr_db=0.0)
    x = generate_signal(np.random.default_rng(1), 150.0, spec)
    assert np.max(np.abs(x)) == pytest.approx(1.0)
    clean = generate_signal(np.random.default_rng(1), 150.0,
                            SynthSpec(per_class=1, duration_s=1.0, snr_db=math.inf))
    # at 0 dB the noise carries roughly as much power as the tone
    assert np.mean(x * x) != pytest.approx(np.mean(clean * clean), rel=0.01)


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(f0_hz=(100.0,))  # one fundamental for four labels
    with pytest.raises(ValueError):
        SynthSpec(tone_duty=0.0)
    with pytest.raises(ValueError):
        SynthSpec(duration_s=0.01)
