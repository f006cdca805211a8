"""WAV ingestion, amplitude normalization, and label-manifest handling.

All audio enters the pipeline through this module: recordings are mono WAV
files (integer PCM or 32-bit float), datasets are CSV manifests pairing a
file path with a class label.
"""

import os
import struct
import wave
from dataclasses import dataclass

import numpy as np

DEFAULT_LABELS = ("bus", "car", "motor", "truck")

MANIFEST_HEADER = "path,label"


class DataError(Exception):
    """Unusable input data: bad audio file, malformed manifest, impossible request."""


@dataclass(frozen=True, eq=False)
class AudioSignal:
    """A sampled amplitude sequence with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or len(samples) < 1:
            raise ValueError("signal must be a non-empty 1-D sequence")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def load_wav(path) -> AudioSignal:
    """Read a mono WAV file (8/16/24/32-bit PCM or 32-bit IEEE float).

    Integer samples are scaled by 2^(bits-1), so the most negative code maps
    to -1.0 and full positive scale to just under 1.0. Multi-channel files
    are rejected instead of downmixed: mixing changes frame energies and
    there is no single right way to do it silently.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise DataError(f"{path}: not a RIFF/WAVE file")

    fmt = raw = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        size = struct.unpack_from("<I", data, pos + 4)[0]
        body = data[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            raw = body
        pos += 8 + size + (size & 1)  # chunks are word aligned

    if fmt is None or len(fmt) < 16:
        raise DataError(f"{path}: missing fmt chunk")
    if raw is None:
        raise DataError(f"{path}: missing data chunk")

    tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == 0xFFFE:
        # WAVE_FORMAT_EXTENSIBLE: the real format code leads the SubFormat GUID
        if len(fmt) < 26:
            raise DataError(f"{path}: truncated extensible fmt chunk")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if channels != 1:
        raise DataError(f"{path}: {channels} channels; only mono input is supported")

    samples = _decode_samples(path, tag, bits, raw)
    if len(samples) < 1:
        raise DataError(f"{path}: empty data chunk")
    return AudioSignal(samples, int(rate))


def _decode_samples(path, tag, bits, raw):
    if tag == 1:  # integer PCM
        if bits == 8:
            count = len(raw)
            x = np.frombuffer(raw, dtype=np.uint8, count=count).astype(np.float64)
            return (x - 128.0) / 128.0  # 8-bit WAV is unsigned, midpoint 128
        if bits == 16:
            count = len(raw) // 2
            x = np.frombuffer(raw, dtype="<i2", count=count)
            return x / 32768.0
        if bits == 24:
            count = len(raw) // 3
            b = np.frombuffer(raw, dtype=np.uint8, count=count * 3)
            b = b.reshape(-1, 3).astype(np.int32)
            x = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
            x = (x ^ 0x800000) - 0x800000  # sign-extend 24 -> 32 bits
            return x / 8388608.0
        if bits == 32:
            count = len(raw) // 4
            x = np.frombuffer(raw, dtype="<i4", count=count)
            return x / 2147483648.0
        raise DataError(f"{path}: unsupported PCM depth ({bits}-bit)")
    if tag == 3:  # IEEE float
        if bits == 32:
            count = len(raw) // 4
            return np.frombuffer(raw, dtype="<f4", count=count).astype(np.float64)
        raise DataError(f"{path}: unsupported float depth ({bits}-bit)")
    raise DataError(f"{path}: unsupported WAV encoding (format tag {tag})")


def write_wav(path, samples, sample_rate):
    """Write samples to a 16-bit mono PCM WAV file; values are clipped to [-1, 1].

    Scales by 32768 (the reader's divisor) so a write/read round trip stays
    within one quantization step; +1.0 saturates at the 32767 code.
    """
    x = np.asarray(samples, dtype=float)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())


def normalize(signal: AudioSignal) -> AudioSignal:
    """Scale so the largest magnitude becomes exactly 1; all-zero input passes through."""
    peak = float(np.max(np.abs(signal.samples)))
    if peak == 0.0:
        return signal
    return AudioSignal(signal.samples / peak, signal.sample_rate)


@dataclass(frozen=True)
class ManifestEntry:
    path: str   # resolved (absolute or manifest-relative) location on disk
    label: str
    name: str   # path exactly as written in the manifest


@dataclass(frozen=True)
class LabeledDataset:
    """Manifest entries plus the ordered label set; audio is loaded on demand."""

    entries: tuple
    label_set: tuple

    def __len__(self):
        return len(self.entries)

    def class_counts(self) -> dict:
        counts = {lab: 0 for lab in self.label_set}
        for e in self.entries:
            counts[e.label] += 1
        return counts

    def load_signal(self, index: int) -> AudioSignal:
        return load_wav(self.entries[index].path)


def load_manifest(path, label_set=DEFAULT_LABELS) -> LabeledDataset:
    """Parse a `path,label` CSV manifest; `#` lines are comments.

    Relative paths are resolved against the manifest's own directory.
    """
    label_set = tuple(label_set)
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc

    rows = [(no, ln.strip()) for no, ln in enumerate(lines, 1)
            if ln.strip() and not ln.strip().startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty manifest")
    header = [c.strip() for c in rows[0][1].split(",")]
    if header != ["path", "label"]:
        raise DataError(f"{path}:{rows[0][0]}: expected header '{MANIFEST_HEADER}'")
    if len(rows) < 2:
        raise DataError(f"{path}: manifest has no entries")

    entries = []
    seen = set()
    for no, ln in rows[1:]:
        parts = [c.strip() for c in ln.split(",")]
        if len(parts) != 2 or not parts[0]:
            raise DataError(f"{path}:{no}: expected 'path,label', got {ln!r}")
        name, label = parts
        if label not in label_set:
            allowed = ", ".join(label_set)
            raise DataError(f"{path}:{no}: unknown label {label!r} (allowed: {allowed})")
        resolved = name if os.path.isabs(name) else os.path.normpath(os.path.join(base, name))
        if resolved in seen:
            raise DataError(f"{path}:{no}: duplicate path {name!r}")
        seen.add(resolved)
        entries.append(ManifestEntry(resolved, label, name))
    return LabeledDataset(tuple(entries), label_set)


def write_manifest(dataset: LabeledDataset, path):
    lines = [MANIFEST_HEADER] + [f"{e.name},{e.label}" for e in dataset.entries]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
