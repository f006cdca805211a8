import struct

import numpy as np
import pytest


def make_sine(f0, duration_s=1.0, sample_rate=11025, phase=0.0, amplitude=1.0):
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return amplitude * np.sin(2.0 * np.pi * f0 * t + phase)


def wav_bytes(payload: bytes, *, tag=1, channels=1, rate=11025, bits=16) -> bytes:
    """Assemble a minimal RIFF/WAVE file by hand (independent of the package)."""
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block_align,
                      block_align, bits)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) % 2:
        chunks += b"\x00"
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def write_pcm16(path, samples, rate=11025):
    """Reference 16-bit writer used as a fixture oracle."""
    pcm = struct.pack(f"<{len(samples)}h",
                      *(int(round(max(-1.0, min(1.0, s)) * 32767)) for s in samples))
    path.write_bytes(wav_bytes(pcm, rate=rate))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
