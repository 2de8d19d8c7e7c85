"""Audio buffers and WAV file I/O.

Mono only. PCM 16-bit and 32-bit float WAV are supported; sample values are
represented internally as float64 in [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile


@dataclass(frozen=True)
class AudioBuffer:
    """A mono audio signal: samples plus the rate they were captured at."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"audio must be mono 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


class WavFormatError(Exception):
    """Raised when a WAV file cannot be decoded into a mono AudioBuffer."""


def read_wav(path) -> AudioBuffer:
    """Read a mono WAV file (PCM16, PCM32, float32 or float64)."""
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if data.ndim != 1:
        raise WavFormatError(f"{path}: expected mono, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data / 32768.0
    elif data.dtype == np.int32:
        samples = data / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported sample format {data.dtype}")
    return AudioBuffer(samples, rate)


def write_wav(path, audio: AudioBuffer, encoding: str = "float32") -> None:
    """Write ``audio`` as WAV. ``encoding`` is "float32" or "pcm16"."""
    if encoding == "float32":
        wavfile.write(path, audio.sample_rate, audio.samples.astype(np.float32))
    elif encoding == "pcm16":
        clipped = np.clip(audio.samples, -1.0, 1.0)
        wavfile.write(path, audio.sample_rate, (clipped * 32767.0).astype(np.int16))
    else:
        raise ValueError(f"unknown WAV encoding {encoding!r}")
