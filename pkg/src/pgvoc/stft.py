"""Forward and inverse short-time Fourier transform.

Frames are indexed relative to their center: frame n covers samples
n*hop + i for i in [-N/2, N/2).  This centered convention makes the phase of
an impulse sitting exactly at a frame center flat across frequency, which is
the reference point for all phase-gradient sign conventions downstream.

Analysis is done in float64; per-frame FFTs are batched through numpy's
pocketfft, which is the vectorized equivalent of frame-parallel execution.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .audio import AudioBuffer
from .windows import WINDOW_KINDS, make_window

_COVERAGE_EPS = 1e-14

#: batch FFTs split frames across this many threads; identical results at any
#: setting, so the default just follows the machine (capped small).
FFT_WORKERS = int(os.environ.get("PGVOC_FFT_WORKERS", min(2, os.cpu_count() or 1)))


@dataclass(frozen=True)
class StftConfig:
    """Spectral analysis parameters.

    frame_size / hop_size default to the 2048/256 configuration used by the
    whole evaluation stack at 44.1 kHz.  ``fft_size`` may exceed frame_size
    for zero-padded analysis; bin m then has angular frequency
    2*pi*m/fft_size (rad/sample).
    """

    frame_size: int = 2048
    hop_size: int = 256
    window: str = "hann"
    fft_size: int | None = None
    center: bool = True

    def __post_init__(self):
        if self.fft_size is None:
            object.__setattr__(self, "fft_size", self.frame_size)
        if self.frame_size <= 0 or self.frame_size % 2 != 0:
            raise ValueError(f"frame_size must be positive and even, got {self.frame_size}")
        if not 0 < self.hop_size <= self.frame_size:
            raise ValueError(f"need 0 < hop_size <= frame_size, got hop {self.hop_size}")
        if self.fft_size < self.frame_size:
            raise ValueError(f"fft_size {self.fft_size} < frame_size {self.frame_size}")
        if self.window not in WINDOW_KINDS:
            raise ValueError(f"unsupported window kind {self.window!r}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def omegas(self) -> np.ndarray:
        """Angular frequency of each bin, rad/sample."""
        return 2.0 * np.pi * np.arange(self.n_bins) / self.fft_size

    def bin_frequencies(self, sample_rate: int) -> np.ndarray:
        """Center frequency of each bin in Hz."""
        return np.arange(self.n_bins) * sample_rate / self.fft_size

    def n_frames(self, n_samples: int) -> int:
        if self.center:
            return n_samples // self.hop_size + 1
        return (n_samples - self.frame_size) // self.hop_size + 1


@dataclass(frozen=True)
class ComplexSpectrogram:
    """Full STFT matrix, laid out [bin, frame]."""

    data: np.ndarray
    config: StftConfig
    sample_rate: int
    n_samples: int | None = None

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] != self.config.n_bins:
            raise ValueError(
                f"spectrogram shape {self.data.shape} does not match "
                f"{self.config.n_bins} bins"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("spectrogram contains non-finite values")

    @property
    def n_bins(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)

    @property
    def phase(self) -> np.ndarray:
        """Phase as the standard complex argument of the STFT."""
        return np.angle(self.data)

    @property
    def omegas(self) -> np.ndarray:
        return self.config.omegas


def frame_signal(x: np.ndarray, config: StftConfig) -> np.ndarray:
    """Slice ``x`` into overlapping frames [n_frames, frame_size].

    Row n holds samples n*hop + i for i in [-N/2, N/2); with centering the
    signal is reflect-padded so frame 0 is centered on sample 0.
    """
    return np.ascontiguousarray(_frame_starts_view(x, config))


def stft(audio: AudioBuffer, config: StftConfig) -> ComplexSpectrogram:
    """Short-time Fourier transform with centered frame indexing."""
    x = audio.samples
    data = _analysis_transform(x, config)
    return ComplexSpectrogram(data.T, config, audio.sample_rate, n_samples=len(x))


def _frame_starts_view(x: np.ndarray, config: StftConfig) -> np.ndarray:
    """Overlapping-frame view (no copy) of the padded signal."""
    n, hop = config.frame_size, config.hop_size
    half = n // 2
    if config.center:
        if len(x) <= half:
            raise ValueError(f"signal too short: {len(x)} samples < {half + 1} needed")
        xp = np.pad(x, half, mode="reflect")
        n_frames = len(x) // hop + 1
    else:
        if len(x) < n:
            raise ValueError(f"signal too short: {len(x)} samples < frame_size {n}")
        xp = x
        n_frames = (len(x) - n) // hop + 1
    return np.lib.stride_tricks.sliding_window_view(xp, n)[::hop][:n_frames]


def _analysis_transform(x: np.ndarray, config: StftConfig) -> np.ndarray:
    """Windowed, frame-centered rfft of the whole signal: [n_frames, bins].

    The window multiply is fused into the centering copy, one pass per frame
    region; dtype follows the input (float32 in, complex64 out).
    """
    n, fft = config.frame_size, config.fft_size
    half = n // 2
    view = _frame_starts_view(x, config)
    window = make_window(config.window, n).astype(x.dtype, copy=False)
    if fft == n:
        buf = np.empty((view.shape[0], fft), dtype=x.dtype)
    else:
        buf = np.zeros((view.shape[0], fft), dtype=x.dtype)
    np.multiply(view[:, half:], window[half:], out=buf[:, : n - half])
    np.multiply(view[:, :half], window[:half], out=buf[:, fft - half :])
    return scipy.fft.rfft(buf, axis=1, workers=FFT_WORKERS)


def _centered_rfft(windowed: np.ndarray, config: StftConfig) -> np.ndarray:
    """rfft of windowed frames with sample i=0 moved to FFT index 0.

    Rows are frames of length frame_size holding i in [-N/2, N/2); the
    centered layout realizes the e^{-j*omega*i} kernel exactly, including for
    fft_size > frame_size.
    """
    n, fft = config.frame_size, config.fft_size
    half = n // 2
    buf = np.zeros((windowed.shape[0], fft))
    buf[:, : n - half] = windowed[:, half:]
    buf[:, fft - half :] = windowed[:, :half]
    return scipy.fft.rfft(buf, axis=1, workers=FFT_WORKERS)


def _centered_irfft(data_t: np.ndarray, config: StftConfig) -> np.ndarray:
    """Inverse of :func:`_centered_rfft`: [n_frames, frame_size] time frames."""
    n, fft = config.frame_size, config.fft_size
    half = n // 2
    buf = scipy.fft.irfft(data_t, n=fft, axis=1, workers=FFT_WORKERS)
    frames = np.empty((data_t.shape[0], n))
    frames[:, half:] = buf[:, : n - half]
    frames[:, :half] = buf[:, fft - half :]
    return frames


def istft(
    magnitude: np.ndarray,
    phase: np.ndarray,
    config: StftConfig,
    sample_rate: int,
    length: int | None = None,
) -> AudioBuffer:
    """Least-squares overlap-add inverse STFT.

    ``length`` selects the output length in samples; when omitted it defaults
    to (n_frames - 1) * hop, the natural span of the centered frame grid.
    """
    if magnitude.shape != phase.shape:
        raise ValueError(f"grid mismatch: magnitude {magnitude.shape} vs phase {phase.shape}")
    if magnitude.shape[0] != config.n_bins:
        raise ValueError(f"grid mismatch: {magnitude.shape[0]} bins, config has {config.n_bins}")
    data = magnitude * np.exp(1j * phase)
    return _istft_complex(data, config, sample_rate, length)


def _istft_complex(
    data: np.ndarray, config: StftConfig, sample_rate: int, length: int | None = None
) -> AudioBuffer:
    samples = _synthesis_transform(np.ascontiguousarray(data.T), config, length)
    return AudioBuffer(samples, sample_rate)


def _synthesis_transform(data_fm: np.ndarray, config: StftConfig, length: int | None) -> np.ndarray:
    """Frame-major spectrogram [n_frames, bins] -> samples (window + OLA fused)."""
    n, fft = config.frame_size, config.fft_size
    half = n // 2
    buf = scipy.fft.irfft(data_fm, n=fft, axis=1, workers=FFT_WORKERS)
    window = make_window(config.window, n).astype(buf.dtype, copy=False)
    frames = np.empty((data_fm.shape[0], n), dtype=buf.dtype)
    np.multiply(buf[:, : n - half], window[half:], out=frames[:, half:])
    np.multiply(buf[:, fft - half :], window[:half], out=frames[:, :half])
    return _overlap_add(frames, config, length)


def _overlap_add(windowed_frames: np.ndarray, config: StftConfig, length: int | None) -> np.ndarray:
    """Least-squares synthesis from window-weighted time frames [n_frames, N]."""
    n, hop = config.frame_size, config.hop_size
    n_frames = windowed_frames.shape[0]
    if length is None:
        length = (n_frames - 1) * hop
        if not config.center:
            length += n

    pad = n // 2 if config.center else 0
    total = (n_frames - 1) * hop + n
    num = np.zeros(total, dtype=windowed_frames.dtype)
    for k in range(n_frames):
        num[k * hop : k * hop + n] += windowed_frames[k]
    den = _synthesis_weight(config, n_frames)

    lo, hi = pad, pad + length
    if hi > total:
        raise ValueError(f"requested length {length} exceeds frame coverage")
    den_out = den[lo:hi]
    uncovered = den_out < _COVERAGE_EPS * np.max(den)
    if not uncovered.any():
        return num[lo:hi] / den_out
    # zero-weight samples can only be tolerated at the very edges of the
    # synthesized span (e.g. a Hann window's first sample with no overlap
    # from a neighbor); anywhere else the window/hop pair is unusable
    positions = np.flatnonzero(uncovered) + lo
    if np.any((positions >= n) & (positions < total - n)):
        raise ValueError(
            "window/hop pair leaves output samples uncovered (overlap-add violation)"
        )
    out = np.zeros(length)
    covered = ~uncovered
    out[covered] = num[lo:hi][covered] / den_out[covered]
    return out


@functools.lru_cache(maxsize=32)
def _synthesis_weight(config: StftConfig, n_frames: int) -> np.ndarray:
    """Sum of squared windows over the synthesized frames (read-only, cached)."""
    n, hop = config.frame_size, config.hop_size
    wsq = make_window(config.window, n) ** 2
    den = np.zeros((n_frames - 1) * hop + n)
    for k in range(n_frames):
        den[k * hop : k * hop + n] += wsq
    den.setflags(write=False)
    return den
