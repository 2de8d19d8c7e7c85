"""Mel filterbank, log-amplitude mel spectrogram, and the mel-to-linear warp.

The warp back to linear frequency uses the normalized transpose of the
filterbank (each band's weights divided by the band's weight sum).  That
keeps the inverse non-negative and cheap; it is not a least-squares
pseudo-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_N_MELS = 96
DEFAULT_LOG_FLOOR = 1e-10


def hz_to_mel(f):
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filterbank over the linear-frequency bin grid."""

    weights: np.ndarray  # [n_mels, n_bins], all >= 0
    center_frequencies: np.ndarray  # [n_mels], Hz, strictly increasing
    f_min: float
    f_max: float
    sample_rate: int
    fft_size: int
    scale: str = "htk"

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]

    @property
    def n_bins(self) -> int:
        return self.weights.shape[1]


def make_mel_filterbank(
    n_mels: int = DEFAULT_N_MELS,
    fft_size: int = 2048,
    sample_rate: int = 44100,
    f_min: float = 0.0,
    f_max: float | None = None,
    scale: str = "htk",
) -> MelFilterbank:
    """Build triangular filters with mel-spaced center frequencies."""
    if scale != "htk":
        raise ValueError(f"unsupported mel scale {scale!r}")
    if f_max is None:
        f_max = sample_rate / 2.0
    if not 0.0 <= f_min < f_max <= sample_rate / 2.0:
        raise ValueError(f"need 0 <= f_min < f_max <= Nyquist, got [{f_min}, {f_max}]")

    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size

    lower, center, upper = edges[:-2], edges[1:-1], edges[2:]
    up = (bin_freqs[None, :] - lower[:, None]) / (center - lower)[:, None]
    down = (upper[:, None] - bin_freqs[None, :]) / (upper - center)[:, None]
    weights = np.maximum(0.0, np.minimum(up, down))
    return MelFilterbank(weights, center, float(f_min), float(f_max), sample_rate, fft_size, scale)


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-amplitude mel values [band, frame]; floored before the log."""

    values: np.ndarray
    log_floor: float = DEFAULT_LOG_FLOOR

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("mel spectrogram contains non-finite values")

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def mel_forward(
    magnitude: np.ndarray, fb: MelFilterbank, log_floor: float = DEFAULT_LOG_FLOOR
) -> MelSpectrogram:
    """log10 of the mel-warped power spectrogram, floored at ``log_floor``."""
    if magnitude.shape[0] != fb.n_bins:
        raise ValueError(f"magnitude has {magnitude.shape[0]} bins, filterbank {fb.n_bins}")
    power = fb.weights @ (magnitude * magnitude)
    return MelSpectrogram(np.log10(np.maximum(power, log_floor)), log_floor)


def warp_matrix(fb: MelFilterbank) -> np.ndarray:
    """Mel-to-linear warp [n_bins, n_mels]: transpose with unit band sums."""
    sums = fb.weights.sum(axis=1)
    if np.any(sums <= 0):
        raise ValueError("filterbank has an empty band")
    return (fb.weights / sums[:, None]).T


def mel_to_linear(mel: MelSpectrogram, fb: MelFilterbank) -> np.ndarray:
    """Invert the log and warp mel power back onto the linear bin grid.

    Returns a magnitude spectrogram [n_bins, n_frames]; values are >= 0 by
    construction since the warp matrix is non-negative.
    """
    if mel.n_mels != fb.n_mels:
        raise ValueError(f"mel has {mel.n_mels} bands, filterbank {fb.n_mels}")
    power = warp_matrix(fb) @ (10.0 ** mel.values)
    return np.sqrt(np.maximum(power, 0.0))


def standardize_stats(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (band or bin) mean and standard deviation over frames.

    Used to standardize trainer inputs/targets; std is floored to avoid
    dividing by zero on constant rows.
    """
    mean = values.mean(axis=1)
    std = np.maximum(values.std(axis=1), 1e-8)
    return mean, std
