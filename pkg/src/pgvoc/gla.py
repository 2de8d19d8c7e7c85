"""Griffin-Lim baseline: iterative phase retrieval from a magnitude target.

Implements the momentum-accelerated (fast) variant; momentum = 0 recovers
the classic alternating-projection algorithm.  Starting phase is seeded
uniform random so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .mel import MelFilterbank, MelSpectrogram, mel_to_linear
from .stft import StftConfig, _analysis_transform, _istft_complex, _synthesis_transform


@dataclass(frozen=True)
class GlaConfig:
    iterations: int = 500
    momentum: float = 0.99
    rng_seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")


def griffin_lim(
    magnitude: np.ndarray,
    stft_config: StftConfig,
    sample_rate: int,
    config: GlaConfig = GlaConfig(),
    length: int | None = None,
) -> tuple[AudioBuffer, np.ndarray]:
    """Recover audio whose STFT magnitude approximates ``magnitude``.

    Returns (audio, convergence): convergence[i] is the relative spectral
    distance || |STFT(x_i)| - M || / ||M|| observed at iteration i.
    """
    if magnitude.shape[0] != stft_config.n_bins:
        raise ValueError(
            f"magnitude has {magnitude.shape[0]} bins, config {stft_config.n_bins}"
        )
    if not np.all(np.isfinite(magnitude)):
        raise ValueError("magnitude contains non-finite values")

    rng = np.random.default_rng(config.rng_seed)
    init = np.exp(2j * np.pi * rng.random(magnitude.T.shape))
    if np.linalg.norm(magnitude) == 0.0 or config.iterations == 0:
        audio = _istft_complex((magnitude.T * init).T, stft_config, sample_rate, length)
        return audio, np.zeros(0)

    # iterate frame-major in single precision: each pass over the grid is
    # memory-bound and the fixed point sits far above float32 resolution
    mag_t = np.ascontiguousarray(magnitude.T, dtype=np.float32)
    estimate = (mag_t * init).astype(np.complex64)
    mag_norm = float(np.linalg.norm(mag_t))
    momentum = np.float32(config.momentum)
    convergence = np.empty(config.iterations)
    samples = None
    prev = None
    for it in range(config.iterations):
        # alternate the two projections; accelerate with momentum extrapolation
        projected = estimate * (mag_t / (np.abs(estimate) + np.float32(1e-30)))
        samples = _synthesis_transform(projected, stft_config, length)
        rebuilt = _analysis_transform(samples.astype(np.float32), stft_config)
        convergence[it] = np.linalg.norm(np.abs(rebuilt) - mag_t) / mag_norm
        estimate = rebuilt if prev is None else rebuilt + momentum * (rebuilt - prev)
        prev = rebuilt

    return AudioBuffer(samples, sample_rate), convergence


def invert_mel_gla(
    mel: MelSpectrogram,
    fb: MelFilterbank,
    stft_config: StftConfig,
    sample_rate: int,
    config: GlaConfig = GlaConfig(),
    length: int | None = None,
) -> tuple[AudioBuffer, np.ndarray]:
    """Mel spectrogram -> linear magnitude (warp) -> Griffin-Lim."""
    magnitude = mel_to_linear(mel, fb)
    return griffin_lim(magnitude, stft_config, sample_rate, config, length)
