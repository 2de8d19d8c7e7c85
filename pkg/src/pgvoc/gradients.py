"""Phase gradients, bin offsets, reassignment coordinates and the component map.

Two backends estimate the phase gradient:

* ``auger_flandrin`` forms three STFTs (window w, derivative window w', and
  time-ramped window i*w) and takes cross-spectral ratios.  With X the
  centered STFT and phase = arg X:

      inst_freq   = omega_m - Im(X_dw * conj(X)) / |X|^2          [rad/sample]
      group_delay = -(2*pi/fft) * Re(X_tw * conj(X)) / |X|^2      [rad/bin]

* ``finite_difference`` takes centered differences of arg X, heterodyned by
  the expected per-hop advance omega_m * hop along time so that wrapping
  never introduces 2*pi jumps.

Sign conventions are pinned by two analytic facts (tested, not assumed): a
stationary sinusoid at frequency f has inst_freq = 2*pi*f/fs at every bin it
dominates, and an impulse tau samples after a frame center has
group_delay = -(2*pi/fft)*tau there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .stft import ComplexSpectrogram, StftConfig, frame_signal, _centered_rfft
from .windows import make_window, window_derivative, window_ramp

GRADIENT_BACKENDS = ("auger_flandrin", "finite_difference")

#: offsets are clipped to these bounds before being stored or learned
DELTA_M_CLIP = 4.0

#: bins this far (dB) below the spectrogram peak carry no usable phase
SILENCE_REL_DB = -100.0

LAMBDA_DIV_EPS = 1e-6


@dataclass(frozen=True)
class SpectralTriple:
    """Magnitude plus time/frequency bin offsets: the vocoder target space."""

    magnitude: np.ndarray  # [bin, frame], >= 0
    delta_m: np.ndarray  # frequency-bin offset, |.| <= DELTA_M_CLIP
    delta_n: np.ndarray  # time-frame offset, |.| <= fft/(2*hop)
    config: StftConfig
    sample_rate: int
    n_samples: int | None = None

    def __post_init__(self):
        shapes = {self.magnitude.shape, self.delta_m.shape, self.delta_n.shape}
        if len(shapes) != 1:
            raise ValueError(f"triple channels disagree on shape: {shapes}")
        if self.magnitude.shape[0] != self.config.n_bins:
            raise ValueError(
                f"triple has {self.magnitude.shape[0]} bins, config {self.config.n_bins}"
            )
        for name in ("magnitude", "delta_m", "delta_n"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def n_frames(self) -> int:
        return self.magnitude.shape[1]

    def delta_n_bound(self) -> float:
        return self.config.fft_size / (2.0 * self.config.hop_size)


def silence_mask(magnitude: np.ndarray, rel_db: float = SILENCE_REL_DB) -> np.ndarray:
    """True where a bin is too quiet for its phase to mean anything."""
    peak = np.max(magnitude)
    if peak <= 0.0:
        return np.ones(magnitude.shape, dtype=bool)
    return magnitude < peak * 10.0 ** (rel_db / 20.0)


def phase_gradients(
    audio: AudioBuffer,
    config: StftConfig,
    backend: str = "auger_flandrin",
    silence_rel_db: float = SILENCE_REL_DB,
) -> tuple[np.ndarray, np.ndarray, ComplexSpectrogram]:
    """Instantaneous frequency and local group delay of the STFT phase.

    Returns (inst_freq [rad/sample], group_delay [rad/bin], spectrogram).
    Bins below the silence threshold get the neutral values
    inst_freq = omega_m, group_delay = 0.
    """
    if backend not in GRADIENT_BACKENDS:
        raise ValueError(f"unknown gradient backend {backend!r} (know {GRADIENT_BACKENDS})")

    n = config.frame_size
    frames = frame_signal(audio.samples, config)
    window = make_window(config.window, n)
    data = _centered_rfft(frames * window, config)  # [frame, bin]
    spec = ComplexSpectrogram(data.T, config, audio.sample_rate, n_samples=len(audio))

    omegas = config.omegas[:, None]
    silent = silence_mask(spec.magnitude, silence_rel_db)

    if backend == "auger_flandrin":
        x_dw = _centered_rfft(frames * window_derivative(config.window, n), config).T
        x_tw = _centered_rfft(frames * window_ramp(config.window, n), config).T
        power = np.maximum(spec.magnitude**2, np.finfo(np.float64).tiny)
        inst_freq = omegas - np.imag(x_dw * np.conj(spec.data)) / power
        group_delay = (
            -(2.0 * np.pi / config.fft_size) * np.real(x_tw * np.conj(spec.data)) / power
        )
    else:
        inst_freq, group_delay = _finite_difference_gradients(spec)

    inst_freq = np.where(silent, omegas, inst_freq)
    group_delay = np.where(silent, 0.0, group_delay)
    return inst_freq, group_delay, spec


def _wrap(x: np.ndarray) -> np.ndarray:
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - x, 2.0 * np.pi)


def _finite_difference_gradients(spec: ComplexSpectrogram) -> tuple[np.ndarray, np.ndarray]:
    phase = spec.phase
    hop = spec.config.hop_size
    expected = spec.config.omegas[:, None] * hop  # heterodyne: advance per hop at bin m

    fwd_t = np.empty_like(phase)
    fwd_t[:, :-1] = _wrap(np.diff(phase, axis=1) - expected) + expected
    fwd_t[:, -1] = fwd_t[:, -2] if phase.shape[1] > 1 else expected[:, 0]
    bwd_t = np.empty_like(phase)
    bwd_t[:, 1:] = fwd_t[:, :-1]
    bwd_t[:, 0] = fwd_t[:, 0]
    inst_freq = (fwd_t + bwd_t) / (2.0 * hop)

    fwd_f = np.empty_like(phase)
    fwd_f[:-1, :] = _wrap(np.diff(phase, axis=0))
    fwd_f[-1, :] = fwd_f[-2, :]
    bwd_f = np.empty_like(phase)
    bwd_f[1:, :] = fwd_f[:-1, :]
    bwd_f[0, :] = fwd_f[0, :]
    group_delay = (fwd_f + bwd_f) / 2.0
    return inst_freq, group_delay


def bin_offsets(
    inst_freq: np.ndarray,
    group_delay: np.ndarray,
    config: StftConfig,
    clip: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Convert phase gradients to dimensionless bin offsets.

    delta_m = inst_freq * fft/(2*pi) - m,  delta_n = -group_delay * fft/(2*pi*hop);
    with ``clip`` the outliers are clamped to |delta_m| <= 4 and
    |delta_n| <= fft/(2*hop).
    """
    fft, hop = config.fft_size, config.hop_size
    m = np.arange(inst_freq.shape[0])[:, None]
    delta_m = inst_freq * fft / (2.0 * np.pi) - m
    delta_n = -group_delay * fft / (2.0 * np.pi * hop)
    if clip:
        delta_m = np.clip(delta_m, -DELTA_M_CLIP, DELTA_M_CLIP)
        bound = fft / (2.0 * hop)
        delta_n = np.clip(delta_n, -bound, bound)
    return delta_m, delta_n


def reassignment_coords(delta_m: np.ndarray, delta_n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Point of maximum contribution for every bin: (m + delta_m, n + delta_n)."""
    m = np.arange(delta_m.shape[0])[:, None]
    n = np.arange(delta_m.shape[1])[None, :]
    return m + delta_m, n + delta_n


def lambda_map(
    m_dot: np.ndarray,
    n_dot: np.ndarray,
    silent: np.ndarray | None = None,
    eps_div: float = LAMBDA_DIV_EPS,
) -> np.ndarray:
    """Sinusoidal-vs-impulsive score in [0, 1] per bin.

    lambda = exp(-((d/dm m_dot) / (d/dn n_dot))^2) with centered differences
    (one-sided at the grid edges).  Around a sinusoid the reassigned frequency
    is locally constant along frequency, so the numerator vanishes and
    lambda -> 1; around an impulse the reassigned time is constant along time,
    the denominator vanishes and lambda -> 0.  Degenerate denominators and
    silent bins map to 0.
    """
    dm = _centered_diff(m_dot, axis=0)
    dn = _centered_diff(n_dot, axis=1)
    degenerate = np.abs(dn) < eps_div
    ratio = np.where(degenerate, 0.0, dm / np.where(degenerate, 1.0, dn))
    ratio = np.clip(ratio, -1e9, 1e9)  # exp(-u^2) is 0 long before this; avoids overflow noise
    lam = np.where(degenerate, 0.0, np.exp(-(ratio**2)))
    if silent is not None:
        lam = np.where(silent, 0.0, lam)
    return lam


def _centered_diff(x: np.ndarray, axis: int) -> np.ndarray:
    if x.shape[axis] < 2:
        return np.zeros_like(x)
    return np.gradient(x, axis=axis, edge_order=1)


def analyze_triple(
    audio: AudioBuffer,
    config: StftConfig,
    backend: str = "auger_flandrin",
    silence_rel_db: float = SILENCE_REL_DB,
) -> tuple[SpectralTriple, np.ndarray]:
    """Oracle analysis: (magnitude, delta_m, delta_n) plus the component map.

    The component map is computed from the unclipped reassignment
    coordinates; clipping applies only to the offsets that get stored.
    """
    inst_freq, group_delay, spec = phase_gradients(audio, config, backend, silence_rel_db)
    raw_m, raw_n = bin_offsets(inst_freq, group_delay, config, clip=False)
    lam = lambda_map(*reassignment_coords(raw_m, raw_n), silent=silence_mask(spec.magnitude, silence_rel_db))
    delta_m, delta_n = bin_offsets(inst_freq, group_delay, config, clip=True)
    triple = SpectralTriple(
        spec.magnitude, delta_m, delta_n, config, audio.sample_rate, n_samples=spec.n_samples
    )
    return triple, lam
