"""Pitch-stability metrics and the training loss terms.

The harmonic error compares partial frequencies between a reference and a
reconstruction: for every frame, the fundamental and the first four
harmonics are located as the log-magnitude peaks closest to their nominal
frequencies, refined by three-point parabolic interpolation, and the error
is the absolute pitch-scale distance 12*|log2(f_est/f_ref)| in semitones.

Tracking runs on a 4096/256 analysis regardless of the vocoder's own grid,
so the measurement resolution does not depend on the system under test.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft

from .audio import AudioBuffer
from .gradients import SpectralTriple
from .stft import StftConfig, stft

#: analysis grid for partial tracking
TRACKER_CONFIG = StftConfig(frame_size=4096, hop_size=256, window="hann")

SEARCH_BAND_SEMITONES = 0.5
N_PARTIALS = 5  # fundamental + first 4 harmonics
EDGE_EXCLUDE_SECONDS = 0.1


@dataclass(frozen=True)
class LossConfig:
    weights: tuple[float, float, float, float] = (1.0, 0.1, 1.0, 1.0)
    cepstral_count: int = 20
    lambda_threshold: float = 0.5

    def __post_init__(self):
        if any(w < 0 for w in self.weights) or len(self.weights) != 4:
            raise ValueError("need 4 non-negative loss weights")
        if self.cepstral_count <= 0:
            raise ValueError("cepstral_count must be positive")


@dataclass(frozen=True)
class LossBreakdown:
    magnitude: float  # MSE on magnitude
    cepstral: float  # MSE on the first cepstral_count LFCC coefficients
    offsets: float  # power-weighted offset MSE, branched by lambda
    component: float  # power-weighted lambda MSE
    total: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.magnitude, self.cepstral, self.offsets, self.component, self.total)


def track_partial(
    magnitude: np.ndarray,
    sample_rate: int,
    fft_size: int,
    nominal_f: float,
    frame: int,
    band_semitones: float = SEARCH_BAND_SEMITONES,
) -> float | None:
    """Frequency (Hz) of the spectral peak nearest ``nominal_f`` at ``frame``.

    Searches a +-``band_semitones`` band around the nominal frequency for
    local log-magnitude maxima and refines the winner with a parabolic fit.
    Returns None when the band contains no local maximum (missing partial).
    """
    if not 0.0 < nominal_f < sample_rate / 2.0:
        raise ValueError(f"nominal frequency {nominal_f} outside (0, Nyquist)")
    bin_hz = sample_rate / fft_size
    lo_f = nominal_f * 2.0 ** (-band_semitones / 12.0)
    hi_f = nominal_f * 2.0 ** (band_semitones / 12.0)
    lo = max(1, int(math.floor(lo_f / bin_hz)))
    hi = min(magnitude.shape[0] - 2, int(math.ceil(hi_f / bin_hz)))
    if hi < lo:
        return None

    col = magnitude[:, frame]
    logmag = np.log10(np.maximum(col[lo - 1 : hi + 2], 1e-300))
    inner = logmag[1:-1]
    peaks = np.flatnonzero(
        ((inner > logmag[:-2]) & (inner >= logmag[2:]))
        | ((inner >= logmag[:-2]) & (inner > logmag[2:]))
    )
    if len(peaks) == 0:
        return None
    bins = peaks + lo
    k = bins[np.argmin(np.abs(bins * bin_hz - nominal_f))]

    ym1, y0, yp1 = (math.log10(max(col[k + d], 1e-300)) for d in (-1, 0, 1))
    denom = ym1 - 2.0 * y0 + yp1
    offset = 0.0 if denom == 0.0 else 0.5 * (ym1 - yp1) / denom
    return (k + offset) * bin_hz


def pitch_error_semitones(f_ref: float, f_est: float) -> float:
    """12 * |log2(f_est / f_ref)|; symmetric in its arguments."""
    return 12.0 * abs(math.log2(f_est / f_ref))


@dataclass
class HarmonicTrack:
    """Per-partial, per-frame errors for one (reference, estimate) pair."""

    errors: np.ndarray  # [N_PARTIALS, n_frames], NaN where a partial was missing
    missing: int

    @property
    def mean(self) -> float:
        vals = self.errors[np.isfinite(self.errors)]
        return float(vals.mean()) if vals.size else math.nan

    @property
    def max(self) -> float:
        vals = self.errors[np.isfinite(self.errors)]
        return float(vals.max()) if vals.size else math.nan


def harmonic_error(
    reference: AudioBuffer,
    estimate: AudioBuffer,
    f0: float,
    exclude_edges: float = EDGE_EXCLUDE_SECONDS,
) -> HarmonicTrack:
    """Harmonic error of ``estimate`` against ``reference`` for one pitch.

    Both signals are tracked on the 4096/256 grid; the estimate's search is
    seeded from the reference's tracked frequency per partial and frame.
    Frames whose centers fall in the first/last ``exclude_edges`` seconds are
    skipped (attack/release transients are not sustained content).
    """
    sr = reference.sample_rate
    if estimate.sample_rate != sr:
        raise ValueError("sample rate mismatch between reference and estimate")
    if abs(len(reference) - len(estimate)) > TRACKER_CONFIG.hop_size:
        raise ValueError(
            f"length mismatch beyond one hop: {len(reference)} vs {len(estimate)}"
        )
    if f0 * N_PARTIALS >= sr / 2.0:
        raise ValueError(f"partial {N_PARTIALS} of f0={f0} exceeds Nyquist")

    n = min(len(reference), len(estimate))
    ref_mag = stft(AudioBuffer(reference.samples[:n], sr), TRACKER_CONFIG).magnitude
    est_mag = stft(AudioBuffer(estimate.samples[:n], sr), TRACKER_CONFIG).magnitude

    hop = TRACKER_CONFIG.hop_size
    n_frames = ref_mag.shape[1]
    centers = np.arange(n_frames) * hop / sr
    duration = n / sr
    keep = (centers >= exclude_edges) & (centers <= duration - exclude_edges)
    frames = np.flatnonzero(keep)

    errors = np.full((N_PARTIALS, len(frames)), np.nan)
    missing = 0
    fft = TRACKER_CONFIG.fft_size
    for h in range(N_PARTIALS):
        nominal = (h + 1) * f0
        for j, frame in enumerate(frames):
            f_ref = track_partial(ref_mag, sr, fft, nominal, frame)
            if f_ref is None:
                missing += 1
                continue
            f_est = track_partial(est_mag, sr, fft, f_ref, frame)
            if f_est is None:
                missing += 1
                continue
            errors[h, j] = pitch_error_semitones(f_ref, f_est)
    return HarmonicTrack(errors, missing)


@dataclass
class NoteResult:
    name: str
    midi_pitches: tuple[int, ...]
    tracks: list[HarmonicTrack]  # one per constituent pitch

    @property
    def mean(self) -> float:
        vals = np.concatenate([t.errors.ravel() for t in self.tracks])
        vals = vals[np.isfinite(vals)]
        return float(vals.mean()) if vals.size else math.nan

    @property
    def max(self) -> float:
        vals = np.concatenate([t.errors.ravel() for t in self.tracks])
        vals = vals[np.isfinite(vals)]
        return float(vals.max()) if vals.size else math.nan

    @property
    def missing(self) -> int:
        return sum(t.missing for t in self.tracks)


@dataclass
class HarmonicErrorReport:
    notes: list[NoteResult] = field(default_factory=list)

    @property
    def mean(self) -> float:
        vals = np.concatenate(
            [t.errors.ravel() for note in self.notes for t in note.tracks]
        )
        vals = vals[np.isfinite(vals)]
        return float(vals.mean()) if vals.size else math.nan

    @property
    def max(self) -> float:
        per_note = [note.max for note in self.notes if not math.isnan(note.max)]
        return max(per_note) if per_note else math.nan

    @property
    def missing(self) -> int:
        return sum(note.missing for note in self.notes)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "midi_pitches", "mean_semitones", "max_semitones", "missing"])
            for note in self.notes:
                writer.writerow(
                    [
                        note.name,
                        " ".join(str(p) for p in note.midi_pitches),
                        f"{note.mean:.6f}",
                        f"{note.max:.6f}",
                        note.missing,
                    ]
                )
            writer.writerow(["__corpus__", "", f"{self.mean:.6f}", f"{self.max:.6f}", self.missing])

    def pitch_curve(self, window_semitones: int = 12, stride_semitones: int = 6):
        """Moving-average (pitch, mean error) pairs for error-vs-pitch plots."""
        pitched = [
            (min(note.midi_pitches), note.mean)
            for note in self.notes
            if not math.isnan(note.mean)
        ]
        if not pitched:
            return []
        pitched.sort()
        lo = pitched[0][0]
        hi = pitched[-1][0]
        curve = []
        start = lo
        while start <= hi:
            in_win = [e for p, e in pitched if start <= p < start + window_semitones]
            if in_win:
                curve.append((start + window_semitones / 2.0, float(np.mean(in_win))))
            start += stride_semitones
        return curve


def corpus_report(
    entries: list[dict],
    references: list[AudioBuffer],
    estimates: list[AudioBuffer],
) -> HarmonicErrorReport:
    """Score matched (reference, estimate) pairs described by manifest entries.

    Each entry needs "name", "midi_pitches" and "f0_hz"; chords contribute
    one harmonic track per constituent pitch.
    """
    if not (len(entries) == len(references) == len(estimates)):
        raise ValueError("corpus mismatch: entries/references/estimates differ in length")
    report = HarmonicErrorReport()
    for entry, ref, est in zip(entries, references, estimates):
        tracks = [harmonic_error(ref, est, f0) for f0 in entry["f0_hz"]]
        report.notes.append(
            NoteResult(entry["name"], tuple(entry["midi_pitches"]), tracks)
        )
    return report


def _dct_truncated(values: np.ndarray, count: int) -> np.ndarray:
    """First ``count`` coefficients of the orthonormal DCT-II along frequency."""
    return scipy.fft.dct(values, type=2, norm="ortho", axis=0)[:count]


def losses(
    estimate: SpectralTriple,
    estimate_lam: np.ndarray,
    target: SpectralTriple,
    target_lam: np.ndarray,
    cfg: LossConfig = LossConfig(),
) -> LossBreakdown:
    """The four spectral loss terms and their weighted sum.

    All means are taken over the full [bin, frame] grid.  The offset term is
    branched per bin by the target component map: bins with lambda above the
    threshold contribute their frequency-offset error, the rest contribute
    their time-offset error.  Offset and component errors are weighted by
    the target power spectrum.
    """
    if estimate.magnitude.shape != target.magnitude.shape:
        raise ValueError(
            f"grid mismatch: estimate {estimate.magnitude.shape} vs target {target.magnitude.shape}"
        )
    if estimate_lam.shape != target_lam.shape or estimate_lam.shape != target.magnitude.shape:
        raise ValueError("lambda grids do not match the triples")

    grid = target.magnitude.size
    power = target.magnitude**2

    l1 = float(np.mean((estimate.magnitude - target.magnitude) ** 2))

    d_est = _dct_truncated(estimate.magnitude, cfg.cepstral_count)
    d_tgt = _dct_truncated(target.magnitude, cfg.cepstral_count)
    l2 = float(np.sum((d_est - d_tgt) ** 2) / grid)

    sin_branch = target_lam > cfg.lambda_threshold
    off_err = np.where(
        sin_branch,
        (estimate.delta_m - target.delta_m) ** 2,
        (estimate.delta_n - target.delta_n) ** 2,
    )
    l3 = float(np.mean(power * off_err))

    l4 = float(np.mean(power * (estimate_lam - target_lam) ** 2))

    w = cfg.weights
    total = w[0] * l1 + w[1] * l2 + w[2] * l3 + w[3] * l4
    return LossBreakdown(l1, l2, l3, l4, total)
