"""pgvoc: spectral vocoder built on magnitude + phase-gradient targets.

Audio is analyzed into (magnitude, frequency-offset, time-offset) triples;
a component map classifies each bin as sinusoidal or impulsive, phase is
re-integrated accordingly, and the inverse STFT renders audio.  The package
also ships the full evaluation stack: an additive-synthesis corpus, a
harmonic pitch-stability metric, and a Griffin-Lim baseline.
"""

from .audio import AudioBuffer, read_wav, write_wav
from .gla import GlaConfig, griffin_lim, invert_mel_gla
from .gradients import (
    SpectralTriple,
    analyze_triple,
    bin_offsets,
    lambda_map,
    phase_gradients,
    reassignment_coords,
)
from .integrate import IntegrationConfig, integrate_phase, resynthesize
from .mel import MelFilterbank, MelSpectrogram, make_mel_filterbank, mel_forward, mel_to_linear
from .metrics import LossConfig, corpus_report, harmonic_error, losses, track_partial
from .runconfig import RunConfig, load_run_config
from .stft import ComplexSpectrogram, StftConfig, istft, stft
from .synth import CorpusManifest, NoteSpec, build_corpus, desk_corpus, synth_note
from .tensorfile import TensorFile, read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "ComplexSpectrogram",
    "CorpusManifest",
    "GlaConfig",
    "IntegrationConfig",
    "LossConfig",
    "MelFilterbank",
    "MelSpectrogram",
    "NoteSpec",
    "RunConfig",
    "SpectralTriple",
    "StftConfig",
    "TensorFile",
    "analyze_triple",
    "bin_offsets",
    "build_corpus",
    "corpus_report",
    "desk_corpus",
    "griffin_lim",
    "harmonic_error",
    "integrate_phase",
    "invert_mel_gla",
    "istft",
    "lambda_map",
    "load_run_config",
    "losses",
    "make_mel_filterbank",
    "mel_forward",
    "mel_to_linear",
    "phase_gradients",
    "read_tensor",
    "read_wav",
    "reassignment_coords",
    "resynthesize",
    "stft",
    "synth_note",
    "track_partial",
    "write_tensor",
    "write_wav",
]
