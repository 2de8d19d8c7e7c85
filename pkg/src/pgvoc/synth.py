"""Deterministic additive synthesizer for the evaluation corpus.

Notes are sums of harmonic partials with per-timbre amplitude rolloffs and
ADSR envelopes; initial partial phases come from a seeded generator, so a
manifest always renders to bit-identical files.  Partials that would land at
or above the Nyquist guard band are dropped, never aliased.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, write_wav

A4_HZ = 440.0
PEAK_DBFS = -3.0
NYQUIST_GUARD = 0.998  # keep partials strictly below 0.999 * Nyquist

#: interval sets rendered for the corpus, in semitones above the root.
#: "triad_open" fixes the open voicing as root + fifth + tenth.
INTERVAL_SETS: dict[str, tuple[int, ...]] = {
    "note": (0,),
    "octave": (0, 12),
    "major_12th": (0, 19),
    "fifth": (0, 7),
    "triad_close": (0, 4, 7),
    "triad_open": (0, 7, 16),
    "maj7_close": (0, 4, 7, 11),
}

CORPUS_LOW_MIDI = 36  # C2
CORPUS_HIGH_MIDI = 96  # C7


@dataclass(frozen=True)
class Timbre:
    """Harmonic amplitude profile plus envelope shape."""

    amplitudes: tuple[float, ...]  # partial h gets amplitudes[h-1]
    attack: float  # seconds
    decay: float
    sustain: float  # level relative to the post-attack peak
    release: float
    partial_decay: float = 0.0  # extra exp decay rate per second, scaled by partial index


def _rolloff(n: int, power: float, odd_boost: float = 1.0) -> tuple[float, ...]:
    amps = []
    for h in range(1, n + 1):
        a = 1.0 / h**power
        if h % 2 == 1:
            a *= odd_boost
        amps.append(a)
    return tuple(amps)


TIMBRES: dict[str, Timbre] = {
    # mellow electric piano: steep rolloff, gentle decay to a strong sustain
    "rhodes": Timbre(_rolloff(8, 1.8), 0.008, 0.15, 0.75, 0.04, partial_decay=0.4),
    # drawbar-style organ: slow rolloff, near-flat envelope
    "organ": Timbre(_rolloff(10, 1.0), 0.02, 0.0, 1.0, 0.03),
    # bowed ensemble: saw-like spectrum, slower attack
    "string": Timbre(_rolloff(12, 1.2), 0.06, 0.1, 0.9, 0.05),
    # plucked string: bright onset, partials fade progressively
    "plucked": Timbre(_rolloff(10, 1.0), 0.004, 0.25, 0.55, 0.03, partial_decay=1.2),
}


@dataclass(frozen=True)
class NoteSpec:
    midi_pitches: tuple[int, ...]
    duration: float = 1.0
    timbre: str = "organ"
    detune_cents: float = 0.0

    def __post_init__(self):
        if not self.midi_pitches:
            raise ValueError("a note needs at least one pitch")
        if self.timbre not in TIMBRES:
            raise ValueError(f"unknown timbre {self.timbre!r} (know {sorted(TIMBRES)})")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "midi_pitches", tuple(int(p) for p in self.midi_pitches))


@dataclass
class CorpusManifest:
    sample_rate: int = 44100
    seed: int = 0
    notes: list[NoteSpec] = field(default_factory=list)


def midi_to_hz(midi: float) -> float:
    """12-TET frequency, A4 = 440 Hz."""
    return A4_HZ * 2.0 ** ((midi - 69) / 12.0)


def adsr_envelope(t: np.ndarray, timbre: Timbre, duration: float) -> np.ndarray:
    env = np.ones_like(t)
    if timbre.attack > 0:
        env = np.minimum(env, t / timbre.attack)
    if timbre.decay > 0 and timbre.sustain < 1.0:
        after = np.clip(t - timbre.attack, 0.0, None)
        env *= timbre.sustain + (1.0 - timbre.sustain) * np.exp(-after / timbre.decay)
    if timbre.release > 0:
        env *= np.clip((duration - t) / timbre.release, 0.0, 1.0)
    return env


def synth_note(spec: NoteSpec, sample_rate: int, seed: int) -> AudioBuffer:
    """Render one note/chord; peak-normalized to -3 dBFS."""
    timbre = TIMBRES[spec.timbre]
    n = int(round(spec.duration * sample_rate))
    t = np.arange(n) / sample_rate
    rng = np.random.default_rng([abs(seed), *[p + 128 for p in spec.midi_pitches]])
    limit = NYQUIST_GUARD * sample_rate / 2.0

    x = np.zeros(n)
    for pitch in spec.midi_pitches:
        f0 = midi_to_hz(pitch + spec.detune_cents / 100.0)
        for h, amp in enumerate(timbre.amplitudes, start=1):
            freq = h * f0
            if freq >= limit:
                break
            theta = rng.uniform(-np.pi, np.pi)
            partial = amp * np.sin(2.0 * np.pi * freq * t + theta)
            if timbre.partial_decay > 0 and h > 1:
                partial *= np.exp(-timbre.partial_decay * (h - 1) * t / len(timbre.amplitudes))
            x += partial

    x *= adsr_envelope(t, timbre, spec.duration)
    peak = np.max(np.abs(x))
    if peak > 0:
        x *= 10.0 ** (PEAK_DBFS / 20.0) / peak
    return AudioBuffer(x, sample_rate)


def note_name(spec: NoteSpec) -> str:
    pitches = "-".join(str(p) for p in spec.midi_pitches)
    return f"{spec.timbre}_{pitches}"


def build_corpus(manifest: CorpusManifest, out_dir) -> Path:
    """Render every note to WAV and write the machine-readable manifest.

    Returns the path of the manifest JSON.  Rendering is deterministic in
    (manifest.seed, pitches), so rebuilding reproduces identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    seen = set()
    for spec in manifest.notes:
        name = note_name(spec)
        if name in seen:
            raise ValueError(f"duplicate corpus entry {name}")
        seen.add(name)
        audio = synth_note(spec, manifest.sample_rate, manifest.seed)
        path = out / f"{name}.wav"
        write_wav(path, audio, encoding="float32")
        entries.append(
            {
                "name": name,
                "file": path.name,
                "midi_pitches": list(spec.midi_pitches),
                "f0_hz": [midi_to_hz(p + spec.detune_cents / 100.0) for p in spec.midi_pitches],
                "timbre": spec.timbre,
                "duration": spec.duration,
                "seed": manifest.seed,
            }
        )
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps(
            {"sample_rate": manifest.sample_rate, "seed": manifest.seed, "notes": entries},
            indent=2,
        )
    )
    return manifest_path


def desk_corpus(
    note_stride: int = 3,
    chord_stride: int = 12,
    timbres=tuple(TIMBRES),
    interval_names=tuple(INTERVAL_SETS),
    duration: float = 1.0,
    sample_rate: int = 44100,
    seed: int = 0,
) -> CorpusManifest:
    """The desk-scale evaluation corpus: C2..C7 roots, all four timbres.

    Single notes step by ``note_stride`` semitones; chords by
    ``chord_stride``.  Chord roots are capped so no constituent exceeds C7.
    """
    notes = []
    for set_name in interval_names:
        intervals = INTERVAL_SETS[set_name]
        stride = note_stride if set_name == "note" else chord_stride
        top = CORPUS_HIGH_MIDI - max(intervals)
        for root in range(CORPUS_LOW_MIDI, top + 1, stride):
            for timbre in timbres:
                pitches = tuple(root + i for i in intervals)
                notes.append(NoteSpec(pitches, duration, timbre))
    return CorpusManifest(sample_rate=sample_rate, seed=seed, notes=notes)


def load_manifest(path) -> CorpusManifest:
    """Read a manifest JSON (hand-written or produced by :func:`build_corpus`)."""
    raw = json.loads(Path(path).read_text())
    known = {"sample_rate", "seed", "notes", "duration"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
    duration = float(raw.get("duration", 1.0))
    specs = [
        NoteSpec(
            tuple(entry["midi_pitches"]),
            float(entry.get("duration", duration)),
            entry.get("timbre", "organ"),
            float(entry.get("detune_cents", 0.0)),
        )
        for entry in raw["notes"]
    ]
    return CorpusManifest(
        sample_rate=int(raw.get("sample_rate", 44100)),
        seed=int(raw.get("seed", 0)),
        notes=specs,
    )
