"""Command-line interface.

Verbs: synth, analyze, oracle, invert, gla, evaluate, reassign, pipeline.
Exit codes: 0 success, 2 usage (argparse), 3 I/O failure, 4 malformed input
file (WAV/tensor/config), 5 validation error, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, WavFormatError, read_wav, write_wav
from .gla import GlaConfig, griffin_lim, invert_mel_gla
from .gradients import analyze_triple, lambda_map, reassignment_coords, silence_mask
from .integrate import IntegrationConfig, integrate_phase_timed, resynthesize
from .mel import mel_forward
from .metrics import HarmonicErrorReport, NoteResult, harmonic_error
from .runconfig import ConfigError, RunConfig, load_run_config
from .stft import istft, stft
from .synth import build_corpus, load_manifest
from .tensorfile import (
    TensorFormatError,
    mel_tensor,
    read_tensor,
    tensor_to_mel,
    tensor_to_triple,
    triple_tensor,
    write_tensor,
)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_VALIDATION = 5


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_run_config(args.config)
    return RunConfig()


def _integration_config(cfg: RunConfig, args) -> IntegrationConfig:
    base = cfg.integration
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    if getattr(args, "rule", None):
        overrides["rule"] = args.rule
    if getattr(args, "lambda_impulsive", None) is not None:
        overrides["lambda_impulsive"] = args.lambda_impulsive
    if getattr(args, "lambda_sinusoidal", None) is not None:
        overrides["lambda_sinusoidal"] = args.lambda_sinusoidal
    return dataclasses.replace(base, **overrides) if overrides else base


def cmd_synth(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.seed is not None:
        manifest.seed = args.seed
    path = build_corpus(manifest, args.output)
    print(f"wrote {len(manifest.notes)} files, manifest {path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    audio = read_wav(args.input)
    spec = stft(audio, cfg.stft)
    mel = mel_forward(spec.magnitude, cfg.filterbank(), cfg.mel.log_floor)
    write_tensor(args.output, mel_tensor(mel, cfg.stft, audio.sample_rate))
    print(f"mel {mel.n_mels}x{mel.n_frames} -> {args.output}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    audio = read_wav(args.input)
    triple, lam = analyze_triple(audio, cfg.stft, backend=args.backend)
    write_tensor(args.output, triple_tensor(triple, lam))
    print(f"triple+lambda {triple.magnitude.shape[0]}x{triple.n_frames} -> {args.output}")
    return EXIT_OK


def cmd_invert(args) -> int:
    cfg = _load_config(args)
    triple, lam = tensor_to_triple(read_tensor(args.input), window=cfg.stft.window)
    integration = _integration_config(cfg, args)
    audio = resynthesize(triple, integration, lam=lam, length=args.length)
    write_wav(args.output, audio)
    print(f"{len(audio)} samples -> {args.output}")
    return EXIT_OK


def cmd_gla(args) -> int:
    cfg = _load_config(args)
    gla_cfg = cfg.gla
    overrides = {}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.momentum is not None:
        overrides["momentum"] = args.momentum
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if overrides:
        gla_cfg = dataclasses.replace(gla_cfg, **overrides)
    tensor = read_tensor(args.input)
    mel = tensor_to_mel(tensor)
    audio, convergence = invert_mel_gla(
        mel, cfg.filterbank(), cfg.stft, tensor.sample_rate, gla_cfg, length=args.length
    )
    write_wav(args.output, audio)
    final = convergence[-1] if len(convergence) else float("nan")
    print(f"{len(audio)} samples -> {args.output} (spectral convergence {final:.4f})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    entries = json.loads(Path(args.manifest).read_text())["notes"]
    report = HarmonicErrorReport()
    ref_dir, est_dir = Path(args.reference_dir), Path(args.estimate_dir)
    for entry in entries:
        ref = read_wav(ref_dir / entry["file"])
        est = read_wav(est_dir / entry["file"])
        tracks = [harmonic_error(ref, est, f0) for f0 in entry["f0_hz"]]
        report.notes.append(NoteResult(entry["name"], tuple(entry["midi_pitches"]), tracks))
    report.write_csv(args.output)
    if args.curve:
        with open(args.curve, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["midi_center", "mean_semitones"])
            for pitch, err in report.pitch_curve():
                writer.writerow([f"{pitch:.1f}", f"{err:.6f}"])
    print(
        f"{len(report.notes)} pairs: mean {report.mean:.4f} st, "
        f"max {report.max:.4f} st, missing {report.missing}"
    )
    return EXIT_OK


def cmd_reassign(args) -> int:
    cfg = _load_config(args)
    audio = read_wav(args.input)
    triple, _ = analyze_triple(audio, cfg.stft, backend=args.backend)
    m_dot, n_dot = reassignment_coords(triple.delta_m, triple.delta_n)
    keep = ~silence_mask(triple.magnitude, args.min_db)
    bins, frames = np.nonzero(keep)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "frame", "m_dot", "n_dot", "magnitude"])
        for b, f in zip(bins, frames):
            writer.writerow(
                [b, f, f"{m_dot[b, f]:.4f}", f"{n_dot[b, f]:.4f}", f"{triple.magnitude[b, f]:.6e}"]
            )
    print(f"{len(bins)} reassigned points -> {args.output}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    audio = read_wav(args.input)
    integration = _integration_config(cfg, args)

    t0 = time.perf_counter()
    if args.mode == "oracle":
        triple, lam = analyze_triple(audio, cfg.stft)
    elif args.mode == "external-triple":
        if not args.triple:
            raise ValueError("external-triple mode needs --triple")
        triple, lam = tensor_to_triple(read_tensor(args.triple), window=cfg.stft.window)
    else:  # gla
        spec = stft(audio, cfg.stft)
        fb = cfg.filterbank()
        mel = mel_forward(spec.magnitude, fb, cfg.mel.log_floor)
        t1 = time.perf_counter()
        gla_cfg = cfg.gla if args.seed is None else dataclasses.replace(cfg.gla, rng_seed=args.seed)
        out, _ = invert_mel_gla(mel, fb, cfg.stft, audio.sample_rate, gla_cfg, length=len(audio))
        t2 = time.perf_counter()
        write_wav(args.output, out)
        _report_pipeline(args, audio, out, analysis=t1 - t0, integration=t2 - t1, inverse=0.0)
        return EXIT_OK

    t1 = time.perf_counter()
    if lam is None:
        m_dot, n_dot = reassignment_coords(triple.delta_m, triple.delta_n)
        lam = lambda_map(m_dot, n_dot, silent=silence_mask(triple.magnitude))
    phase, integ_seconds = integrate_phase_timed(triple, lam, integration)
    t2 = time.perf_counter()
    out = istft(
        triple.magnitude, phase, triple.config, triple.sample_rate, length=len(audio)
    )
    t3 = time.perf_counter()
    write_wav(args.output, out)
    _report_pipeline(
        args, audio, out, analysis=t1 - t0, integration=integ_seconds, inverse=t3 - t2
    )
    return EXIT_OK


def _report_pipeline(args, reference, estimate, analysis, integration, inverse) -> None:
    seconds = len(estimate) / estimate.sample_rate
    rtf = seconds / integration if integration > 0 else float("inf")
    line = (
        f"stages[s] analysis={analysis:.3f} integration={integration:.3f} "
        f"istft={inverse:.3f} integration_rtf={rtf:.1f}"
    )
    if args.f0:
        track = harmonic_error(reference, estimate, args.f0)
        line += f" herr_mean={track.mean:.4f} herr_max={track.max:.4f}"
    print(line)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pgvoc",
        description="Spectral vocoder tools: analysis, phase integration, baselines, metrics.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, output=True):
        p.add_argument("--config", help="run configuration JSON")
        p.add_argument("--seed", type=int, help="override configured RNG seed")
        if output:
            p.add_argument("--output", required=True)

    p = sub.add_parser("synth", help="render a note corpus from a manifest")
    p.add_argument("--manifest", required=True)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="WAV -> log-mel tensor")
    p.add_argument("input")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("oracle", help="WAV -> (magnitude, offsets, lambda) tensor")
    p.add_argument("input")
    p.add_argument("--backend", default="auger_flandrin")
    common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("invert", help="triple tensor -> WAV via phase integration")
    p.add_argument("input")
    p.add_argument("--rule", choices=("forward", "trapezoidal"))
    p.add_argument("--lambda-impulsive", type=float, dest="lambda_impulsive")
    p.add_argument("--lambda-sinusoidal", type=float, dest="lambda_sinusoidal")
    p.add_argument("--length", type=int, help="output length in samples")
    common(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("gla", help="mel tensor -> WAV via Griffin-Lim")
    p.add_argument("input")
    p.add_argument("--iterations", type=int)
    p.add_argument("--momentum", type=float)
    p.add_argument("--length", type=int)
    common(p)
    p.set_defaults(func=cmd_gla)

    p = sub.add_parser("evaluate", help="score reconstructions against references")
    p.add_argument("--manifest", required=True, help="built corpus manifest JSON")
    p.add_argument("--reference-dir", required=True)
    p.add_argument("--estimate-dir", required=True)
    p.add_argument("--curve", help="also write the smoothed error-vs-pitch CSV here")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reassign", help="WAV -> reassigned coordinates CSV")
    p.add_argument("input")
    p.add_argument("--backend", default="auger_flandrin")
    p.add_argument("--min-db", type=float, default=-80.0, dest="min_db")
    common(p)
    p.set_defaults(func=cmd_reassign)

    p = sub.add_parser("pipeline", help="end-to-end WAV -> WAV with stage timings")
    p.add_argument("input")
    p.add_argument("--mode", choices=("oracle", "gla", "external-triple"), default="oracle")
    p.add_argument("--triple", help="tensor file for external-triple mode")
    p.add_argument("--f0", type=float, help="report harmonic error against this fundamental")
    p.add_argument("--rule", choices=("forward", "trapezoidal"))
    p.add_argument("--lambda-impulsive", type=float, dest="lambda_impulsive")
    p.add_argument("--lambda-sinusoidal", type=float, dest="lambda_sinusoidal")
    common(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TensorFormatError, WavFormatError, ConfigError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # pragma: no cover - safety net
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
