"""Run configuration: one JSON file holding every tunable.

Unknown keys are rejected at every level so typos fail loudly instead of
silently running with defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .gla import GlaConfig
from .integrate import IntegrationConfig
from .mel import DEFAULT_LOG_FLOOR, DEFAULT_N_MELS, MelFilterbank, make_mel_filterbank
from .metrics import LossConfig
from .stft import StftConfig


class ConfigError(Exception):
    """Raised for malformed or contradictory run configuration files."""


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = DEFAULT_N_MELS
    f_min: float = 0.0
    f_max: float | None = None
    scale: str = "htk"
    log_floor: float = DEFAULT_LOG_FLOOR


@dataclass(frozen=True)
class RunConfig:
    sample_rate: int = 44100
    stft: StftConfig = field(default_factory=StftConfig)
    mel: MelConfig = field(default_factory=MelConfig)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    gla: GlaConfig = field(default_factory=GlaConfig)
    loss: LossConfig = field(default_factory=LossConfig)

    def filterbank(self) -> MelFilterbank:
        return make_mel_filterbank(
            n_mels=self.mel.n_mels,
            fft_size=self.stft.fft_size,
            sample_rate=self.sample_rate,
            f_min=self.mel.f_min,
            f_max=self.mel.f_max,
            scale=self.mel.scale,
        )


_SECTION_KEYS = {
    "stft": {"frame_size", "hop_size", "window", "fft_size", "center"},
    "mel": {"n_mels", "f_min", "f_max", "scale", "log_floor"},
    "integration": {
        "lambda_impulsive",
        "lambda_sinusoidal",
        "rng_seed",
        "silence_rel_db",
        "rule",
    },
    "gla": {"iterations", "momentum", "rng_seed"},
    "loss": {"weights", "cepstral_count", "lambda_threshold"},
}


def _check_keys(section: str, given: dict, allowed: set) -> dict:
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    return given


def parse_run_config(raw: dict) -> RunConfig:
    top_allowed = {"sample_rate"} | set(_SECTION_KEYS)
    _check_keys("(top level)", raw, top_allowed)
    kwargs = {}
    if "sample_rate" in raw:
        sr = raw["sample_rate"]
        if not isinstance(sr, int) or sr <= 0:
            raise ConfigError(f"sample_rate must be a positive integer, got {sr!r}")
        kwargs["sample_rate"] = sr
    try:
        if "stft" in raw:
            kwargs["stft"] = StftConfig(**_check_keys("stft", raw["stft"], _SECTION_KEYS["stft"]))
        if "mel" in raw:
            kwargs["mel"] = MelConfig(**_check_keys("mel", raw["mel"], _SECTION_KEYS["mel"]))
        if "integration" in raw:
            kwargs["integration"] = IntegrationConfig(
                **_check_keys("integration", raw["integration"], _SECTION_KEYS["integration"])
            )
        if "gla" in raw:
            kwargs["gla"] = GlaConfig(**_check_keys("gla", raw["gla"], _SECTION_KEYS["gla"]))
        if "loss" in raw:
            loss_raw = dict(_check_keys("loss", raw["loss"], _SECTION_KEYS["loss"]))
            if "weights" in loss_raw:
                loss_raw["weights"] = tuple(loss_raw["weights"])
            kwargs["loss"] = LossConfig(**loss_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(**kwargs)


def load_run_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_run_config(raw)


def write_run_config(path, config: RunConfig) -> None:
    doc = {
        "sample_rate": config.sample_rate,
        "stft": {
            "frame_size": config.stft.frame_size,
            "hop_size": config.stft.hop_size,
            "window": config.stft.window,
            "fft_size": config.stft.fft_size,
            "center": config.stft.center,
        },
        "mel": {
            "n_mels": config.mel.n_mels,
            "f_min": config.mel.f_min,
            "f_max": config.mel.f_max,
            "scale": config.mel.scale,
            "log_floor": config.mel.log_floor,
        },
        "integration": {
            "lambda_impulsive": config.integration.lambda_impulsive,
            "lambda_sinusoidal": config.integration.lambda_sinusoidal,
            "rng_seed": config.integration.rng_seed,
            "silence_rel_db": config.integration.silence_rel_db,
            "rule": config.integration.rule,
        },
        "gla": {
            "iterations": config.gla.iterations,
            "momentum": config.gla.momentum,
            "rng_seed": config.gla.rng_seed,
        },
        "loss": {
            "weights": list(config.loss.weights),
            "cepstral_count": config.loss.cepstral_count,
            "lambda_threshold": config.loss.lambda_threshold,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
