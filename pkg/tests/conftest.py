import numpy as np
import pytest

from pgvoc.audio import AudioBuffer

SR = 44100


def sine(freq, seconds=1.0, sr=SR, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioBuffer(amp * np.sin(2.0 * np.pi * freq * t + phase), sr)


def impulse(position, seconds=1.0, sr=SR):
    x = np.zeros(int(round(seconds * sr)))
    x[position] = 1.0
    return AudioBuffer(x, sr)


def fft_peak_hz(samples, sr, pad_to=2**20):
    """Independent frequency oracle: argmax of a zero-padded rfft.

    Resolution sr/pad_to (~0.04 Hz at 44.1 kHz); deliberately avoids the
    package's own tracking code.
    """
    spec = np.abs(np.fft.rfft(samples, n=pad_to))
    return np.argmax(spec) * sr / pad_to


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240901)
