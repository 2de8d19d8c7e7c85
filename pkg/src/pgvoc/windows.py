"""Analysis windows and their companions.

Windows are defined on the sample grid i in [-N/2, N/2) and stored as arrays
of length N with the frame center at index N//2.  Besides the window itself,
spectral-derivative computations need two companions: the derivative window
w'(i) (per-sample units) and the time-ramped window i*w(i).
"""

from __future__ import annotations

import numpy as np

WINDOW_KINDS = ("hann", "rect")


def _centered_index(n: int) -> np.ndarray:
    # i = -N/2 .. N/2-1, center sample at array index N//2
    return np.arange(n) - n // 2


def make_window(kind: str, n: int) -> np.ndarray:
    """Periodic analysis window of length ``n`` (center at index n//2)."""
    if n <= 0 or n % 2 != 0:
        raise ValueError(f"window length must be positive and even, got {n}")
    i = _centered_index(n)
    if kind == "hann":
        return 0.5 * (1.0 + np.cos(2.0 * np.pi * i / n))
    if kind == "rect":
        return np.ones(n)
    raise ValueError(f"unsupported window kind {kind!r} (know {WINDOW_KINDS})")


def window_derivative(kind: str, n: int) -> np.ndarray:
    """dw/di for the window returned by :func:`make_window`."""
    i = _centered_index(n)
    if kind == "hann":
        return -(np.pi / n) * np.sin(2.0 * np.pi * i / n)
    if kind == "rect":
        return np.zeros(n)
    raise ValueError(f"unsupported window kind {kind!r} (know {WINDOW_KINDS})")


def window_ramp(kind: str, n: int) -> np.ndarray:
    """i * w(i), the time-weighted companion window."""
    return _centered_index(n) * make_window(kind, n)


def overlap_square_sum(window: np.ndarray, hop: int, length: int) -> np.ndarray:
    """Sum over hops of w^2[i - k*hop] evaluated on [0, length).

    Direct summation; used both by the least-squares inverse transform and by
    the constant-overlap-add checks.
    """
    n = len(window)
    acc = np.zeros(length)
    wsq = window * window
    first = -((n - 1) // hop) * hop
    for start in range(first, length, hop):
        lo = max(start, 0)
        hi = min(start + n, length)
        if lo < hi:
            acc[lo:hi] += wsq[lo - start : hi - start]
    return acc
