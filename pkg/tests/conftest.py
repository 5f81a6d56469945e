"""Shared test helpers: independent oracles kept deliberately dumb."""

import numpy as np
import pytest


def sliding_variance(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing-window sample variance; NaN until the window fills.

    Cumulative-sum implementation, independent of any filtering code.
    """
    x = np.asarray(x, dtype=float)
    out = np.full(len(x), np.nan)
    c1 = np.cumsum(np.insert(x, 0, 0.0))
    c2 = np.cumsum(np.insert(x * x, 0, 0.0))
    mean = (c1[window:] - c1[:-window]) / window
    msq = (c2[window:] - c2[:-window]) / window
    out[window - 1:] = msq - mean * mean
    return out


def steady_amplitude(y: np.ndarray, fs: float, freq: float, tail_s: float = 2.0) -> float:
    """Amplitude of a settled sinusoidal response from the tail RMS."""
    tail = y[-int(tail_s * fs):]
    return float(np.sqrt(2.0) * tail.std())


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=20240117))
