"""Raw IMU sample types and reduction to attitude-independent motion norms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_FS_HZ = 120.0

# A timestamp jump beyond this many nominal sample periods is a stream break:
# IIR state carried across a data gap is meaningless and must be reset.
STREAM_BREAK_PERIODS = 2.5

ACCEL_CHANNELS = ("ax", "ay", "az")
GYRO_CHANNELS = ("gx", "gy", "gz")


class InvalidSampleError(ValueError):
    """A sample carries a non-finite value or a bad timestamp."""


@dataclass(frozen=True)
class ImuSample:
    """One timestamped 6-axis reading.

    Acceleration channels are specific force in m/s^2 (gravity included);
    gyro channels are angular rate in rad/s. Unit conversion is the
    ingestion layer's job, everything downstream assumes SI.
    """

    t: float
    ax: float
    ay: float
    az: float
    gx: float
    gy: float
    gz: float

    def validate(self) -> None:
        if not math.isfinite(self.t) or self.t < 0.0:
            raise InvalidSampleError(f"timestamp must be finite and >= 0, got {self.t!r}")
        for name in ACCEL_CHANNELS + GYRO_CHANNELS:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidSampleError(f"channel {name} is non-finite: {value!r}")


@dataclass(frozen=True)
class NormSample:
    """Euclidean norms of one sample: motion intensity, orientation independent."""

    t: float
    a_norm: float
    w_norm: float


@dataclass(frozen=True)
class SampleRate:
    """Uniform sampling rate of the incoming stream (Hz)."""

    fs: float = DEFAULT_FS_HZ

    def __post_init__(self) -> None:
        if not (math.isfinite(self.fs) and self.fs > 0.0):
            raise ValueError(f"sample rate must be positive and finite, got {self.fs!r}")

    def require_nyquist(self, *cutoffs_hz: float) -> None:
        """Reject any filter cutoff at or above fs/2."""
        for fc in cutoffs_hz:
            if fc >= 0.5 * self.fs:
                raise ValueError(f"cutoff {fc} Hz violates Nyquist for fs={self.fs} Hz")


def compute_norms(sample: ImuSample) -> NormSample:
    """Collapse the three axes of each sensor to their Euclidean norm."""
    sample.validate()
    return NormSample(
        t=sample.t,
        a_norm=math.sqrt(sample.ax * sample.ax + sample.ay * sample.ay + sample.az * sample.az),
        w_norm=math.sqrt(sample.gx * sample.gx + sample.gy * sample.gy + sample.gz * sample.gz),
    )


def compute_norms_block(acc: np.ndarray, gyr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized norm reduction for matching (n, 3) acceleration/gyro blocks."""
    acc = np.asarray(acc, dtype=float)
    gyr = np.asarray(gyr, dtype=float)
    if acc.ndim != 2 or acc.shape[1] != 3 or gyr.shape != acc.shape:
        raise ValueError(f"expected matching (n, 3) arrays, got {acc.shape} and {gyr.shape}")
    for names, arr in ((ACCEL_CHANNELS, acc), (GYRO_CHANNELS, gyr)):
        bad = ~np.isfinite(arr)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise InvalidSampleError(f"channel {names[col]} is non-finite at row {row}")
    return np.sqrt((acc * acc).sum(axis=1)), np.sqrt((gyr * gyr).sum(axis=1))


def find_stream_breaks(t: np.ndarray, fs: float) -> np.ndarray:
    """Indices i where the gap t[i] - t[i-1] exceeds the stream-break threshold.

    Timestamps must be non-decreasing; filtering downstream assumes uniform
    sampling at fs between breaks.
    """
    t = np.asarray(t, dtype=float)
    if t.size < 2:
        return np.empty(0, dtype=int)
    dt = np.diff(t)
    if (dt < 0).any():
        i = int(np.flatnonzero(dt < 0)[0]) + 1
        raise InvalidSampleError(f"timestamps decrease at sample {i}")
    return np.flatnonzero(dt > STREAM_BREAK_PERIODS / fs) + 1
