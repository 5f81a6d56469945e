"""Deterministic synthetic IMU scenarios for desk-scale validation.

Each scenario composes the accelerometer stream from a gravity baseline
plus band-limited components: vehicle dynamics in 1-3 Hz while moving
(attenuated on a cradle, which mechanically smooths it), hand-usage
excitation in 4-12 Hz, and a wideband sensor noise floor. The gyro
carries broadband content up to 20 Hz while the phone is handled, a
small low-frequency component while the vehicle moves, and is close to
zero otherwise.

Band-limited components are sums of fixed-count randomized-phase
sinusoids, so the band confinement is exact and independent of any
filtering code under test. All randomness comes from the Philox
(4x64) counter-based generator keyed by the scenario seed, which is
specified precisely enough to reproduce streams across platforms and
languages. Accelerometer components push along one random direction per
scenario (kept at least 20 degrees away from the horizontal plane so the
norm, which to first order projects onto gravity, picks them up); gyro
components are drawn independently per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional

import numpy as np

from .imu import DEFAULT_FS_HZ, ImuSample

VEHICLE_STATES = ("engine-off", "engine-on", "moving")
PHONE_STATES = ("using", "passenger-seat", "phone-holder")

GRAVITY_M_S2 = 9.81
SINUSOIDS_PER_BAND = 12

# Component amplitudes are RMS values of the scalar band signals; free
# configuration, chosen so the extracted features separate the classes.
DEFAULT_AMPLITUDES: dict[str, float] = {
    "accel_floor": 0.03,            # m/s^2 per axis, always on
    "gyro_floor": 0.01,             # rad/s per axis, always on
    "vehicle_band": 0.9,            # m/s^2, 1-3 Hz, while moving
    "holder_attenuation": 0.35,     # vehicle_band multiplier on the cradle
    "usage_band": 0.4,              # m/s^2, 4-12 Hz, while using
    "gyro_usage": 0.7,              # rad/s per axis, 0.5-20 Hz, while using
    "gyro_vehicle": 0.08,           # rad/s per axis, 0.2-2 Hz, while moving
}

VEHICLE_BAND_HZ = (1.0, 3.0)
USAGE_BAND_HZ = (4.0, 12.0)
GYRO_USAGE_BAND_HZ = (0.5, 20.0)
GYRO_VEHICLE_BAND_HZ = (0.2, 2.0)

# Minimum |cos| between an accelerometer push direction and gravity.
MIN_GRAVITY_ALIGNMENT = 0.35

LABEL_IN_USE = 1
LABEL_NOT_IN_USE = -1


@dataclass(frozen=True)
class ScenarioSpec:
    """One homogeneous segment: vehicle state, phone state, duration."""

    vehicle: str
    phone: str
    duration_s: float
    fs: float = DEFAULT_FS_HZ
    seed: int = 0
    amplitudes: Optional[Mapping[str, float]] = None

    def validate(self) -> None:
        if self.vehicle not in VEHICLE_STATES:
            raise ValueError(f"unknown vehicle state {self.vehicle!r}")
        if self.phone not in PHONE_STATES:
            raise ValueError(f"unknown phone state {self.phone!r}")
        if not self.duration_s > 0:
            raise ValueError(f"duration must be positive, got {self.duration_s}")
        if not self.fs > 0:
            raise ValueError(f"fs must be positive, got {self.fs}")
        if self.amplitudes:
            unknown = set(self.amplitudes) - set(DEFAULT_AMPLITUDES)
            if unknown:
                raise ValueError(f"unknown amplitude override(s): {sorted(unknown)}")

    @property
    def in_use(self) -> bool:
        return self.phone == "using"

    @property
    def label(self) -> int:
        return LABEL_IN_USE if self.in_use else LABEL_NOT_IN_USE

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.fs))


@dataclass
class ImuStream:
    """Generated block of labeled samples."""

    t: np.ndarray
    acc: np.ndarray              # (n, 3) m/s^2
    gyr: np.ndarray              # (n, 3) rad/s
    label: np.ndarray            # (n,) +1 / -1
    fs: float
    transitions: list = field(default_factory=list)   # (t, old_label, new_label)

    def __len__(self) -> int:
        return len(self.t)

    def samples(self) -> Iterator[ImuSample]:
        for i in range(len(self.t)):
            yield ImuSample(self.t[i], *self.acc[i], *self.gyr[i])


@dataclass
class ScenarioSchedule:
    """Contiguous, non-overlapping segments with explicit start times."""

    entries: list[tuple[ScenarioSpec, float]]

    def validate(self) -> None:
        if not self.entries:
            raise ValueError("schedule is empty")
        for spec, _ in self.entries:
            spec.validate()
        fs = self.entries[0][0].fs
        for spec, _ in self.entries:
            if spec.fs != fs:
                raise ValueError("all segments must share one sample rate")
        tol = 0.25 / fs
        for (a, start_a), (b, start_b) in zip(self.entries[:-1], self.entries[1:]):
            expected = start_a + a.n_samples / fs
            if start_b < expected - tol:
                raise ValueError(f"segments overlap at t={start_b:g}")
            if start_b > expected + tol:
                raise ValueError(f"gap between segments at t={start_b:g}")

    @classmethod
    def from_specs(cls, specs: list[ScenarioSpec]) -> "ScenarioSchedule":
        """Build a contiguous schedule by stacking segments back to back."""
        entries = []
        start = 0.0
        for spec in specs:
            spec.validate()
            entries.append((spec, start))
            start += spec.n_samples / spec.fs
        return cls(entries)


def _unit_vector(rng: np.random.Generator) -> np.ndarray:
    """Uniform direction on the sphere from two uniforms (no normals)."""
    z = rng.uniform(-1.0, 1.0)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    r = math.sqrt(max(0.0, 1.0 - z * z))
    return np.array([r * math.cos(phi), r * math.sin(phi), z])


def _aligned_vector(rng: np.random.Generator, g_hat: np.ndarray) -> np.ndarray:
    """Random direction with a guaranteed component along gravity."""
    while True:
        u = _unit_vector(rng)
        if abs(float(u @ g_hat)) >= MIN_GRAVITY_ALIGNMENT:
            return u


def _band_signal(rng: np.random.Generator, t: np.ndarray, band_hz: tuple[float, float],
                 rms: float, fs: float) -> np.ndarray:
    """Sum of randomized-phase sinusoids confined to the band, given RMS."""
    lo, hi = band_hz
    hi = min(hi, 0.49 * fs)  # keep inside Nyquist for small fs
    freqs = rng.uniform(lo, hi, size=SINUSOIDS_PER_BAND)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=SINUSOIDS_PER_BAND)
    amp = rms * math.sqrt(2.0 / SINUSOIDS_PER_BAND)
    return amp * np.sin(2.0 * math.pi * np.outer(t, freqs) + phases).sum(axis=1)


def _floor_noise(rng: np.random.Generator, n: int, rms: float) -> np.ndarray:
    """White noise floor, uniform marginals with the requested RMS."""
    half_width = rms * math.sqrt(3.0)
    return rng.uniform(-half_width, half_width, size=(n, 3))


def generate(spec: ScenarioSpec, t0: float = 0.0) -> ImuStream:
    """Generate one labeled scenario segment starting at ``t0``."""
    spec.validate()
    amps = dict(DEFAULT_AMPLITUDES)
    if spec.amplitudes:
        amps.update(spec.amplitudes)
    n = spec.n_samples
    t = t0 + np.arange(n) / spec.fs
    t_local = np.arange(n) / spec.fs
    rng = np.random.Generator(np.random.Philox(key=spec.seed))

    g_hat = _unit_vector(rng)
    acc = GRAVITY_M_S2 * g_hat[None, :].repeat(n, axis=0)

    moving = spec.vehicle == "moving"
    if moving:
        rms = amps["vehicle_band"]
        if spec.phone == "phone-holder":
            rms *= amps["holder_attenuation"]
        direction = _aligned_vector(rng, g_hat)
        acc += np.outer(_band_signal(rng, t_local, VEHICLE_BAND_HZ, rms, spec.fs), direction)
    if spec.in_use:
        direction = _aligned_vector(rng, g_hat)
        acc += np.outer(
            _band_signal(rng, t_local, USAGE_BAND_HZ, amps["usage_band"], spec.fs), direction)
    acc += _floor_noise(rng, n, amps["accel_floor"])

    gyr = np.zeros((n, 3))
    if spec.in_use:
        for axis in range(3):
            gyr[:, axis] += _band_signal(rng, t_local, GYRO_USAGE_BAND_HZ,
                                         amps["gyro_usage"], spec.fs)
    if moving:
        for axis in range(3):
            gyr[:, axis] += _band_signal(rng, t_local, GYRO_VEHICLE_BAND_HZ,
                                         amps["gyro_vehicle"], spec.fs)
    gyr += _floor_noise(rng, n, amps["gyro_floor"])

    label = np.full(n, spec.label, dtype=int)
    return ImuStream(t=t, acc=acc, gyr=gyr, label=label, fs=spec.fs)


def generate_trip(schedule: ScenarioSchedule) -> ImuStream:
    """Concatenate scheduled segments into one continuous labeled stream."""
    schedule.validate()
    parts = [generate(spec, t0=start) for spec, start in schedule.entries]
    stream = ImuStream(
        t=np.concatenate([p.t for p in parts]),
        acc=np.vstack([p.acc for p in parts]),
        gyr=np.vstack([p.gyr for p in parts]),
        label=np.concatenate([p.label for p in parts]),
        fs=schedule.entries[0][0].fs,
    )
    change = np.flatnonzero(np.diff(stream.label)) + 1
    stream.transitions = [
        (float(stream.t[i]), int(stream.label[i - 1]), int(stream.label[i])) for i in change]
    return stream


def label_intervals(stream: ImuStream) -> list[tuple[float, float, int]]:
    """(start_t, end_t, label) runs covering the stream, end exclusive."""
    if len(stream) == 0:
        return []
    edges = np.flatnonzero(np.diff(stream.label)) + 1
    bounds = np.concatenate([[0], edges, [len(stream)]])
    out = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        end = stream.t[hi] if hi < len(stream) else stream.t[-1] + 1.0 / stream.fs
        out.append((float(stream.t[lo]), float(end), int(stream.label[lo])))
    return out


# One pass through this pattern covers every vehicle/phone combination and
# alternates the usage label at every boundary.
MIXED_TRIP_PATTERN: tuple[tuple[str, str], ...] = (
    ("engine-off", "passenger-seat"),
    ("engine-off", "using"),
    ("engine-off", "phone-holder"),
    ("engine-on", "using"),
    ("engine-on", "passenger-seat"),
    ("moving", "using"),
    ("moving", "phone-holder"),
    ("moving", "using"),
    ("moving", "passenger-seat"),
    ("engine-on", "using"),
    ("engine-on", "phone-holder"),
    ("moving", "using"),
)


def mixed_trip_schedule(segment_s: float = 60.0, repeats: int = 2, seed: int = 0,
                        fs: float = DEFAULT_FS_HZ,
                        amplitudes: Optional[Mapping[str, float]] = None) -> ScenarioSchedule:
    """Trip cycling through every scenario; per-segment seeds derive from ``seed``."""
    specs = []
    for rep in range(repeats):
        for k, (vehicle, phone) in enumerate(MIXED_TRIP_PATTERN):
            specs.append(ScenarioSpec(
                vehicle=vehicle, phone=phone, duration_s=segment_s, fs=fs,
                seed=seed * 100003 + rep * len(MIXED_TRIP_PATTERN) + k,
                amplitudes=amplitudes))
    return ScenarioSchedule.from_specs(specs)
