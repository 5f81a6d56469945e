"""Five-dimensional feature stream computed from the filtered motion norms.

Features (canonical order):

1. ``var_a_bpf``   - variance of the band-passed acceleration norm
2. ``var_a_spf``   - variance of the band-stop (complement) acceleration norm
3. ``var_w_bpf``   - variance of the band-passed angular-rate norm
4. ``var_w_lpf``   - variance of the low-passed angular-rate norm
5. ``bpf_spf_ratio`` - smoothed ratio of feature 1 over feature 2

Masks select non-empty subsets of the five for the selection sweep; the
canonical mask index is the bit pattern with feature 1 as the least
significant bit, so indices run 1..31.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import dsp, imu

FEATURE_NAMES = ("var_a_bpf", "var_a_spf", "var_w_bpf", "var_w_lpf", "bpf_spf_ratio")
N_FEATURES = len(FEATURE_NAMES)
N_MASKS = 2 ** N_FEATURES - 1

# Guard against division by a near-zero band-stop variance (engine-off
# streams drive it toward 0); keeps the ratio feature finite.
DEFAULT_EPS_RATIO = 1e-6

LABEL_IN_USE = 1
LABEL_NOT_IN_USE = -1


@dataclass(frozen=True)
class FeatureVector:
    """One feature sample. ``valid`` is False during filter warm-up."""

    t: float
    values: tuple[float, float, float, float, float]
    valid: bool = True


@dataclass(frozen=True)
class LabeledWindow:
    """A feature sample with its ground-truth usage label."""

    vector: FeatureVector
    label: int

    def __post_init__(self) -> None:
        if self.label not in (LABEL_IN_USE, LABEL_NOT_IN_USE):
            raise ValueError(f"label must be +1 or -1, got {self.label!r}")


@dataclass(frozen=True)
class FeatureMask:
    """Subset of the five features, canonical bit order (feature 1 = LSB)."""

    flags: tuple[bool, bool, bool, bool, bool]

    def __post_init__(self) -> None:
        if len(self.flags) != N_FEATURES or not any(self.flags):
            raise ValueError("mask needs exactly 5 flags with at least one set")

    @classmethod
    def from_index(cls, index: int) -> "FeatureMask":
        if not 1 <= index <= N_MASKS:
            raise ValueError(f"mask index must be in [1, {N_MASKS}], got {index}")
        return cls(tuple(bool(index >> k & 1) for k in range(N_FEATURES)))

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "FeatureMask":
        wanted = set(names)
        unknown = wanted - set(FEATURE_NAMES)
        if unknown:
            raise ValueError(f"unknown feature name(s): {sorted(unknown)}")
        return cls(tuple(name in wanted for name in FEATURE_NAMES))

    @property
    def index(self) -> int:
        return sum(1 << k for k, on in enumerate(self.flags) if on)

    @property
    def popcount(self) -> int:
        return sum(self.flags)

    def feature_names(self) -> tuple[str, ...]:
        return tuple(name for name, on in zip(FEATURE_NAMES, self.flags) if on)

    def __str__(self) -> str:
        return "+".join(self.feature_names())


FULL_MASK = FeatureMask.from_index(N_MASKS)

GYRO_FEATURES = ("var_w_bpf", "var_w_lpf")
ACCEL_FEATURES = ("var_a_bpf", "var_a_spf", "bpf_spf_ratio")


def enumerate_masks() -> list[FeatureMask]:
    """All 31 non-empty masks in canonical (binary counting) order."""
    return [FeatureMask.from_index(i) for i in range(1, N_MASKS + 1)]


def apply_mask(values: np.ndarray, mask: FeatureMask) -> np.ndarray:
    """Select the masked feature columns (last axis) in canonical order."""
    values = np.asarray(values)
    if values.shape[-1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} features on the last axis, got {values.shape}")
    return values[..., np.array(mask.flags, dtype=bool)]


@dataclass
class FeatureTable:
    """Columnar feature stream: timestamps, feature matrix, validity, labels.

    ``label`` uses +1 (in use) / -1 (not in use) / 0 (unlabeled).
    """

    t: np.ndarray
    x: np.ndarray
    valid: np.ndarray
    label: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)
        n = len(self.t)
        if self.x.shape != (n, N_FEATURES) or self.valid.shape != (n,):
            raise ValueError("inconsistent feature table shapes")
        if self.label is not None:
            self.label = np.asarray(self.label, dtype=int)
            if self.label.shape != (n,):
                raise ValueError("label column length mismatch")

    def __len__(self) -> int:
        return len(self.t)

    def scored_mask(self) -> np.ndarray:
        """Samples that are warmed up and carry a binary label."""
        if self.label is None:
            return np.zeros(len(self.t), dtype=bool)
        return self.valid & (self.label != 0)


class RatioFeature:
    """Smoothed ratio of two variance streams with a divide-by-zero guard."""

    def __init__(self, fs: float, eps_ratio: float = DEFAULT_EPS_RATIO,
                 smooth_hz: float = dsp.VAR_LP_HZ):
        if eps_ratio <= 0.0:
            raise ValueError("eps_ratio must be positive")
        self.eps_ratio = eps_ratio
        self.warmup_samples = int(np.ceil(dsp.WARMUP_CYCLES * fs / smooth_hz))
        self._lp = dsp.SosCascade(dsp.design_filter(
            dsp.FilterSpec("lowpass", (smooth_hz,), dsp.SMOOTH_ORDER, fs)))
        self._count = 0

    def reset(self) -> None:
        self._lp.reset()
        self._count = 0

    def step(self, v_num: float, v_den: float) -> tuple[float, bool]:
        y = self._lp.step(v_num / max(v_den, self.eps_ratio))
        valid = self._count >= self.warmup_samples
        self._count += 1
        return y, valid

    def process(self, v_num: np.ndarray, v_den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ratio = np.asarray(v_num, dtype=float) / np.maximum(v_den, self.eps_ratio)
        y = self._lp.process(ratio)
        start = self._count
        self._count += len(y)
        return y, np.arange(start, start + len(y)) >= self.warmup_samples


class FeatureExtractor:
    """Turns the four filtered signals into the five-feature stream.

    A sample is valid once every constituent stage has passed its own
    warm-up; the slowest stage (the variance estimator) dominates.
    """

    def __init__(self, fs: float, eps_ratio: float = DEFAULT_EPS_RATIO,
                 var_hp_hz: float = dsp.VAR_HP_HZ, var_lp_hz: float = dsp.VAR_LP_HZ):
        self.fs = fs
        self._var = {name: dsp.VarianceChain(fs, var_hp_hz, var_lp_hz)
                     for name in ("a_bpf", "a_spf", "w_lpf", "w_bpf")}
        self._ratio = RatioFeature(fs, eps_ratio, smooth_hz=var_lp_hz)

    @property
    def warmup_samples(self) -> int:
        return max(max(v.warmup_samples for v in self._var.values()),
                   self._ratio.warmup_samples)

    def reset(self) -> None:
        for v in self._var.values():
            v.reset()
        self._ratio.reset()

    def process(self, a_bpf: np.ndarray, a_spf: np.ndarray, w_lpf: np.ndarray,
                w_bpf: np.ndarray, input_valid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        f1, v1 = self._var["a_bpf"].process(a_bpf)
        f2, v2 = self._var["a_spf"].process(a_spf)
        f3, v3 = self._var["w_bpf"].process(w_bpf)
        f4, v4 = self._var["w_lpf"].process(w_lpf)
        f5, v5 = self._ratio.process(f1, f2)
        x = np.column_stack([f1, f2, f3, f4, f5])
        valid = np.asarray(input_valid, dtype=bool) & v1 & v2 & v3 & v4 & v5
        return x, valid

    def step(self, a_bpf: float, a_spf: float, w_lpf: float, w_bpf: float,
             input_valid: bool) -> tuple[tuple[float, float, float, float, float], bool]:
        f1, v1 = self._var["a_bpf"].step(a_bpf)
        f2, v2 = self._var["a_spf"].step(a_spf)
        f3, v3 = self._var["w_bpf"].step(w_bpf)
        f4, v4 = self._var["w_lpf"].step(w_lpf)
        f5, v5 = self._ratio.step(f1, f2)
        return (f1, f2, f3, f4, f5), bool(input_valid) and v1 and v2 and v3 and v4 and v5


class FeaturePipeline:
    """Raw IMU block in, feature table out: norms, filter chains, variances.

    Owns all filter state for one stream. Gaps larger than 2.5 sample
    periods reset every stage and restart the warm-up; the affected
    samples come out flagged invalid. Single stream, single context.
    """

    def __init__(self, fs: float = imu.DEFAULT_FS_HZ, eps_ratio: float = DEFAULT_EPS_RATIO,
                 bpf_low_hz: float = dsp.BPF_LOW_HZ, bpf_high_hz: float = dsp.BPF_HIGH_HZ,
                 gyro_lp_hz: float = dsp.GYRO_LP_HZ, debias_hz: float = dsp.DEBIAS_HZ,
                 var_hp_hz: float = dsp.VAR_HP_HZ, var_lp_hz: float = dsp.VAR_LP_HZ):
        imu.SampleRate(fs).require_nyquist(bpf_low_hz, bpf_high_hz, gyro_lp_hz,
                                           debias_hz, var_hp_hz, var_lp_hz)
        self.fs = fs
        self.bank = dsp.FilterBank(fs, bpf_low_hz, bpf_high_hz, gyro_lp_hz, debias_hz)
        self.extractor = FeatureExtractor(fs, eps_ratio, var_hp_hz, var_lp_hz)
        self._last_t: Optional[float] = None

    @property
    def warmup_seconds(self) -> float:
        return self.extractor.warmup_samples / self.fs

    def reset(self) -> None:
        self.bank.reset()
        self.extractor.reset()
        self._last_t = None

    def _process_contiguous(self, t: np.ndarray, a_norm: np.ndarray,
                            w_norm: np.ndarray) -> FeatureTable:
        fb = self.bank.process(t, a_norm, w_norm)
        x, valid = self.extractor.process(fb.a_bpf, fb.a_spf, fb.w_lpf, fb.w_bpf, fb.valid)
        return FeatureTable(t=t, x=x, valid=valid)

    def process_block(self, t: np.ndarray, acc: np.ndarray, gyr: np.ndarray) -> FeatureTable:
        """Process a block of raw samples, handling stream breaks."""
        t = np.asarray(t, dtype=float)
        a_norm, w_norm = imu.compute_norms_block(acc, gyr)
        if t.shape != a_norm.shape:
            raise ValueError("timestamp / sample count mismatch")
        if len(t) == 0:
            return FeatureTable(t=t, x=np.empty((0, N_FEATURES)), valid=np.empty(0, dtype=bool))
        if self._last_t is not None and t[0] < self._last_t:
            raise imu.InvalidSampleError("block starts before the previous one ended")
        break_set = set(imu.find_stream_breaks(t, self.fs).tolist())
        if self._last_t is not None and t[0] - self._last_t > imu.STREAM_BREAK_PERIODS / self.fs:
            break_set.add(0)

        pieces = []
        edges = [0] + sorted(break_set - {0}) + [len(t)]
        for lo, hi in zip(edges[:-1], edges[1:]):
            if lo in break_set:
                self.reset()
            pieces.append(self._process_contiguous(t[lo:hi], a_norm[lo:hi], w_norm[lo:hi]))
        self._last_t = float(t[-1])
        return FeatureTable(
            t=np.concatenate([p.t for p in pieces]),
            x=np.vstack([p.x for p in pieces]),
            valid=np.concatenate([p.valid for p in pieces]),
        )

    def step(self, sample: imu.ImuSample) -> FeatureVector:
        """Streaming path: one raw sample in, one feature sample out."""
        norms = imu.compute_norms(sample)
        if self._last_t is not None:
            gap = norms.t - self._last_t
            if gap < 0:
                raise imu.InvalidSampleError(f"timestamp moved backwards at t={norms.t}")
            if gap > imu.STREAM_BREAK_PERIODS / self.fs:
                self.reset()
        self._last_t = norms.t

        filtered = self.bank.step(norms.t, norms.a_norm, norms.w_norm)
        values, valid = self.extractor.step(filtered.a_bpf, filtered.a_spf,
                                            filtered.w_lpf, filtered.w_bpf, filtered.valid)
        return FeatureVector(t=norms.t, values=values, valid=valid)
