"""IIR filter design and the streaming preprocessing chains.

All filters are Butterworth prototypes discretized with the bilinear
transform (cutoffs prewarped), realized as cascades of second-order
sections in transposed direct-form II. Four chains turn the two motion
norms into the signals the features are computed from:

* band-pass 4-15 Hz on the acceleration norm (``a_bpf``),
* the band-stop complement - parallel 4 Hz low-pass and 15 Hz high-pass
  summed, then debiased at 0.05 Hz (``a_spf``),
* 20 Hz low-pass plus 0.05 Hz debias on the angular-rate norm (``w_lpf``),
* the same 4-15 Hz band-pass on the angular-rate norm (``w_bpf``).

A further chain estimates a running variance: high-pass at 0.01 Hz,
square, low-pass at 0.1 Hz.

Every chain flags its output invalid for the first ``3 / f_lowest``
seconds after a reset (warm-up), where ``f_lowest`` is the lowest cutoff
in the chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import sosfilt

# Default cutoffs (Hz) for the preprocessing chains.
BPF_LOW_HZ = 4.0
BPF_HIGH_HZ = 15.0
SPF_LP_HZ = 4.0
SPF_HP_HZ = 15.0
GYRO_LP_HZ = 20.0
DEBIAS_HZ = 0.05
VAR_HP_HZ = 0.01
VAR_LP_HZ = 0.1

# Filter orders. The band-pass order is per edge. The band-stop branches
# need order 3: with order 2 the two branches sit near quadrature around
# 8 Hz and their magnitudes add to ~0.36, blowing the <0.3 stopband
# budget for the summed signal.
MAIN_ORDER = 2
SPF_BRANCH_ORDER = 3
SMOOTH_ORDER = 1

MIN_ORDER = 1
MAX_ORDER = 8

# Outputs are flagged invalid until this many periods of the lowest
# cutoff have elapsed since the last reset.
WARMUP_CYCLES = 3.0

FILTER_KINDS = ("lowpass", "highpass", "bandpass")


class FilterDesignError(ValueError):
    """A filter specification cannot be realized."""


@dataclass(frozen=True)
class FilterSpec:
    """Design request: kind, cutoff(s) in Hz, order, sample rate.

    For a band-pass the order applies per edge (the realization cascades
    a high-pass at the low cutoff with a low-pass at the high cutoff).
    """

    kind: str
    cutoffs_hz: tuple[float, ...]
    order: int
    fs: float

    def validate(self) -> None:
        if self.kind not in FILTER_KINDS:
            raise FilterDesignError(f"unknown filter kind {self.kind!r}")
        if not (MIN_ORDER <= self.order <= MAX_ORDER):
            raise FilterDesignError(f"order must be in [{MIN_ORDER}, {MAX_ORDER}], got {self.order}")
        n_expected = 2 if self.kind == "bandpass" else 1
        if len(self.cutoffs_hz) != n_expected:
            raise FilterDesignError(
                f"{self.kind} takes {n_expected} cutoff(s), got {len(self.cutoffs_hz)}")
        for fc in self.cutoffs_hz:
            if not (0.0 < fc < 0.5 * self.fs):
                raise FilterDesignError(f"cutoff {fc} Hz outside (0, fs/2) for fs={self.fs} Hz")
        if self.kind == "bandpass" and not self.cutoffs_hz[0] < self.cutoffs_hz[1]:
            raise FilterDesignError(f"band-pass cutoffs must increase, got {self.cutoffs_hz}")


@dataclass(frozen=True)
class BiquadSection:
    """One second-order section, coefficients normalized to a0 = 1.

    First-order sections are represented with b2 = a2 = 0.
    """

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a1, self.a2])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def as_sos_row(self) -> list[float]:
        return [self.b0, self.b1, self.b2, 1.0, self.a1, self.a2]


def _pair_dampings(order: int) -> list[float]:
    """Damping ratios of the conjugate-pole pairs of a Butterworth prototype."""
    return [-math.cos(math.pi * (2 * k + order + 1) / (2 * order)) for k in range(order // 2)]


def _lowpass_sections(fc: float, order: int, fs: float) -> list[BiquadSection]:
    k = math.tan(math.pi * fc / fs)  # prewarped
    sections = []
    for zeta in _pair_dampings(order):
        d = 1.0 + 2.0 * zeta * k + k * k
        sections.append(BiquadSection(
            b0=k * k / d, b1=2.0 * k * k / d, b2=k * k / d,
            a1=(2.0 * k * k - 2.0) / d, a2=(1.0 - 2.0 * zeta * k + k * k) / d))
    if order % 2:
        d = k + 1.0
        sections.append(BiquadSection(b0=k / d, b1=k / d, b2=0.0, a1=(k - 1.0) / d, a2=0.0))
    return sections


def _highpass_sections(fc: float, order: int, fs: float) -> list[BiquadSection]:
    k = math.tan(math.pi * fc / fs)
    sections = []
    for zeta in _pair_dampings(order):
        d = 1.0 + 2.0 * zeta * k + k * k
        sections.append(BiquadSection(
            b0=1.0 / d, b1=-2.0 / d, b2=1.0 / d,
            a1=(2.0 * k * k - 2.0) / d, a2=(1.0 - 2.0 * zeta * k + k * k) / d))
    if order % 2:
        d = k + 1.0
        sections.append(BiquadSection(b0=1.0 / d, b1=-1.0 / d, b2=0.0, a1=(k - 1.0) / d, a2=0.0))
    return sections


def design_filter(spec: FilterSpec) -> list[BiquadSection]:
    """Design a Butterworth filter as a cascade of biquad sections."""
    spec.validate()
    if spec.kind == "lowpass":
        return _lowpass_sections(spec.cutoffs_hz[0], spec.order, spec.fs)
    if spec.kind == "highpass":
        return _highpass_sections(spec.cutoffs_hz[0], spec.order, spec.fs)
    low, high = spec.cutoffs_hz
    return _highpass_sections(low, spec.order, spec.fs) + _lowpass_sections(high, spec.order, spec.fs)


def frequency_response(sections: list[BiquadSection], freqs_hz, fs: float) -> np.ndarray:
    """Complex response of a cascade evaluated on the unit circle."""
    z1 = np.exp(-2j * np.pi * np.asarray(freqs_hz, dtype=float) / fs)
    z2 = z1 * z1
    h = np.ones_like(z1, dtype=complex)
    for s in sections:
        h = h * (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2)
    return h


def coefficient_listing(name: str, sections: list[BiquadSection]) -> str:
    """Human-readable per-section coefficient dump for cross-checking."""
    lines = [f"# {name}: {len(sections)} section(s), a0 = 1"]
    for i, s in enumerate(sections, start=1):
        lines.append(
            f"section {i}: b0={s.b0:.17g} b1={s.b1:.17g} b2={s.b2:.17g} "
            f"a1={s.a1:.17g} a2={s.a2:.17g}")
    return "\n".join(lines)


class SosCascade:
    """Stateful biquad cascade. Single stream, single context.

    ``step`` runs the transposed direct-form II recurrence in exactly the
    operation order scipy's ``sosfilt`` uses, so sample-by-sample and
    block processing produce bit-identical output.
    """

    def __init__(self, sections: list[BiquadSection]):
        if not sections:
            raise FilterDesignError("cascade needs at least one section")
        for s in sections:
            if not s.is_stable():
                raise FilterDesignError(f"unstable section {s}")
        self.sections = list(sections)
        self.sos = np.array([s.as_sos_row() for s in sections], dtype=float)
        self.reset()

    def reset(self) -> None:
        self._zi = np.zeros((len(self.sections), 2), dtype=float)

    def step(self, x: float) -> float:
        sos = self.sos
        zi = self._zi
        x_cur = float(x)
        for s in range(sos.shape[0]):
            x_new = sos[s, 0] * x_cur + zi[s, 0]
            zi[s, 0] = sos[s, 1] * x_cur - sos[s, 4] * x_new + zi[s, 1]
            zi[s, 1] = sos[s, 2] * x_cur - sos[s, 5] * x_new
            x_cur = x_new
        return float(x_cur)

    def process(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return x.copy()
        y, self._zi = sosfilt(self.sos, x, zi=self._zi)
        return y

    def response(self, freqs_hz, fs: float) -> np.ndarray:
        return frequency_response(self.sections, freqs_hz, fs)


class _Stage:
    """Warm-up bookkeeping shared by all chains."""

    def __init__(self, fs: float, lowest_cutoff_hz: float):
        self.fs = fs
        self.warmup_samples = math.ceil(WARMUP_CYCLES * fs / lowest_cutoff_hz)
        self._count = 0

    @property
    def warmup_seconds(self) -> float:
        return self.warmup_samples / self.fs

    def _reset_count(self) -> None:
        self._count = 0

    def _advance(self, n: int) -> np.ndarray:
        start = self._count
        self._count += n
        return np.arange(start, start + n) >= self.warmup_samples

    def _advance1(self) -> bool:
        valid = self._count >= self.warmup_samples
        self._count += 1
        return valid


class BandpassChain(_Stage):
    """4-15 Hz band-pass used for both the acceleration and gyro norms."""

    def __init__(self, fs: float, low_hz: float = BPF_LOW_HZ, high_hz: float = BPF_HIGH_HZ,
                 order: int = MAIN_ORDER):
        super().__init__(fs, low_hz)
        self.spec = FilterSpec("bandpass", (low_hz, high_hz), order, fs)
        self._cascade = SosCascade(design_filter(self.spec))

    def reset(self) -> None:
        self._cascade.reset()
        self._reset_count()

    def step(self, x: float) -> tuple[float, bool]:
        return self._cascade.step(x), self._advance1()

    def process(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = self._cascade.process(x)
        return y, self._advance(len(y))

    def response(self, freqs_hz) -> np.ndarray:
        return self._cascade.response(freqs_hz, self.fs)

    def sections(self) -> list[BiquadSection]:
        return list(self._cascade.sections)


class BandstopChain(_Stage):
    """Complement of the band-pass: parallel low/high branches, summed, debiased.

    The low-pass and high-pass branches run on the same input and their
    outputs are added before the debias high-pass removes the(gravity)
    mean, so the signal is comparable to the band-pass one.
    """

    def __init__(self, fs: float, lp_hz: float = SPF_LP_HZ, hp_hz: float = SPF_HP_HZ,
                 debias_hz: float = DEBIAS_HZ, order: int = SPF_BRANCH_ORDER):
        super().__init__(fs, min(lp_hz, hp_hz, debias_hz))
        self._lp = SosCascade(design_filter(FilterSpec("lowpass", (lp_hz,), order, fs)))
        self._hp = SosCascade(design_filter(FilterSpec("highpass", (hp_hz,), order, fs)))
        self._deb = SosCascade(design_filter(FilterSpec("highpass", (debias_hz,), SMOOTH_ORDER, fs)))

    def reset(self) -> None:
        for c in (self._lp, self._hp, self._deb):
            c.reset()
        self._reset_count()

    def step(self, x: float) -> tuple[float, bool]:
        y = self._deb.step(self._lp.step(x) + self._hp.step(x))
        return y, self._advance1()

    def process(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = self._deb.process(self._lp.process(x) + self._hp.process(x))
        return y, self._advance(len(y))

    def response(self, freqs_hz) -> np.ndarray:
        branch = self._lp.response(freqs_hz, self.fs) + self._hp.response(freqs_hz, self.fs)
        return self._deb.response(freqs_hz, self.fs) * branch

    def sections(self) -> list[BiquadSection]:
        return self._lp.sections + self._hp.sections + self._deb.sections


class SmoothedLowpassChain(_Stage):
    """Low-pass plus 0.05 Hz debias, used for the angular-rate norm."""

    def __init__(self, fs: float, lp_hz: float = GYRO_LP_HZ, debias_hz: float = DEBIAS_HZ,
                 order: int = MAIN_ORDER):
        super().__init__(fs, min(lp_hz, debias_hz))
        self._lp = SosCascade(design_filter(FilterSpec("lowpass", (lp_hz,), order, fs)))
        self._deb = SosCascade(design_filter(FilterSpec("highpass", (debias_hz,), SMOOTH_ORDER, fs)))

    def reset(self) -> None:
        self._lp.reset()
        self._deb.reset()
        self._reset_count()

    def step(self, x: float) -> tuple[float, bool]:
        return self._deb.step(self._lp.step(x)), self._advance1()

    def process(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = self._deb.process(self._lp.process(x))
        return y, self._advance(len(y))

    def response(self, freqs_hz) -> np.ndarray:
        return self._lp.response(freqs_hz, self.fs) * self._deb.response(freqs_hz, self.fs)

    def sections(self) -> list[BiquadSection]:
        return self._lp.sections + self._deb.sections


class VarianceChain(_Stage):
    """Streaming variance estimate: high-pass, square, low-pass.

    The high-pass removes the slowly varying mean, squaring gives the
    instantaneous squared deviation and the low-pass takes its expected
    value. Output is clamped at zero; the clamp count is kept as a
    diagnostic (a first-order smoother cannot actually undershoot on a
    non-negative input, so a nonzero count signals a numerical problem).
    """

    def __init__(self, fs: float, hp_hz: float = VAR_HP_HZ, lp_hz: float = VAR_LP_HZ):
        super().__init__(fs, min(hp_hz, lp_hz))
        self._hp = SosCascade(design_filter(FilterSpec("highpass", (hp_hz,), SMOOTH_ORDER, fs)))
        self._lp = SosCascade(design_filter(FilterSpec("lowpass", (lp_hz,), SMOOTH_ORDER, fs)))
        self.negative_clamps = 0

    def reset(self) -> None:
        self._hp.reset()
        self._lp.reset()
        self._reset_count()
        self.negative_clamps = 0

    def step(self, x: float) -> tuple[float, bool]:
        d = self._hp.step(x)
        v = self._lp.step(d * d)
        if v < 0.0:
            self.negative_clamps += 1
            v = 0.0
        return v, self._advance1()

    def process(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self._hp.process(x)
        v = self._lp.process(d * d)
        neg = v < 0.0
        if neg.any():
            self.negative_clamps += int(neg.sum())
            v = np.where(neg, 0.0, v)
        return v, self._advance(len(v))


    def sections(self) -> list[BiquadSection]:
        return self._hp.sections + self._lp.sections


@dataclass(frozen=True)
class FilteredSignals:
    """One sample of the four filtered norms."""

    t: float
    a_bpf: float
    a_spf: float
    w_lpf: float
    w_bpf: float
    valid: bool = True


@dataclass
class FilteredBlock:
    """Block of filtered norms; ``valid`` is the AND of all chain warm-ups."""

    t: np.ndarray
    a_bpf: np.ndarray
    a_spf: np.ndarray
    w_lpf: np.ndarray
    w_bpf: np.ndarray
    valid: np.ndarray


class FilterBank:
    """The four preprocessing chains run side by side on the two norms."""

    def __init__(self, fs: float, bpf_low_hz: float = BPF_LOW_HZ,
                 bpf_high_hz: float = BPF_HIGH_HZ, gyro_lp_hz: float = GYRO_LP_HZ,
                 debias_hz: float = DEBIAS_HZ):
        self.fs = fs
        self.a_bpf = BandpassChain(fs, bpf_low_hz, bpf_high_hz)
        self.a_spf = BandstopChain(fs, bpf_low_hz, bpf_high_hz, debias_hz)
        self.w_lpf = SmoothedLowpassChain(fs, gyro_lp_hz, debias_hz)
        self.w_bpf = BandpassChain(fs, bpf_low_hz, bpf_high_hz)

    def chains(self) -> dict[str, _Stage]:
        return {"a_bpf": self.a_bpf, "a_spf": self.a_spf,
                "w_lpf": self.w_lpf, "w_bpf": self.w_bpf}

    def reset(self) -> None:
        for chain in self.chains().values():
            chain.reset()

    def step(self, t: float, a_norm: float, w_norm: float) -> FilteredSignals:
        ya, va = self.a_bpf.step(a_norm)
        ys, vs = self.a_spf.step(a_norm)
        yl, vl = self.w_lpf.step(w_norm)
        yb, vb = self.w_bpf.step(w_norm)
        return FilteredSignals(t, ya, ys, yl, yb, va and vs and vl and vb)

    def process(self, t: np.ndarray, a_norm: np.ndarray, w_norm: np.ndarray) -> FilteredBlock:
        ya, va = self.a_bpf.process(a_norm)
        ys, vs = self.a_spf.process(a_norm)
        yl, vl = self.w_lpf.process(w_norm)
        yb, vb = self.w_bpf.process(w_norm)
        return FilteredBlock(np.asarray(t, dtype=float), ya, ys, yl, yb, va & vs & vl & vb)


def export_chain_designs(fs: float) -> str:
    """Coefficient listing of every default chain, for cross-implementation checks."""
    bank = FilterBank(fs)
    named = dict(bank.chains())
    named["variance"] = VarianceChain(fs)
    parts = [coefficient_listing(f"{name} @ fs={fs:g} Hz", chain.sections())
             for name, chain in named.items()]
    return "\n\n".join(parts)
