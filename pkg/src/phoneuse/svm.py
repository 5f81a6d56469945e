"""Soft-margin linear classifier: train, predict, persist.

The trainer minimizes

    0.5 * ||w||^2 + C * sum_i max(0, 1 - y_i * (w . x_i + b))

with an unregularized bias. It solves the dual with deterministic
maximal-violating-pair updates (an SMO scheme with a linear kernel and a
cached weight vector), recovers the bias exactly by minimizing the
one-dimensional piecewise-linear hinge sum for the current weights, and
certifies the result with the duality gap. The best primal iterate seen
at any epoch boundary is the returned model, so the recorded objective
curve is non-increasing by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .features import FeatureMask

MODEL_FORMAT_VERSION = 1

# KKT violation threshold for the pair-selection loop; tight enough that
# analytic fixtures are recovered well inside 1e-3.
KKT_EPS = 1e-6

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)


class TrainingError(ValueError):
    """The dataset cannot be trained on (bad labels, shapes, values)."""


class ConvergenceError(RuntimeError):
    """Epoch budget exhausted before any stopping criterion fired.

    Carries the best iterate found and its duality gap.
    """

    def __init__(self, message: str, model: "LinearModel", gap: float):
        super().__init__(message)
        self.model = model
        self.gap = gap


@dataclass
class Dataset:
    """Feature rows plus +/-1 labels."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 2 or len(self.y) != self.x.shape[0]:
            raise TrainingError(f"bad dataset shapes {self.x.shape} / {self.y.shape}")
        if not np.isfinite(self.x).all():
            raise TrainingError("dataset contains non-finite feature values")
        if not np.isin(self.y, (-1.0, 1.0)).all():
            raise TrainingError("labels must be +1 or -1")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    tol: float = 1e-6          # relative: duality gap or per-epoch objective decrease
    max_epochs: int = 10000
    seed: int = 0              # nonzero seeds start from a randomized feasible point

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise TrainingError(f"C must be positive, got {self.C}")
        if not self.tol > 0:
            raise TrainingError(f"tol must be positive, got {self.tol}")
        if self.max_epochs < 1:
            raise TrainingError(f"max_epochs must be >= 1, got {self.max_epochs}")


@dataclass
class LinearModel:
    """Trained hyperplane plus the feature standardization baked into it.

    ``w`` and ``b`` live in standardized coordinates: a raw vector x is
    scored as w . ((x - mean) / scale) + b.
    """

    w: np.ndarray
    b: float
    mean: np.ndarray
    scale: np.ndarray
    mask: Optional[FeatureMask] = None
    c: float = 1.0
    objective: float = math.nan
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        self.scale = np.asarray(self.scale, dtype=float)
        if not (self.w.shape == self.mean.shape == self.scale.shape):
            raise ValueError("model vector shapes disagree")
        if not np.isfinite(self.w).all() or not math.isfinite(self.b):
            raise ValueError("model weights must be finite")
        if (self.scale <= 0).any():
            raise ValueError("standardization scales must be positive")

    @property
    def d(self) -> int:
        return len(self.w)


def standardization(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and standard deviation; constant features get scale 1."""
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return mean, scale


def _hinge_sum(margins: np.ndarray) -> float:
    return float(np.maximum(0.0, 1.0 - margins).sum())


def _primal(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, c: float) -> float:
    return 0.5 * float(w @ w) + c * _hinge_sum(y * (x @ w + b))


def _optimal_bias(scores: np.ndarray, y: np.ndarray) -> float:
    """Exact minimizer of sum_i max(0, 1 - y_i (scores_i + b)) over b.

    The sum is convex piecewise linear in b; walking its breakpoints in
    order shows the slope rises by one hinge per breakpoint, starting
    from -(number of positive samples). The minimum is the flat segment
    after the n_pos-th breakpoint; its midpoint is the deterministic,
    symmetric choice.
    """
    pos = y > 0
    n_pos = int(pos.sum())
    events = np.sort(np.concatenate([1.0 - scores[pos], -1.0 - scores[~pos]]))
    if n_pos == 0:
        return float(events[0])
    if n_pos == len(events):
        return float(events[-1])
    return float(0.5 * (events[n_pos - 1] + events[n_pos]))


def _initial_alpha(n: int, y: np.ndarray, c: float, seed: int) -> np.ndarray:
    """Feasible dual start: zeros for seed 0, else a seeded balanced point."""
    if seed == 0:
        return np.zeros(n)
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.uniform(0.0, 0.5 * c, size=n)
    s_pos = u[y > 0].sum()
    s_neg = u[y < 0].sum()
    target = min(s_pos, s_neg)
    if target <= 0.0:
        return np.zeros(n)
    alpha = u.copy()
    alpha[y > 0] *= target / s_pos
    alpha[y < 0] *= target / s_neg
    return alpha


def train(data: Dataset, cfg: TrainConfig = TrainConfig(), standardize: bool = True,
          mask: Optional[FeatureMask] = None) -> LinearModel:
    """Train the classifier; raises ConvergenceError if no criterion fires."""
    if data.n < 2:
        raise TrainingError(f"need at least 2 samples, got {data.n}")
    if not ((data.y > 0).any() and (data.y < 0).any()):
        raise TrainingError("training data must contain both classes")

    if standardize:
        mean, scale = standardization(data.x)
    else:
        mean = np.zeros(data.d)
        scale = np.ones(data.d)
    x = (data.x - mean) / scale
    y = data.y
    n = data.n
    c = cfg.C

    alpha = _initial_alpha(n, y, c, cfg.seed)
    w = x.T @ (alpha * y)

    pos = y > 0
    epoch_len = n
    eps_b = 1e-12 * c  # alphas this close to a bound are treated as clipped
    best_p = math.inf
    best_w = w.copy()
    best_b = 0.0
    curve: list[float] = []
    certificate = None
    gap = math.inf
    updates = 0
    epochs = 0

    def snapshot() -> None:
        nonlocal best_p, best_w, best_b, gap
        scores = x @ w
        b = _optimal_bias(scores, y)
        p = 0.5 * float(w @ w) + c * _hinge_sum(y * (scores + b))
        if p < best_p:
            best_p = p
            best_w = w.copy()
            best_b = b
        dual = float(alpha.sum()) - 0.5 * float(w @ w)
        gap = best_p - dual
        curve.append(best_p)

    while epochs < cfg.max_epochs:
        epochs += 1
        prev_best = best_p
        kkt_reached = False
        for _ in range(epoch_len):
            g = y * (x @ w) - 1.0       # dual gradient (minimization form)
            score = -y * g
            i_up = (pos & (alpha < c - eps_b)) | (~pos & (alpha > eps_b))
            i_low = (~pos & (alpha < c - eps_b)) | (pos & (alpha > eps_b))
            if not i_up.any() or not i_low.any():
                kkt_reached = True
                break
            up_scores = np.where(i_up, score, -np.inf)
            low_scores = np.where(i_low, score, np.inf)
            i = int(np.argmax(up_scores))
            j = int(np.argmin(low_scores))
            m_up = up_scores[i]
            m_low = low_scores[j]
            if m_up - m_low <= KKT_EPS:
                kkt_reached = True
                break
            diff = x[i] - x[j]
            denom = max(float(diff @ diff), 1e-12)
            bound_i = c if y[i] > 0 else 0.0         # upper bound on y_i * alpha_i
            bound_j = 0.0 if y[j] > 0 else -c        # lower bound on y_j * alpha_j
            lam = min(bound_i - y[i] * alpha[i],
                      y[j] * alpha[j] - bound_j,
                      (m_up - m_low) / denom)
            alpha[i] = min(max(alpha[i] + y[i] * lam, 0.0), c)
            alpha[j] = min(max(alpha[j] - y[j] * lam, 0.0), c)
            w = w + lam * diff
            updates += 1
        snapshot()
        if kkt_reached:
            certificate = "kkt"
            break
        if gap <= cfg.tol * (1.0 + abs(best_p)):
            certificate = "gap"
            break
        if epochs >= 3 and prev_best - best_p <= cfg.tol * (1.0 + abs(best_p)):
            certificate = "plateau"
            break

    meta = {
        "certificate": certificate,
        "duality_gap": gap,
        "epochs": epochs,
        "pair_updates": updates,
        "objective_curve": curve,
        "seed": cfg.seed,
        "standardized": standardize,
    }
    model = LinearModel(w=best_w, b=best_b, mean=mean, scale=scale, mask=mask,
                        c=c, objective=best_p, meta=meta)
    if certificate is None:
        raise ConvergenceError(
            f"no convergence within {cfg.max_epochs} epochs (duality gap {gap:.3e})",
            model, gap)
    return model


def predict(model: LinearModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels and margins for raw feature rows. Margin 0 ties break to -1.

    Accepts a single vector or an (n, d) block; returns matching shapes.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != model.d:
        raise ValueError(f"expected {model.d} features, got {x2.shape[1]}")
    margins = ((x2 - model.mean) / model.scale) @ model.w + model.b
    labels = np.where(margins > 0.0, 1, -1)
    if single:
        return labels[0], margins[0]
    return labels, margins


def objective(model: LinearModel, data: Dataset, c: Optional[float] = None) -> float:
    """Primal objective of the model on a dataset (standardized coordinates)."""
    if data.d != model.d:
        raise ValueError(f"dataset has {data.d} features, model expects {model.d}")
    x = (data.x - model.mean) / model.scale
    return _primal(model.w, model.b, x, data.y, model.c if c is None else c)


def save_model(model: LinearModel, path: str | Path) -> None:
    """Versioned plain-text persistence; floats carry 17 significant digits."""
    payload = {
        "format": "phoneuse-linear-model",
        "version": MODEL_FORMAT_VERSION,
        "mask_index": model.mask.index if model.mask is not None else None,
        "w": [format(v, ".17g") for v in model.w],
        "b": format(model.b, ".17g"),
        "mean": [format(v, ".17g") for v in model.mean],
        "scale": [format(v, ".17g") for v in model.scale],
        "C": format(model.c, ".17g"),
        "objective": format(model.objective, ".17g"),
        "meta": {
            "certificate": model.meta.get("certificate"),
            "duality_gap": model.meta.get("duality_gap"),
            "epochs": model.meta.get("epochs"),
            "pair_updates": model.meta.get("pair_updates"),
            "seed": model.meta.get("seed"),
            "standardized": model.meta.get("standardized"),
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> LinearModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != "phoneuse-linear-model":
        raise ValueError(f"{path}: not a model file")
    if payload.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model version {payload.get('version')!r}")
    mask_index = payload.get("mask_index")
    return LinearModel(
        w=np.array([float(v) for v in payload["w"]]),
        b=float(payload["b"]),
        mean=np.array([float(v) for v in payload["mean"]]),
        scale=np.array([float(v) for v in payload["scale"]]),
        mask=FeatureMask.from_index(mask_index) if mask_index is not None else None,
        c=float(payload["C"]),
        objective=float(payload["objective"]),
        meta=dict(payload.get("meta", {})),
    )
