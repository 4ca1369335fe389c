"""Reference decoder: multinomial logistic regression trained by full-batch
gradient descent, optionally under a loss-thresholded curriculum.

Each training epoch computes per-sample cross-entropy losses, keeps the
samples whose loss does not exceed a threshold drawn from the current loss
distribution, and takes one gradient step on the kept set.  The kept fraction
ramps from q0 to 1 over the first ramp_frac of training, so low-loss samples
dominate early and harder ones phase in as the model stabilizes.  Zero
initialization plus a convex objective make training bitwise deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attention import EmptyInput, quantile


class TrainerError(Exception):
    """Base class for decoder-training errors."""


class DimMismatch(TrainerError):
    """Feature width disagrees with parameter shape."""


class DegenerateLabels(TrainerError):
    """Fewer than two classes present, or fewer samples than classes."""


class NonFiniteLoss(TrainerError):
    """Loss diverged; learning rate too large for the data."""


@dataclass
class DecoderParams:
    """Softmax decoder weights [n_features, n_classes], bias, and l2 strength."""

    weights: np.ndarray
    bias: np.ndarray
    l2: float = 0.0

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise DimMismatch("weights must be 2-D and bias 1-D")
        if self.weights.shape[1] != self.bias.shape[0]:
            raise DimMismatch(
                f"weights {self.weights.shape} vs bias {self.bias.shape}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise NonFiniteLoss("parameters must be finite")

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    def to_dict(self, extra: dict | None = None) -> dict:
        doc = {
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "weights": [float(v) for v in self.weights.reshape(-1)],  # row-major
            "bias": [float(v) for v in self.bias],
            "l2": self.l2,
        }
        if extra:
            doc.update(extra)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "DecoderParams":
        w = np.asarray(doc["weights"], dtype=np.float64).reshape(
            doc["n_features"], doc["n_classes"]
        )
        return cls(weights=w, bias=np.asarray(doc["bias"]), l2=float(doc["l2"]))

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(extra), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "DecoderParams":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class CurriculumSchedule:
    """Kept-fraction ramp q(t) = min(1, q0 + (1-q0) * t / (ramp_frac * epochs))."""

    enabled: bool = True
    q0: float = 0.5
    ramp_frac: float = 0.5
    epochs: int = 300
    lr: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.q0 <= 1.0:
            raise ValueError(f"q0 {self.q0} outside (0, 1]")
        if not 0.0 < self.ramp_frac <= 1.0:
            raise ValueError(f"ramp_frac {self.ramp_frac} outside (0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    def kept_fraction(self, t: int) -> float:
        if self.q0 >= 1.0:
            return 1.0
        return min(1.0, self.q0 + (1.0 - self.q0) * t / (self.ramp_frac * self.epochs))

    def to_dict(self) -> dict:
        return {
            "enabled": self.enabled,
            "q0": self.q0,
            "ramp_frac": self.ramp_frac,
            "epochs": self.epochs,
            "lr": self.lr,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CurriculumSchedule":
        return cls(
            enabled=bool(doc.get("enabled", True)),
            q0=float(doc.get("q0", 0.5)),
            ramp_frac=float(doc.get("ramp_frac", 0.5)),
            epochs=int(doc.get("epochs", 300)),
            lr=float(doc.get("lr", 0.1)),
            seed=int(doc.get("seed", 0)),
        )


@dataclass
class TrainTrace:
    """Per-epoch diagnostics of one training run."""

    mean_active_loss: list[float] = field(default_factory=list)
    kept: list[int] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)  # full-set loss + l2 penalty


def predict_proba(params: DecoderParams, features: np.ndarray) -> np.ndarray:
    """Row-stochastic softmax of the affine map; overflow-safe."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.n_features:
        raise DimMismatch(
            f"features {x.shape} incompatible with {params.n_features} inputs"
        )
    logits = x @ params.weights + params.bias
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def predict(params: DecoderParams, features: np.ndarray) -> np.ndarray:
    """Argmax class per row (ties resolve to the lowest class index)."""
    return predict_proba(params, features).argmax(axis=1)


def per_sample_loss(
    params: DecoderParams, features: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Cross-entropy -ln p[y] per sample; excludes the l2 penalty."""
    labels = np.asarray(labels, dtype=np.int64)
    proba = predict_proba(params, features)
    if labels.min() < 0 or labels.max() >= params.n_classes:
        raise DimMismatch("label outside [0, n_classes)")
    with np.errstate(divide="ignore"):  # log(0) -> inf, caught as NonFiniteLoss
        return -np.log(proba[np.arange(labels.size), labels])


def lambda_threshold(
    losses: np.ndarray, t: int, sched: CurriculumSchedule
) -> tuple[float, np.ndarray]:
    """Loss threshold and binary keep-weights at training epoch t.

    The threshold is the q(t)-quantile of the current losses, raised to the
    ceil(q*n)-th smallest loss when interpolation would keep fewer than
    ceil(q*n) samples; membership uses a closed inequality so ties at the
    threshold stay active.  Disabled schedules keep everything (lambda = inf).
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        raise EmptyInput("losses must be nonempty")
    if not np.all(np.isfinite(losses)):
        raise NonFiniteLoss("non-finite per-sample loss")
    if not sched.enabled:
        return math.inf, np.ones(losses.size, dtype=bool)
    q = sched.kept_fraction(t)
    lam = quantile(losses, q)
    floor = math.ceil(q * losses.size)
    lam = max(lam, float(np.partition(losses, floor - 1)[floor - 1]))
    return lam, losses <= lam


def _grad(
    w: np.ndarray,
    b: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    keep: np.ndarray,
    l2: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradient of (1/sum w) * sum_i w_i L_i + l2 * ||W||_F^2 at fixed weights w_i.

    Returns (dW, db, proba).
    """
    logits = x @ w + b
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    proba = e / e.sum(axis=1, keepdims=True)
    m = int(keep.sum())
    delta = proba.copy()
    delta[np.arange(y.size), y] -= 1.0
    delta[~keep] = 0.0
    dw = x.T @ delta / m + 2.0 * l2 * w
    db = delta.sum(axis=0) / m
    return dw, db, proba


def train(
    features: np.ndarray,
    labels: np.ndarray,
    sched: CurriculumSchedule,
    l2: float = 1e-4,
    n_classes: int | None = None,
) -> tuple[DecoderParams, TrainTrace]:
    """Full-batch gradient descent from zero initialization.

    Each epoch: per-sample losses at the current parameters, curriculum
    weights from lambda_threshold, one step of size lr on the kept-set
    objective (1/sum w) * sum w_i L_i + l2 * ||W||_F^2.  Bias is not
    regularized.  Bitwise deterministic for identical inputs.
    """
    sched.validate()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise DimMismatch(f"features {x.shape} vs {y.size} labels")
    present = np.unique(y)
    if present.size < 2:
        raise DegenerateLabels("training needs at least two classes")
    c = n_classes if n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= c:
        raise DimMismatch("label outside [0, n_classes)")
    if x.shape[0] < c:
        raise DegenerateLabels(f"{x.shape[0]} samples for {c} classes")
    w = np.zeros((x.shape[1], c))
    b = np.zeros(c)
    trace = TrainTrace()
    for t in range(sched.epochs):
        params = DecoderParams(weights=w, bias=b, l2=l2)
        losses = per_sample_loss(params, x, y)
        if not np.all(np.isfinite(losses)):
            raise NonFiniteLoss(f"divergence at epoch {t}; reduce lr")
        lam, keep = lambda_threshold(losses, t, sched)
        dw, db, proba = _grad(w, b, x, y, keep, l2)
        trace.mean_active_loss.append(float(losses[keep].mean()))
        trace.kept.append(int(keep.sum()))
        trace.lam.append(float(lam))
        trace.accuracy.append(float((proba.argmax(axis=1) == y).mean()))
        trace.objective.append(float(losses.mean() + l2 * float((w**2).sum())))
        w = w - sched.lr * dw
        b = b - sched.lr * db
    final = DecoderParams(weights=w, bias=b, l2=l2)
    return final, trace


__all__ = [
    "TrainerError",
    "DimMismatch",
    "DegenerateLabels",
    "NonFiniteLoss",
    "DecoderParams",
    "CurriculumSchedule",
    "TrainTrace",
    "predict_proba",
    "predict",
    "per_sample_loss",
    "lambda_threshold",
    "train",
]
