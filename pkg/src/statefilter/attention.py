"""Per-epoch attention estimation and Tukey-fence outlier masking.

The attention index of an epoch is the ratio of alpha-band to theta-band
spectral energy, summed across channels (rectangular window, raw squared FFT
magnitudes; the normalization cancels in the ratio).  Epochs whose index
exceeds the upper Tukey fence Q3 + k * (Q3 - Q1) are masked out; only the
high side is fenced because elevated alpha relative to theta marks reduced
engagement.  The fence multiplier k is tuned per subject by validation
accuracy over a candidate grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .dsp import ALPHA_BAND, THETA_BAND, band_bins, fft_mag_sq
from .eegio import EpochSet

THETA_ENERGY_FLOOR = 1e-12

DEFAULT_K_GRID = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


class StateFilterError(Exception):
    """Base class for attention-filtering errors."""


class EmptyInput(StateFilterError):
    """Operation on an empty vector."""


class DegenerateSpectrum(StateFilterError):
    """An epoch has (near-)zero theta energy; the index is undefined."""


class LengthMismatch(StateFilterError):
    """Mask length disagrees with epoch count."""


class GridEmpty(StateFilterError):
    """Candidate grid for the fence multiplier is empty."""


class InsufficientData(StateFilterError):
    """A class is absent from the fit or validation split."""


class EvaluationDataLeak(StateFilterError):
    """Masking or threshold search attempted on evaluation-role epochs."""


@dataclass
class AttentionProfile:
    """Per-epoch attention indices with the fence and mask derived from them."""

    atr: np.ndarray
    q1: float
    q3: float
    k: float
    fence_upper: float
    mask: np.ndarray
    n_kept: int
    n_total: int

    def to_dict(self) -> dict:
        return {
            "atr": [float(v) for v in self.atr],
            "q1": self.q1,
            "q3": self.q3,
            "k": self.k,
            "fence_upper": self.fence_upper,
            "mask": [int(v) for v in self.mask],
            "n_kept": self.n_kept,
            "n_total": self.n_total,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AttentionProfile":
        return cls(
            atr=np.asarray(doc["atr"], dtype=np.float64),
            q1=float(doc["q1"]),
            q3=float(doc["q3"]),
            k=float(doc["k"]),
            fence_upper=float(doc["fence_upper"]),
            mask=np.asarray(doc["mask"], dtype=bool),
            n_kept=int(doc["n_kept"]),
            n_total=int(doc["n_total"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "AttentionProfile":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class KSearchResult:
    """Validation accuracies over the candidate grid and the retained k."""

    grid: list[float]
    val_accuracy: list[float]
    k_selected: float
    val_fraction: float
    seed: int


def attention_index(epochs: EpochSet) -> np.ndarray:
    """Alpha/theta energy ratio per epoch, channels summed before dividing."""
    if len(epochs) == 0:
        raise EmptyInput("no epochs")
    spectra = fft_mag_sq(epochs.data, window="rectangular")
    alpha_idx = band_bins(epochs.n_samples, epochs.fs_hz, ALPHA_BAND)
    theta_idx = band_bins(epochs.n_samples, epochs.fs_hz, THETA_BAND)
    e_alpha = spectra[:, :, alpha_idx].sum(axis=(1, 2))
    e_theta = spectra[:, :, theta_idx].sum(axis=(1, 2))
    if np.any(e_theta < THETA_ENERGY_FLOOR):
        bad = int(np.argmin(e_theta))
        raise DegenerateSpectrum(
            f"epoch {bad} has theta energy {e_theta[bad]:.3g} < {THETA_ENERGY_FLOOR}"
        )
    return e_alpha / e_theta


def quantile(xs: np.ndarray, p: float) -> float:
    """Linear-interpolation quantile at position h = (n-1)*p of the sorted data."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        raise EmptyInput("quantile of empty vector")
    if not np.all(np.isfinite(xs)):
        raise ValueError("quantile input must be finite")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    return float(np.quantile(xs, p))


def tukey_mask(atr: np.ndarray, k: float) -> AttentionProfile:
    """Keep values at or below the upper fence Q3 + k * (Q3 - Q1).

    Only the high side is fenced; values at or below Q3 always pass, so the
    mask is never all-zero.
    """
    atr = np.asarray(atr, dtype=np.float64)
    if atr.size == 0:
        raise EmptyInput("tukey_mask of empty vector")
    if not np.all(np.isfinite(atr)):
        raise ValueError("attention indices must be finite")
    if k < 0:
        raise ValueError(f"fence multiplier must be >= 0, got {k}")
    q1 = quantile(atr, 0.25)
    q3 = quantile(atr, 0.75)
    fence = q3 + k * (q3 - q1)
    mask = atr <= fence
    return AttentionProfile(
        atr=atr,
        q1=q1,
        q3=q3,
        k=float(k),
        fence_upper=fence,
        mask=mask,
        n_kept=int(mask.sum()),
        n_total=int(atr.size),
    )


def apply_mask(epochs: EpochSet, profile: AttentionProfile) -> EpochSet:
    """Sub-EpochSet of mask-1 epochs, order preserved; refuses evaluation data."""
    if epochs.role == "test":
        raise EvaluationDataLeak("refusing to mask evaluation-session epochs")
    if profile.n_total != len(epochs):
        raise LengthMismatch(
            f"profile covers {profile.n_total} epochs, set has {len(epochs)}"
        )
    keep = np.nonzero(profile.mask)[0]
    return epochs.subset(keep)


def build_profile(epochs: EpochSet, k: float, unit: str = "window") -> AttentionProfile:
    """Attention profile for an EpochSet at a fixed fence multiplier.

    unit="window" fences each window's own index.  unit="trial" averages the
    index over each trial's windows, fences the per-trial values, and expands
    the decision back to windows; the stored per-window atr is then the trial
    mean, so the mask/fence invariant still holds elementwise.
    """
    atr = attention_index(epochs)
    if unit == "window":
        return tukey_mask(atr, k)
    if unit != "trial":
        raise ValueError(f"unknown masking unit {unit!r}")
    trials, inverse = np.unique(epochs.source_trial, return_inverse=True)
    sums = np.zeros(trials.size)
    counts = np.zeros(trials.size)
    np.add.at(sums, inverse, atr)
    np.add.at(counts, inverse, 1.0)
    trial_atr = sums / counts
    trial_profile = tukey_mask(trial_atr, k)
    expanded = trial_atr[inverse]
    mask = trial_profile.mask[inverse]
    return AttentionProfile(
        atr=expanded,
        q1=trial_profile.q1,
        q3=trial_profile.q3,
        k=float(k),
        fence_upper=trial_profile.fence_upper,
        mask=mask,
        n_kept=int(mask.sum()),
        n_total=int(mask.size),
    )


def split_trials(
    epochs: EpochSet, val_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified fit/validation split at trial granularity.

    Returns (fit_epoch_idx, val_epoch_idx).  All windows of a trial land on
    one side; per class, round(val_fraction * n_trials) trials (at least one)
    go to validation.  Raises InsufficientData if a class has fewer than two
    trials.
    """
    rng = np.random.default_rng(seed)
    trials = np.unique(epochs.source_trial)
    trial_label = {}
    for t in trials:
        idx = np.nonzero(epochs.source_trial == t)[0][0]
        trial_label[int(t)] = int(epochs.labels[idx])
    val_trials: set[int] = set()
    for cls in sorted(set(trial_label.values())):
        cls_trials = np.array([t for t in trials if trial_label[int(t)] == cls])
        if cls_trials.size < 2:
            raise InsufficientData(
                f"class {cls} has {cls_trials.size} trial(s); need >= 2 to split"
            )
        n_val = max(1, int(round(val_fraction * cls_trials.size)))
        n_val = min(n_val, cls_trials.size - 1)
        chosen = rng.permutation(cls_trials)[:n_val]
        val_trials.update(int(t) for t in chosen)
    in_val = np.array([int(t) in val_trials for t in epochs.source_trial])
    return np.nonzero(~in_val)[0], np.nonzero(in_val)[0]


def select_k(
    train: EpochSet,
    grid=DEFAULT_K_GRID,
    val_fraction: float = 0.2,
    seed: int = 0,
    train_fn: Callable[[EpochSet], object] = None,
    eval_fn: Callable[[object, EpochSet], float] = None,
    unit: str = "window",
) -> KSearchResult:
    """Pick the fence multiplier maximizing validation accuracy.

    For each candidate k the fence is computed on the fit split only, the fit
    split is masked and passed to ``train_fn``, and ``eval_fn`` scores the
    resulting model on the unmasked validation split.  Ties resolve to the
    largest k (keeps more data).  Deterministic given the seed.
    """
    grid = [float(k) for k in grid]
    if not grid:
        raise GridEmpty("candidate grid is empty")
    if sorted(grid) != grid:
        raise ValueError("grid must be ascending")
    if not 0.0 < val_fraction < 0.5:
        raise ValueError(f"val_fraction {val_fraction} outside (0, 0.5)")
    if train_fn is None or eval_fn is None:
        raise ValueError("train_fn and eval_fn are required")
    if train.role == "test":
        raise EvaluationDataLeak("threshold search on evaluation-session epochs")
    fit_idx, val_idx = split_trials(train, val_fraction, seed)
    fit = train.subset(fit_idx)
    val = train.subset(val_idx)
    for part, name in ((fit, "fit"), (val, "validation")):
        if len(set(part.labels.tolist())) < 2:
            raise InsufficientData(f"{name} split lost a class")
    accs = []
    best_k = grid[0]
    best_acc = -np.inf
    for k in grid:
        profile = build_profile(fit, k, unit=unit)
        model = train_fn(apply_mask(fit, profile))
        acc = float(eval_fn(model, val))
        accs.append(acc)
        if acc >= best_acc:  # >= resolves ties toward the largest k
            best_acc = acc
            best_k = k
    return KSearchResult(
        grid=grid,
        val_accuracy=accs,
        k_selected=best_k,
        val_fraction=val_fraction,
        seed=seed,
    )


__all__ = [
    "StateFilterError",
    "EmptyInput",
    "DegenerateSpectrum",
    "LengthMismatch",
    "GridEmpty",
    "InsufficientData",
    "EvaluationDataLeak",
    "AttentionProfile",
    "KSearchResult",
    "DEFAULT_K_GRID",
    "attention_index",
    "quantile",
    "tukey_mask",
    "apply_mask",
    "build_profile",
    "split_trials",
    "select_k",
]
