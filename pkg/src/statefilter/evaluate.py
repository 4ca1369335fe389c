"""Cross-session protocol: baseline vs. attention-filtered training, exact
sign-flip significance, and per-channel alpha-power export.

For every subject the decoder is trained on one session and scored on later
sessions.  The baseline trains on all epochs with the curriculum disabled;
the proposed pipeline tunes the fence multiplier on the training session,
masks high-alpha/theta epochs, and trains with the curriculum enabled.  Both
are scored on identical unfiltered test epochs.  Per-subject accuracy
differences (seed-averaged) feed an exact two-sided sign-flip permutation
test on the mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import attention as att
from . import curriculum as cur
from . import dsp
from .eegio import EpochSet, read_recording


class EvalError(Exception):
    """Base class for protocol errors."""


class ProtocolError(EvalError):
    """Train/test overlap or other configuration violation."""


class MissingData(EvalError):
    """A referenced session directory does not exist."""


class TooManySubjects(EvalError):
    """Exact sign-flip enumeration is capped at 20 paired differences."""


class LengthMismatch(EvalError):
    """Profile and epoch set disagree in length."""


def fmt17(x: float) -> str:
    """17-significant-digit decimal, enough to reproduce the double exactly."""
    return format(float(x), ".17g")


def stars_for_p(p: float) -> str:
    """Significance stars: *** below 0.001, ** below 0.01, * below 0.05."""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def paired_sign_flip_test(diffs: np.ndarray) -> float:
    """Exact two-sided sign-flip permutation test on the mean of paired diffs.

    Enumerates all 2^n sign assignments; p is the fraction whose |mean|
    reaches the observed |mean|.  Exact and symmetric: p(d) == p(-d).
    """
    d = np.asarray(diffs, dtype=np.float64)
    if d.size == 0:
        raise ValueError("diffs must be nonempty")
    if d.size > 20:
        raise TooManySubjects(f"{d.size} pairs; exact enumeration capped at 20")
    sums = np.zeros(1)
    for v in d:
        sums = np.concatenate([sums + v, sums - v])
    observed = abs(sums[0])  # index 0 is the all-positive assignment
    return float(np.mean(np.abs(sums) >= observed))


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one baseline-vs-proposed comparison."""

    dataset_root: str
    subjects: list[str]
    train_session: str
    test_sessions: list[str]
    k_grid: list[float] = field(default_factory=lambda: list(att.DEFAULT_K_GRID))
    schedule: cur.CurriculumSchedule = field(default_factory=cur.CurriculumSchedule)
    l2: float = 1e-4
    unit: str = "window"
    seeds: list[int] = field(default_factory=lambda: [0])
    val_fraction: float = 0.2
    band: tuple[float, float] = (1.0, 40.0)
    order: int = 4
    fs_out: float = 250.0
    window_sec: float = 2.0
    standardize_scope: str = "epoch"
    score_unit: str = "window"
    extra_lowpass_hz: float | None = None

    def validate(self) -> None:
        if self.train_session in self.test_sessions:
            raise ProtocolError(
                f"train session {self.train_session!r} also listed for testing"
            )
        if not self.subjects:
            raise ProtocolError("no subjects configured")
        if not self.test_sessions:
            raise ProtocolError("no test sessions configured")
        if not self.seeds:
            raise ProtocolError("no seeds configured")

    def to_dict(self) -> dict:
        return {
            "dataset_root": str(self.dataset_root),
            "subjects": list(self.subjects),
            "train_session": self.train_session,
            "test_sessions": list(self.test_sessions),
            "k_grid": [float(k) for k in self.k_grid],
            "schedule": self.schedule.to_dict(),
            "l2": self.l2,
            "unit": self.unit,
            "seeds": [int(s) for s in self.seeds],
            "val_fraction": self.val_fraction,
            "band": [self.band[0], self.band[1]],
            "order": self.order,
            "fs_out": self.fs_out,
            "window_sec": self.window_sec,
            "standardize_scope": self.standardize_scope,
            "score_unit": self.score_unit,
            "extra_lowpass_hz": self.extra_lowpass_hz,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        kwargs = dict(doc)
        if "schedule" in kwargs:
            kwargs["schedule"] = cur.CurriculumSchedule.from_dict(kwargs["schedule"])
        if "band" in kwargs:
            kwargs["band"] = (float(kwargs["band"][0]), float(kwargs["band"][1]))
        return cls(**kwargs)


@dataclass
class EvalReport:
    """Per-cell accuracies plus aggregates, significance, and filtering stats."""

    config: dict
    results: list[dict]  # {subject, seed, test_session, method, accuracy}
    subject_means: dict  # method -> {subject: mean accuracy over seeds & sessions}
    method_mean: dict  # method -> float
    method_std: dict  # method -> population std across subjects
    session_means: dict  # test_session -> method -> mean across subjects
    diffs: list[float]  # proposed - baseline per subject, seed-averaged
    p_value: float
    stars: str
    k_selected: dict  # subject -> {seed: k}
    n_kept: dict  # subject -> {seed: [kept, total]}
    removed_distracted: dict  # subject -> {seed: fraction}, when ground truth known

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "results": self.results,
            "subject_means": self.subject_means,
            "method_mean": self.method_mean,
            "method_std": self.method_std,
            "session_means": self.session_means,
            "diffs": self.diffs,
            "p_value": self.p_value,
            "stars": self.stars,
            "k_selected": self.k_selected,
            "n_kept": self.n_kept,
            "removed_distracted": self.removed_distracted,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        return cls(**doc)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EvalReport) and self.to_dict() == other.to_dict()


@dataclass
class FittedModel:
    """Decoder parameters plus the feature scaling learned on its training set."""

    params: cur.DecoderParams
    feature_mean: np.ndarray
    feature_std: np.ndarray
    trace: cur.TrainTrace | None = None

    def to_dict(self, extra: dict | None = None) -> dict:
        doc = self.params.to_dict(extra)
        doc["feature_mean"] = [float(v) for v in self.feature_mean]
        doc["feature_std"] = [float(v) for v in self.feature_std]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FittedModel":
        return cls(
            params=cur.DecoderParams.from_dict(doc),
            feature_mean=np.asarray(doc["feature_mean"], dtype=np.float64),
            feature_std=np.asarray(doc["feature_std"], dtype=np.float64),
        )

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(extra), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "FittedModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class ReferenceDecoder:
    """Softmax decoder on log band-power features; the protocol's default.

    Features are z-scored with training-set statistics before the gradient
    descent; raw log powers are poorly conditioned for the default step size.
    """

    def __init__(self, l2: float = 1e-4, bands: dsp.BandTable = dsp.DEFAULT_BANDS):
        self.l2 = l2
        self.bands = bands

    def features(self, epochs: EpochSet) -> np.ndarray:
        return dsp.psd_features(epochs, self.bands)

    def fit(self, epochs: EpochSet, sched: cur.CurriculumSchedule) -> FittedModel:
        x = self.features(epochs)
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        params, trace = cur.train(
            (x - mean) / std,
            epochs.labels,
            sched,
            l2=self.l2,
            n_classes=len(epochs.label_names),
        )
        return FittedModel(
            params=params, feature_mean=mean, feature_std=std, trace=trace
        )

    def predict(self, model: FittedModel, epochs: EpochSet) -> np.ndarray:
        x = (self.features(epochs) - model.feature_mean) / model.feature_std
        return cur.predict(model.params, x)


def score_predictions(
    pred: np.ndarray,
    epochs: EpochSet,
    score_unit: str = "window",
) -> float:
    """Fraction correct, per window or by per-trial majority vote.

    Trial-level ties resolve to the lowest class index (bincount argmax).
    """
    y = epochs.labels
    if score_unit == "window":
        return float(np.mean(pred == y))
    if score_unit != "trial":
        raise ValueError(f"unknown score unit {score_unit!r}")
    correct = 0
    trials = np.unique(epochs.source_trial)
    n_classes = max(len(epochs.label_names), int(pred.max()) + 1)
    for t in trials:
        idx = epochs.source_trial == t
        votes = np.bincount(pred[idx], minlength=n_classes)
        if votes.argmax() == y[idx][0]:
            correct += 1
    return correct / trials.size


def _load_session(
    cfg: ExperimentConfig, subject: str, session: str, role: str
) -> EpochSet:
    d = Path(cfg.dataset_root) / subject / session
    if not d.is_dir():
        raise MissingData(f"missing session directory {d}")
    rec = read_recording(d)
    return dsp.preprocess_recording(
        rec,
        band=cfg.band,
        order=cfg.order,
        fs_out=cfg.fs_out,
        window_sec=cfg.window_sec,
        scope=cfg.standardize_scope,
        role=role,
        extra_lowpass_hz=cfg.extra_lowpass_hz,
    )


def run_subject(
    cfg: ExperimentConfig, subject: str, decoder: ReferenceDecoder | None = None
) -> dict:
    """Baseline and proposed accuracies for one subject, all seeds/sessions.

    Returns a plain dict so results can cross process boundaries.
    """
    decoder = decoder or ReferenceDecoder(l2=cfg.l2)
    train_epochs = _load_session(cfg, subject, cfg.train_session, role="train")
    test_sets = {
        s: _load_session(cfg, subject, s, role="test") for s in cfg.test_sessions
    }

    sched_off = cur.CurriculumSchedule(
        enabled=False,
        q0=cfg.schedule.q0,
        ramp_frac=cfg.schedule.ramp_frac,
        epochs=cfg.schedule.epochs,
        lr=cfg.schedule.lr,
    )
    sched_on = cur.CurriculumSchedule(
        enabled=True,
        q0=cfg.schedule.q0,
        ramp_frac=cfg.schedule.ramp_frac,
        epochs=cfg.schedule.epochs,
        lr=cfg.schedule.lr,
    )
    baseline_model = decoder.fit(train_epochs, sched_off)
    baseline_acc = {
        s: score_predictions(
            decoder.predict(baseline_model, ep), ep, cfg.score_unit
        )
        for s, ep in test_sets.items()
    }

    def train_fn(epochs: EpochSet) -> FittedModel:
        return decoder.fit(epochs, sched_on)

    def eval_fn(model: FittedModel, epochs: EpochSet) -> float:
        return score_predictions(decoder.predict(model, epochs), epochs, "window")

    out = {
        "subject": subject,
        "cells": [],
        "k_selected": {},
        "n_kept": {},
        "removed_distracted_frac": {},
    }
    for seed in cfg.seeds:
        search = att.select_k(
            train_epochs,
            grid=cfg.k_grid,
            val_fraction=cfg.val_fraction,
            seed=seed,
            train_fn=train_fn,
            eval_fn=eval_fn,
            unit=cfg.unit,
        )
        profile = att.build_profile(train_epochs, search.k_selected, unit=cfg.unit)
        kept = att.apply_mask(train_epochs, profile)
        proposed_model = decoder.fit(kept, sched_on)
        out["k_selected"][str(seed)] = search.k_selected
        out["n_kept"][str(seed)] = [profile.n_kept, profile.n_total]
        if train_epochs.epoch_flags is not None:
            distracted = np.array(
                [bool(f.get("distracted", False)) for f in train_epochs.epoch_flags]
            )
            if distracted.any():
                removed = np.mean(~profile.mask[distracted])
                out["removed_distracted_frac"][str(seed)] = float(removed)
        for s, ep in test_sets.items():
            acc_p = score_predictions(
                decoder.predict(proposed_model, ep), ep, cfg.score_unit
            )
            out["cells"].append(
                {
                    "subject": subject,
                    "seed": seed,
                    "test_session": s,
                    "method": "proposed",
                    "accuracy": acc_p,
                }
            )
            out["cells"].append(
                {
                    "subject": subject,
                    "seed": seed,
                    "test_session": s,
                    "method": "baseline",
                    "accuracy": baseline_acc[s],
                }
            )
    return out


def run_protocol(
    cfg: ExperimentConfig,
    decoder: ReferenceDecoder | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Full comparison over subjects, seeds, and test sessions.

    ``jobs`` parallelizes across subjects; injected decoders force serial
    execution (they may not survive pickling).  Results are assembled in
    configured subject order either way, so output is job-count invariant.
    """
    cfg.validate()
    if jobs > 1 and decoder is None:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {s: pool.submit(run_subject, cfg, s) for s in cfg.subjects}
            per_subject = {s: futures[s].result() for s in cfg.subjects}
    else:
        per_subject = {s: run_subject(cfg, s, decoder) for s in cfg.subjects}
    return assemble_report(cfg, [per_subject[s] for s in cfg.subjects])


def assemble_report(cfg: ExperimentConfig, subject_results: list[dict]) -> EvalReport:
    results = []
    subject_means: dict = {"baseline": {}, "proposed": {}}
    for sub in subject_results:
        results.extend(sub["cells"])
        for method in ("baseline", "proposed"):
            vals = [c["accuracy"] for c in sub["cells"] if c["method"] == method]
            subject_means[method][sub["subject"]] = float(np.mean(vals))
    method_mean = {}
    method_std = {}
    for method in ("baseline", "proposed"):
        vals = np.array([subject_means[method][s] for s in cfg.subjects])
        method_mean[method] = float(vals.mean())
        method_std[method] = float(vals.std())
    session_means: dict = {}
    for session in cfg.test_sessions:
        session_means[session] = {}
        for method in ("baseline", "proposed"):
            cells = [
                c["accuracy"]
                for c in results
                if c["test_session"] == session and c["method"] == method
            ]
            session_means[session][method] = float(np.mean(cells))
    diffs = [
        subject_means["proposed"][s] - subject_means["baseline"][s]
        for s in cfg.subjects
    ]
    p = paired_sign_flip_test(np.array(diffs))
    return EvalReport(
        config=cfg.to_dict(),
        results=results,
        subject_means=subject_means,
        method_mean=method_mean,
        method_std=method_std,
        session_means=session_means,
        diffs=[float(d) for d in diffs],
        p_value=p,
        stars=stars_for_p(p),
        k_selected={sub["subject"]: sub["k_selected"] for sub in subject_results},
        n_kept={sub["subject"]: sub["n_kept"] for sub in subject_results},
        removed_distracted={
            sub["subject"]: sub["removed_distracted_frac"] for sub in subject_results
        },
    )


def alpha_map_export(
    epochs: EpochSet, profile: att.AttentionProfile, out: str | Path
) -> None:
    """CSV of per-(epoch, channel) alpha periodogram power with mask flags.

    Raw material for retained-vs-removed topography plots rendered elsewhere.
    """
    n = len(epochs)
    if profile.n_total != n:
        raise LengthMismatch(f"profile covers {profile.n_total} epochs, set has {n}")
    lines = ["epoch,channel,alpha_power,atr,mask"]
    if n:
        density = dsp.periodogram_density(epochs.data, epochs.fs_hz)
        alpha = dsp.band_power_from_density(
            density, epochs.n_samples, epochs.fs_hz, dsp.ALPHA_BAND
        )  # (epoch, channel)
        for e in range(n):
            for c, name in enumerate(epochs.channel_names):
                lines.append(
                    f"{e},{name},{fmt17(alpha[e, c])},"
                    f"{fmt17(profile.atr[e])},{int(profile.mask[e])}"
                )
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_report(report: EvalReport, out_dir: str | Path) -> tuple[Path, Path]:
    """Write report.json and summary.csv; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    report_path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    subjects = report.config["subjects"]
    lines = ["subject,baseline,proposed,diff,p_value,stars"]
    for i, s in enumerate(subjects):
        b = report.subject_means["baseline"][s]
        p = report.subject_means["proposed"][s]
        lines.append(f"{s},{fmt17(b)},{fmt17(p)},{fmt17(report.diffs[i])},,")
    lines.append(
        "mean,{},{},{},{},{}".format(
            fmt17(report.method_mean["baseline"]),
            fmt17(report.method_mean["proposed"]),
            fmt17(report.method_mean["proposed"] - report.method_mean["baseline"]),
            fmt17(report.p_value),
            report.stars,
        )
    )
    lines.append(
        "std,{},{},,,".format(
            fmt17(report.method_std["baseline"]),
            fmt17(report.method_std["proposed"]),
        )
    )
    summary_path = out / "summary.csv"
    summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report_path, summary_path


__all__ = [
    "EvalError",
    "ProtocolError",
    "MissingData",
    "TooManySubjects",
    "LengthMismatch",
    "ExperimentConfig",
    "EvalReport",
    "FittedModel",
    "ReferenceDecoder",
    "stars_for_p",
    "paired_sign_flip_test",
    "score_predictions",
    "run_subject",
    "run_protocol",
    "assemble_report",
    "alpha_map_export",
    "emit_report",
    "fmt17",
]
