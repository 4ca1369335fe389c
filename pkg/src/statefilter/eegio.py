"""Dataset containers, the EEGB v1 on-disk format, and the synthetic EEG generator.

EEGB v1 stores one recording session per directory as three files:

* ``manifest.json`` -- UTF-8 JSON metadata (see :class:`Manifest`),
* ``data.bin``      -- little-endian IEEE-754 binary32, trial-major
  ``[trial][channel][sample]``, no header, no padding,
* ``labels.bin``    -- little-endian signed 32-bit integers, one per trial.

The synthetic generator produces motor-imagery-style sessions with a
controllable fraction of "distracted" trials (global alpha elevation, theta
suppression, class information removed) so downstream filtering can be
verified against known ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

MANIFEST_NAME = "manifest.json"


class EegbError(Exception):
    """Base class for dataset format errors."""


class InvalidRecording(EegbError):
    """A Recording violates its invariants (shape, finiteness, label range)."""


class ManifestError(EegbError):
    """manifest.json is missing, malformed, or internally inconsistent."""


class SizeMismatch(EegbError):
    """Binary file byte counts disagree with the manifest."""


class LabelRange(EegbError):
    """A label value falls outside [0, n_classes)."""


class InvalidConfig(EegbError):
    """A SynthConfig violates its invariants."""


@dataclass
class Manifest:
    """Metadata for one recording session."""

    dataset_id: str
    subject_id: str
    session_id: str
    fs_hz: float
    n_trials: int
    n_channels: int
    n_samples: int
    channel_names: list[str]
    label_names: list[str]
    data_file: str = "data.bin"
    labels_file: str = "labels.bin"
    format_version: int = FORMAT_VERSION
    metadata: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.n_trials < 1 or self.n_channels < 1 or self.n_samples < 1:
            raise ManifestError("n_trials, n_channels and n_samples must be >= 1")
        if not self.fs_hz > 0:
            raise ManifestError(f"fs_hz must be positive, got {self.fs_hz}")
        if len(self.channel_names) != self.n_channels:
            raise ManifestError(
                f"{len(self.channel_names)} channel names for {self.n_channels} channels"
            )
        if not self.label_names:
            raise ManifestError("label_names must be nonempty")

    @property
    def n_classes(self) -> int:
        return len(self.label_names)


@dataclass(eq=False)
class Recording:
    """One subject/session of continuous multichannel trials.

    ``data`` is canonicalized to float32 (the on-disk sample type) with shape
    ``(n_trials, n_channels, n_samples)``; ``labels`` to int32.  ``epoch_flags``
    is optional per-trial metadata, e.g. the generator's ground-truth
    ``{"distracted": bool}``.
    """

    manifest: Manifest
    data: np.ndarray
    labels: np.ndarray
    epoch_flags: list[dict] | None = None

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        self.validate()

    def validate(self) -> None:
        m = self.manifest
        m.validate()
        shape = (m.n_trials, m.n_channels, m.n_samples)
        if self.data.shape != shape:
            raise InvalidRecording(f"data shape {self.data.shape} != manifest {shape}")
        if not np.all(np.isfinite(self.data)):
            raise InvalidRecording("data contains NaN or Inf samples")
        if self.labels.shape != (m.n_trials,):
            raise InvalidRecording(
                f"labels shape {self.labels.shape} != ({m.n_trials},)"
            )
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= m.n_classes
        ):
            raise LabelRange(
                f"labels must lie in [0, {m.n_classes}), got range "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )
        if self.epoch_flags is not None and len(self.epoch_flags) != m.n_trials:
            raise InvalidRecording(
                f"{len(self.epoch_flags)} epoch_flags for {m.n_trials} trials"
            )

    def equals(self, other: "Recording") -> bool:
        """Bitwise equality of tensors plus metadata equality."""
        return (
            self.manifest == other.manifest
            and self.data.tobytes() == other.data.tobytes()
            and self.labels.tobytes() == other.labels.tobytes()
            and self.epoch_flags == other.epoch_flags
        )


@dataclass(eq=False)
class EpochSet:
    """Fixed-length epochs cut from one session's trials.

    ``data`` has shape ``(n_epochs, n_channels, n_samples)``; every epoch is
    ``round(window_sec * fs_hz)`` samples long.  ``source_trial[i]`` is the
    trial index epoch ``i`` was cut from; ``role`` tags provenance so masking
    code can refuse to touch evaluation data.
    """

    data: np.ndarray
    labels: np.ndarray
    subject_id: str
    session_id: str
    fs_hz: float
    window_sec: float
    source_trial: np.ndarray
    channel_names: list[str]
    label_names: list[str]
    epoch_flags: list[dict] | None = None
    role: str = "train"

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.source_trial = np.asarray(self.source_trial, dtype=np.int64)
        if self.data.ndim != 3:
            raise InvalidRecording(f"epoch tensor must be 3-D, got {self.data.shape}")
        n = self.data.shape[0]
        if self.labels.shape != (n,) or self.source_trial.shape != (n,):
            raise InvalidRecording("labels/source_trial length != epoch count")
        if self.epoch_flags is not None and len(self.epoch_flags) != n:
            raise InvalidRecording("epoch_flags length != epoch count")

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    def subset(self, idx: np.ndarray) -> "EpochSet":
        """New EpochSet keeping epochs at ``idx`` (order preserved)."""
        idx = np.atleast_1d(np.asarray(idx))
        if idx.dtype == bool:
            idx = np.nonzero(idx)[0]
        flags = None
        if self.epoch_flags is not None:
            flags = [self.epoch_flags[i] for i in idx]
        return EpochSet(
            data=self.data[idx],
            labels=self.labels[idx],
            subject_id=self.subject_id,
            session_id=self.session_id,
            fs_hz=self.fs_hz,
            window_sec=self.window_sec,
            source_trial=self.source_trial[idx],
            channel_names=list(self.channel_names),
            label_names=list(self.label_names),
            epoch_flags=flags,
            role=self.role,
        )


def write_recording(rec: Recording, out_dir: str | Path) -> None:
    """Write ``rec`` to ``out_dir`` in EEGB v1 layout.

    Raises InvalidRecording on invariant violations; OS-level failures
    (unwritable path) propagate as OSError.
    """
    rec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = rec.manifest
    doc = {
        "format_version": m.format_version,
        "dataset_id": m.dataset_id,
        "subject_id": m.subject_id,
        "session_id": m.session_id,
        "fs_hz": m.fs_hz,
        "n_trials": m.n_trials,
        "n_channels": m.n_channels,
        "n_samples": m.n_samples,
        "channel_names": m.channel_names,
        "label_names": m.label_names,
        "data_file": m.data_file,
        "labels_file": m.labels_file,
    }
    if m.metadata:
        doc["metadata"] = m.metadata
    if rec.epoch_flags is not None:
        doc["epoch_flags"] = rec.epoch_flags
    (out / MANIFEST_NAME).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / m.data_file).write_bytes(rec.data.astype("<f4").tobytes())
    (out / m.labels_file).write_bytes(rec.labels.astype("<i4").tobytes())


_REQUIRED_MANIFEST_FIELDS = {
    "format_version": int,
    "dataset_id": str,
    "subject_id": str,
    "session_id": str,
    "fs_hz": (int, float),
    "n_trials": int,
    "n_channels": int,
    "n_samples": int,
    "channel_names": list,
    "label_names": list,
    "data_file": str,
    "labels_file": str,
}


def read_manifest(session_dir: str | Path) -> tuple[Manifest, list[dict] | None]:
    """Parse and validate manifest.json; returns (manifest, epoch_flags)."""
    path = Path(session_dir) / MANIFEST_NAME
    if not path.is_file():
        raise ManifestError(f"missing {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"unparseable {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"{path} must hold a JSON object")
    for name, types in _REQUIRED_MANIFEST_FIELDS.items():
        if name not in doc:
            raise ManifestError(f"{path} missing field {name!r}")
        if not isinstance(doc[name], types):
            raise ManifestError(f"{path} field {name!r} has wrong type")
    manifest = Manifest(
        dataset_id=doc["dataset_id"],
        subject_id=doc["subject_id"],
        session_id=doc["session_id"],
        fs_hz=float(doc["fs_hz"]),
        n_trials=doc["n_trials"],
        n_channels=doc["n_channels"],
        n_samples=doc["n_samples"],
        channel_names=[str(c) for c in doc["channel_names"]],
        label_names=[str(c) for c in doc["label_names"]],
        data_file=doc["data_file"],
        labels_file=doc["labels_file"],
        format_version=doc["format_version"],
        metadata=doc.get("metadata", {}),
    )
    manifest.validate()
    return manifest, doc.get("epoch_flags")


def read_recording(session_dir: str | Path) -> Recording:
    """Read one EEGB v1 session directory into a validated Recording."""
    session_dir = Path(session_dir)
    m, flags = read_manifest(session_dir)
    data_path = session_dir / m.data_file
    labels_path = session_dir / m.labels_file
    for p in (data_path, labels_path):
        if not p.is_file():
            raise ManifestError(f"missing data file {p}")
    expect_data = 4 * m.n_trials * m.n_channels * m.n_samples
    expect_labels = 4 * m.n_trials
    if data_path.stat().st_size != expect_data:
        raise SizeMismatch(
            f"{data_path} is {data_path.stat().st_size} bytes, expected {expect_data}"
        )
    if labels_path.stat().st_size != expect_labels:
        raise SizeMismatch(
            f"{labels_path} is {labels_path.stat().st_size} bytes, "
            f"expected {expect_labels}"
        )
    data = np.fromfile(data_path, dtype="<f4").reshape(
        m.n_trials, m.n_channels, m.n_samples
    )
    labels = np.fromfile(labels_path, dtype="<i4")
    return Recording(manifest=m, data=data, labels=labels, epoch_flags=flags)


def session_dir(root: str | Path, dataset_id: str, subject_id: str, session_id: str) -> Path:
    """Canonical layout: <root>/<dataset>/<subject>/<session>/."""
    return Path(root) / dataset_id / subject_id / session_id


@dataclass
class SynthConfig:
    """Parameters of the synthetic generator.

    Attentive trials carry a class-informative alpha sinusoid on channel 0
    (class 0) or channel 1 (class 1) on top of unit-amplitude alpha and theta
    background; distracted trials lose the class component, gain strong alpha
    everywhere and weak theta, so their alpha/theta energy ratio is far above
    the attentive population.
    """

    n_subjects: int = 4
    n_sessions: int = 2
    n_trials: int = 80
    n_channels: int = 4
    fs_hz: float = 250.0
    trial_sec: float = 4.0
    distract_frac: float = 0.3
    alpha_hz: float = 10.0
    theta_hz: float = 6.0
    attentive_alpha_amp: float = 1.0
    attentive_theta_amp: float = 1.0
    distracted_alpha_amp: float = 3.0
    distracted_theta_amp: float = 0.5
    class_signal_amp: float = 1.5
    noise_std: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if min(self.n_subjects, self.n_sessions, self.n_trials) < 1:
            raise InvalidConfig("counts must be >= 1")
        if self.n_channels < 2:
            raise InvalidConfig("need >= 2 channels to place class signals")
        if not 0.0 <= self.distract_frac <= 1.0:
            raise InvalidConfig(f"distract_frac {self.distract_frac} outside [0, 1]")
        amps = (
            self.attentive_alpha_amp,
            self.attentive_theta_amp,
            self.distracted_alpha_amp,
            self.distracted_theta_amp,
            self.class_signal_amp,
            self.noise_std,
        )
        if any(a < 0 for a in amps):
            raise InvalidConfig("amplitudes must be >= 0")
        if not self.fs_hz > 2 * max(self.alpha_hz, self.theta_hz):
            raise InvalidConfig("fs_hz must exceed twice the highest rhythm frequency")
        if self.trial_sec <= 0:
            raise InvalidConfig("trial_sec must be positive")


def synth_dataset(cfg: SynthConfig) -> list[Recording]:
    """Generate one Recording per subject x session, deterministic in cfg.seed."""
    cfg.validate()
    n_samples = int(round(cfg.trial_sec * cfg.fs_hz))
    t = np.arange(n_samples) / cfg.fs_hz
    channel_names = [f"ch{c:02d}" for c in range(cfg.n_channels)]
    label_names = ["left_hand", "right_hand"]
    recs = []
    for subj in range(cfg.n_subjects):
        for sess in range(cfg.n_sessions):
            rng = np.random.default_rng([cfg.seed, subj, sess])
            labels = np.array([i % 2 for i in range(cfg.n_trials)], dtype=np.int32)
            rng.shuffle(labels)
            n_distracted = int(round(cfg.distract_frac * cfg.n_trials))
            distracted_idx = rng.choice(cfg.n_trials, size=n_distracted, replace=False)
            distracted = np.zeros(cfg.n_trials, dtype=bool)
            distracted[distracted_idx] = True

            data = np.empty((cfg.n_trials, cfg.n_channels, n_samples))
            for trial in range(cfg.n_trials):
                if distracted[trial]:
                    a_amp, t_amp = cfg.distracted_alpha_amp, cfg.distracted_theta_amp
                else:
                    a_amp, t_amp = cfg.attentive_alpha_amp, cfg.attentive_theta_amp
                phases = rng.uniform(0, 2 * np.pi, size=(cfg.n_channels, 2))
                x = a_amp * np.sin(
                    2 * np.pi * cfg.alpha_hz * t + phases[:, :1]
                ) + t_amp * np.sin(2 * np.pi * cfg.theta_hz * t + phases[:, 1:])
                cls_phase = rng.uniform(0, 2 * np.pi)
                if not distracted[trial]:
                    x[labels[trial]] += cfg.class_signal_amp * np.sin(
                        2 * np.pi * cfg.alpha_hz * t + cls_phase
                    )
                x += cfg.noise_std * rng.standard_normal((cfg.n_channels, n_samples))
                data[trial] = x

            manifest = Manifest(
                dataset_id="synth",
                subject_id=f"s{subj + 1:02d}",
                session_id=str(sess),
                fs_hz=cfg.fs_hz,
                n_trials=cfg.n_trials,
                n_channels=cfg.n_channels,
                n_samples=n_samples,
                channel_names=channel_names,
                label_names=label_names,
            )
            flags = [{"distracted": bool(d)} for d in distracted]
            recs.append(
                Recording(manifest=manifest, data=data, labels=labels, epoch_flags=flags)
            )
    return recs


def write_dataset(recs: list[Recording], root: str | Path) -> list[Path]:
    """Write recordings under <root>/<dataset>/<subject>/<session>/."""
    paths = []
    for rec in recs:
        m = rec.manifest
        d = session_dir(root, m.dataset_id, m.subject_id, m.session_id)
        write_recording(rec, d)
        paths.append(d)
    return paths


def write_epochs(epochs: EpochSet, out_dir: str | Path, dataset_id: str = "epochs") -> None:
    """Persist an EpochSet in EEGB layout (one 'trial' per epoch).

    The manifest carries window_sec / source_trial / role so the set can be
    reloaded losslessly apart from the float32 sample quantization.
    """
    n = len(epochs)
    if n == 0:
        raise InvalidRecording("cannot persist an empty EpochSet")
    manifest = Manifest(
        dataset_id=dataset_id,
        subject_id=epochs.subject_id,
        session_id=epochs.session_id,
        fs_hz=epochs.fs_hz,
        n_trials=n,
        n_channels=epochs.n_channels,
        n_samples=epochs.n_samples,
        channel_names=list(epochs.channel_names),
        label_names=list(epochs.label_names),
        metadata={
            "kind": "epochs",
            "window_sec": epochs.window_sec,
            "source_trial": [int(i) for i in epochs.source_trial],
            "role": epochs.role,
        },
    )
    rec = Recording(
        manifest=manifest,
        data=epochs.data,
        labels=epochs.labels,
        epoch_flags=epochs.epoch_flags,
    )
    write_recording(rec, out_dir)


def read_epochs(in_dir: str | Path) -> EpochSet:
    """Load an EpochSet persisted by write_epochs."""
    rec = read_recording(in_dir)
    meta = rec.manifest.metadata
    if meta.get("kind") != "epochs":
        raise ManifestError(
            f"{in_dir} holds a raw recording, not epochs; run preprocessing first"
        )
    return EpochSet(
        data=rec.data,
        labels=rec.labels,
        subject_id=rec.manifest.subject_id,
        session_id=rec.manifest.session_id,
        fs_hz=rec.manifest.fs_hz,
        window_sec=float(meta["window_sec"]),
        source_trial=np.asarray(meta["source_trial"], dtype=np.int64),
        channel_names=list(rec.manifest.channel_names),
        label_names=list(rec.manifest.label_names),
        epoch_flags=rec.epoch_flags,
        role=str(meta.get("role", "train")),
    )


__all__ = [
    "EegbError",
    "InvalidRecording",
    "ManifestError",
    "SizeMismatch",
    "LabelRange",
    "InvalidConfig",
    "Manifest",
    "Recording",
    "EpochSet",
    "SynthConfig",
    "write_recording",
    "read_recording",
    "read_manifest",
    "session_dir",
    "synth_dataset",
    "write_dataset",
    "write_epochs",
    "read_epochs",
]
