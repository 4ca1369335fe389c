"""Minimal EEGB v1 writer.

One directory per session: manifest.json (UTF-8 JSON), data.bin
(little-endian float32, trial-major [trial][channel][sample], no header),
labels.bin (little-endian int32, one per trial).  This mirrors the consumer's
published format so exported trees can be read back by any EEGB reader.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class ExportFormatError(Exception):
    """Session content violates the EEGB v1 invariants."""


@dataclass
class SessionData:
    """One exported session: raw trials plus the metadata the manifest needs."""

    dataset_id: str
    subject_id: str
    session_id: str
    fs_hz: float
    channel_names: list[str]
    label_names: list[str]
    trials: np.ndarray  # [trial][channel][sample]
    labels: np.ndarray  # [trial]
    metadata: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.trials.ndim != 3:
            raise ExportFormatError(f"trials must be 3-D, got {self.trials.shape}")
        n_trials, n_channels, n_samples = self.trials.shape
        if min(n_trials, n_channels, n_samples) < 1:
            raise ExportFormatError(f"empty session {self.trials.shape}")
        if len(self.channel_names) != n_channels:
            raise ExportFormatError(
                f"{len(self.channel_names)} channel names for {n_channels} channels"
            )
        if self.labels.shape != (n_trials,):
            raise ExportFormatError("labels length != trial count")
        if not np.all(np.isfinite(self.trials)):
            raise ExportFormatError("non-finite samples")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.label_names)
        ):
            raise ExportFormatError("label index outside [0, n_classes)")
        if not self.fs_hz > 0:
            raise ExportFormatError(f"bad sampling rate {self.fs_hz}")


def write_session(session: SessionData, out_dir: str | Path) -> Path:
    """Write one session directory; returns its path."""
    session.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_trials, n_channels, n_samples = session.trials.shape
    manifest = {
        "format_version": FORMAT_VERSION,
        "dataset_id": session.dataset_id,
        "subject_id": session.subject_id,
        "session_id": session.session_id,
        "fs_hz": float(session.fs_hz),
        "n_trials": int(n_trials),
        "n_channels": int(n_channels),
        "n_samples": int(n_samples),
        "channel_names": list(session.channel_names),
        "label_names": list(session.label_names),
        "data_file": "data.bin",
        "labels_file": "labels.bin",
    }
    if session.metadata:
        manifest["metadata"] = session.metadata
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "data.bin").write_bytes(
        np.ascontiguousarray(session.trials, dtype="<f4").tobytes()
    )
    (out / "labels.bin").write_bytes(
        np.ascontiguousarray(session.labels, dtype="<i4").tobytes()
    )
    return out
