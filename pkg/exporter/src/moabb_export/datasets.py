"""Benchmark descriptors and the export pipeline.

Two MOABB motor-imagery benchmarks are supported:

* ``bnci2014004`` (BCI Competition IV-2b): 9 subjects, left/right hand,
  3 channels (C3, Cz, C4) at 250 Hz.  Only the first two sessions are
  exported; the later ones included visual feedback.
* ``zhou2016``: 4 subjects, left hand / right hand / feet, 14 channels at
  250 Hz, 3 sessions, 160 trials each.

Trials are exported untouched (no filtering, no resampling) at the
benchmark's standard cue-relative window; all preprocessing belongs to the
consumer.  The MOABB/MNE machinery is imported lazily so the package works
offline with an injected loader.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .eegb import SessionData, write_session


class ExportError(Exception):
    """Base class for export failures."""


class UnsupportedDataset(ExportError):
    """Requested dataset id is not one of the supported benchmarks."""


class DownloadError(ExportError):
    """MOABB could not fetch or parse the requested data."""


@dataclass(frozen=True)
class DatasetDescriptor:
    """Static facts about one supported benchmark."""

    dataset_id: str
    moabb_class: str
    label_names: tuple[str, ...]  # fixed label index order
    keep_first_sessions: int | None  # None = keep all
    expected_fs: float
    expected_channels: int
    expected_subjects: int


DESCRIPTORS = {
    "bnci2014004": DatasetDescriptor(
        dataset_id="bnci2014004",
        moabb_class="BNCI2014_004",
        label_names=("left_hand", "right_hand"),
        keep_first_sessions=2,  # later sessions add visual feedback
        expected_fs=250.0,
        expected_channels=3,
        expected_subjects=9,
    ),
    "zhou2016": DatasetDescriptor(
        dataset_id="zhou2016",
        moabb_class="Zhou2016",
        label_names=("left_hand", "right_hand", "feet"),
        keep_first_sessions=None,
        expected_fs=250.0,
        expected_channels=14,
        expected_subjects=4,
    ),
}


@dataclass
class ExportSpec:
    """What to export and where."""

    dataset: str
    output_root: str | Path
    subjects: list[int] | None = None  # benchmark subject numbers, 1-based
    sessions: list[int] | None = None  # exported session indices, 0-based

    def descriptor(self) -> DatasetDescriptor:
        try:
            return DESCRIPTORS[self.dataset]
        except KeyError:
            raise UnsupportedDataset(
                f"dataset {self.dataset!r}; supported: {sorted(DESCRIPTORS)}"
            ) from None


# A loader yields (subject_number, ordered list of raw sessions); each raw
# session is a dict with: fs_hz, channel_names, trials [t][c][s], event_names
# (one per trial, matching the benchmark vocabulary), metadata.
Loader = Callable[[DatasetDescriptor, "list[int] | None"], Iterator[tuple[int, list[dict]]]]


def _label_indices(event_names: list[str], descriptor: DatasetDescriptor) -> np.ndarray:
    try:
        return np.array(
            [descriptor.label_names.index(name) for name in event_names], dtype=np.int32
        )
    except ValueError as exc:
        raise DownloadError(
            f"unexpected event name in {descriptor.dataset_id}: {exc}"
        ) from exc


def export(spec: ExportSpec, loader: Loader | None = None) -> list[Path]:
    """Export sessions to <output_root>/<dataset>/<subject>/<session>/.

    Returns the written session directories.  ``loader`` defaults to the
    MOABB-backed one and exists so tests can run without network access.
    """
    descriptor = spec.descriptor()
    loader = loader or moabb_loader
    written: list[Path] = []
    for subject, sessions in loader(descriptor, spec.subjects):
        if descriptor.keep_first_sessions is not None:
            sessions = sessions[: descriptor.keep_first_sessions]
        for index, raw in enumerate(sessions):
            if spec.sessions is not None and index not in spec.sessions:
                continue
            session = SessionData(
                dataset_id=descriptor.dataset_id,
                subject_id=str(subject),
                session_id=str(index),
                fs_hz=float(raw["fs_hz"]),
                channel_names=list(raw["channel_names"]),
                label_names=list(descriptor.label_names),
                trials=np.asarray(raw["trials"]),
                labels=_label_indices(raw["event_names"], descriptor),
                metadata=dict(raw.get("metadata", {})),
            )
            out = (
                Path(spec.output_root)
                / descriptor.dataset_id
                / session.subject_id
                / session.session_id
            )
            written.append(write_session(session, out))
    if not written:
        raise ExportError("nothing exported; check subject/session filters")
    return written


def _fetch_with_retries(dataset, subjects, attempts: int = 3, base_delay: float = 2.0):
    """dataset.get_data with bounded backoff; flaky mirrors are common."""
    import time

    last = None
    for attempt in range(attempts):
        try:
            return dataset.get_data(subjects=subjects)
        except Exception as exc:  # moabb surfaces many download error types
            last = exc
            if attempt + 1 < attempts:
                time.sleep(base_delay * 2**attempt)
    raise DownloadError(f"MOABB fetch failed after {attempts} attempts: {last}") from last


def moabb_loader(
    descriptor: DatasetDescriptor, subjects: list[int] | None
) -> Iterator[tuple[int, list[dict]]]:
    """Fetch raw sessions through MOABB, epoching at the benchmark interval.

    Requires the 'moabb' extra (moabb + mne) and network or a warmed MOABB
    cache.
    """
    try:
        import mne
        import moabb.datasets as moabb_datasets
    except ImportError as exc:
        raise DownloadError(
            "MOABB support not installed; pip install 'moabb-export[moabb]'"
        ) from exc
    mne.set_log_level("ERROR")
    cls = getattr(moabb_datasets, descriptor.moabb_class, None)
    if cls is None:  # older moabb spells BNCI2014_004 as BNCI2014004
        cls = getattr(moabb_datasets, descriptor.moabb_class.replace("_", ""))
    dataset = cls()
    wanted = subjects or list(dataset.subject_list)
    code_to_name = {code: name for name, code in dataset.event_id.items()}
    tmin, tmax = dataset.interval
    data = _fetch_with_retries(dataset, wanted)
    for subject in wanted:
        sessions = []
        for _, runs in sorted(data[subject].items()):
            trials, names, fs, ch_names = [], [], None, None
            for _, raw in sorted(runs.items()):
                picks = mne.pick_types(raw.info, eeg=True)
                fs = float(raw.info["sfreq"])
                ch_names = [raw.ch_names[i] for i in picks]
                try:
                    events, _ = mne.events_from_annotations(
                        raw, event_id=dataset.event_id, verbose="ERROR"
                    )
                except ValueError:
                    events = mne.find_events(raw, shortest_event=0, verbose="ERROR")
                    events = events[np.isin(events[:, 2], list(code_to_name))]
                n_samples = int(round((tmax - tmin) * fs))
                signal = raw.get_data(picks=picks)
                for onset, _, code in events:
                    if code not in code_to_name:
                        continue
                    start = onset + int(round(tmin * fs))
                    stop = start + n_samples
                    if start < 0 or stop > signal.shape[1]:
                        continue
                    trials.append(signal[:, start:stop])
                    names.append(code_to_name[code])
            if not trials:
                continue
            sessions.append(
                {
                    "fs_hz": fs,
                    "channel_names": ch_names,
                    "trials": np.stack(trials),
                    "event_names": names,
                    "metadata": {
                        "source": "moabb",
                        "moabb_dataset": type(dataset).__name__,
                        "interval_sec": [tmin, tmax],
                    },
                }
            )
        yield subject, sessions
