"""Exporter tests.

Offline tests drive the export pipeline with fake loaders shaped like the
MOABB output and validate the written trees with the consumer package's
reader (statefilter), which is the authoritative check that the format
contract holds.  Network-dependent MOABB downloads are separate and skipped
when moabb is not installed.
"""

import importlib.util
import json

import numpy as np
import pytest

from moabb_export import (
    DESCRIPTORS,
    ExportSpec,
    UnsupportedDataset,
    export,
)
from moabb_export.cli import main
from moabb_export.eegb import ExportFormatError, SessionData, write_session

from statefilter.eegio import read_recording

HAVE_MOABB = importlib.util.find_spec("moabb") is not None


def fake_session(descriptor, n_trials=8, fs=250.0, seed=0):
    rng = np.random.default_rng(seed)
    n_channels = descriptor.expected_channels
    names = [f"EEG{i}" for i in range(n_channels)]
    labels = [descriptor.label_names[i % len(descriptor.label_names)] for i in range(n_trials)]
    return {
        "fs_hz": fs,
        "channel_names": names,
        "trials": rng.standard_normal((n_trials, n_channels, 100)),
        "event_names": labels,
        "metadata": {"source": "fake"},
    }


def fake_loader(n_subjects, n_sessions):
    def loader(descriptor, subjects):
        wanted = subjects or list(range(1, n_subjects + 1))
        for subject in wanted:
            yield subject, [
                fake_session(descriptor, seed=100 * subject + s) for s in range(n_sessions)
            ]

    return loader


class TestExportStructure:
    def test_bnci_restricted_to_two_sessions(self, tmp_path):
        # the fake benchmark has five sessions; only the first two may ship
        spec = ExportSpec(dataset="bnci2014004", output_root=tmp_path)
        written = export(spec, loader=fake_loader(n_subjects=2, n_sessions=5))
        assert len(written) == 2 * 2
        for subject in ("1", "2"):
            sessions = sorted(p.name for p in (tmp_path / "bnci2014004" / subject).iterdir())
            assert sessions == ["0", "1"]

    def test_zhou_keeps_all_three_sessions(self, tmp_path):
        spec = ExportSpec(dataset="zhou2016", output_root=tmp_path)
        written = export(spec, loader=fake_loader(n_subjects=1, n_sessions=3))
        assert len(written) == 3

    def test_label_name_sets(self, tmp_path):
        for dataset, expected in (
            ("bnci2014004", ["left_hand", "right_hand"]),
            ("zhou2016", ["left_hand", "right_hand", "feet"]),
        ):
            spec = ExportSpec(dataset=dataset, output_root=tmp_path / dataset)
            export(spec, loader=fake_loader(1, 3))
            manifest = json.loads(
                (tmp_path / dataset / dataset / "1" / "0" / "manifest.json").read_text()
            )
            assert manifest["label_names"] == expected

    def test_subject_and_session_filters(self, tmp_path):
        spec = ExportSpec(
            dataset="zhou2016", output_root=tmp_path, subjects=[2], sessions=[1]
        )
        written = export(spec, loader=fake_loader(4, 3))
        assert len(written) == 1
        assert written[0] == tmp_path / "zhou2016" / "2" / "1"

    def test_unsupported_dataset(self, tmp_path):
        with pytest.raises(UnsupportedDataset):
            export(ExportSpec(dataset="physionet", output_root=tmp_path))

    def test_unknown_event_name_rejected(self, tmp_path):
        def loader(descriptor, subjects):
            raw = fake_session(descriptor)
            raw["event_names"] = ["tongue"] * len(raw["event_names"])
            yield 1, [raw]

        from moabb_export.datasets import DownloadError

        with pytest.raises(DownloadError):
            export(ExportSpec(dataset="zhou2016", output_root=tmp_path), loader=loader)


class TestFormatContract:
    def test_exported_sessions_pass_consumer_validation(self, tmp_path):
        spec = ExportSpec(dataset="bnci2014004", output_root=tmp_path)
        written = export(spec, loader=fake_loader(2, 3))
        for session_dir in written:
            rec = read_recording(session_dir)  # raises on any format violation
            assert rec.manifest.dataset_id == "bnci2014004"
            assert rec.manifest.n_channels == 3
            assert rec.manifest.fs_hz == 250.0

    def test_byte_sizes_exact(self, tmp_path):
        spec = ExportSpec(dataset="zhou2016", output_root=tmp_path)
        (first, *_) = export(spec, loader=fake_loader(1, 3))
        manifest = json.loads((first / "manifest.json").read_text())
        data_size = (first / "data.bin").stat().st_size
        labels_size = (first / "labels.bin").stat().st_size
        assert data_size == 4 * manifest["n_trials"] * manifest["n_channels"] * manifest["n_samples"]
        assert labels_size == 4 * manifest["n_trials"]

    def test_tensor_roundtrip_exact(self, tmp_path):
        descriptor = DESCRIPTORS["zhou2016"]
        raw = fake_session(descriptor, seed=7)
        session = SessionData(
            dataset_id="zhou2016",
            subject_id="1",
            session_id="0",
            fs_hz=raw["fs_hz"],
            channel_names=raw["channel_names"],
            label_names=list(descriptor.label_names),
            trials=raw["trials"],
            labels=np.zeros(len(raw["trials"]), dtype=np.int32),
        )
        out = write_session(session, tmp_path / "s")
        rec = read_recording(out)
        assert rec.data.tobytes() == raw["trials"].astype("<f4").tobytes()

    def test_writer_rejects_bad_sessions(self, tmp_path):
        descriptor = DESCRIPTORS["bnci2014004"]
        raw = fake_session(descriptor)
        bad = SessionData(
            dataset_id="x",
            subject_id="1",
            session_id="0",
            fs_hz=250.0,
            channel_names=raw["channel_names"][:-1],  # wrong count
            label_names=["a"],
            trials=raw["trials"],
            labels=np.zeros(len(raw["trials"]), dtype=np.int32),
        )
        with pytest.raises(ExportFormatError):
            write_session(bad, tmp_path)


class TestCli:
    def test_missing_moabb_exits_cleanly(self, tmp_path, capsys):
        if HAVE_MOABB:
            pytest.skip("moabb installed; the offline failure path is not reachable")
        rc = main(["--dataset", "bnci2014004", "--out", str(tmp_path)])
        # no moabb in the test environment -> clean failure, not a traceback
        assert rc == 2
        assert "moabb" in capsys.readouterr().err.lower()

    def test_bad_dataset_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["--dataset", "nope", "--out", str(tmp_path)])


@pytest.mark.skipif(not HAVE_MOABB, reason="moabb not installed (network extra)")
class TestNetworkIntegrity:
    """Benchmark-scale integrity checks; requires network or a MOABB cache."""

    def test_benchmark_subject_counts(self):
        import moabb.datasets as md

        for dataset_id, descriptor in DESCRIPTORS.items():
            cls = getattr(md, descriptor.moabb_class, None) or getattr(
                md, descriptor.moabb_class.replace("_", "")
            )
            assert len(cls().subject_list) == descriptor.expected_subjects

    def test_bnci2014004_shape(self, tmp_path):
        spec = ExportSpec(dataset="bnci2014004", output_root=tmp_path, subjects=[1])
        written = export(spec)
        assert len(written) == 2
        for session_dir in written:
            rec = read_recording(session_dir)
            assert rec.manifest.fs_hz == 250.0
            assert rec.manifest.n_channels == 3
            assert rec.manifest.n_trials == 120

    def test_zhou2016_shape(self, tmp_path):
        spec = ExportSpec(dataset="zhou2016", output_root=tmp_path, subjects=[1])
        written = export(spec)
        assert len(written) == 3
        for session_dir in written:
            rec = read_recording(session_dir)
            assert rec.manifest.n_channels == 14
            assert rec.manifest.n_trials == 160

    def test_bnci2014004_directional_sanity(self, tmp_path):
        """Non-inferiority of the filtered pipeline with the linear reference
        decoder: proposed mean accuracy >= baseline - 0.5pp across subjects."""
        from statefilter import evaluate as ev

        spec = ExportSpec(dataset="bnci2014004", output_root=tmp_path)
        export(spec)
        cfg = ev.ExperimentConfig(
            dataset_root=str(tmp_path / "bnci2014004"),
            subjects=[str(s) for s in range(1, 10)],
            train_session="0",
            test_sessions=["1"],
            seeds=[0, 1, 2],
        )
        report = ev.run_protocol(cfg)
        gap = report.method_mean["proposed"] - report.method_mean["baseline"]
        assert gap >= -0.005
