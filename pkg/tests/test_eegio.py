"""EEGB v1 format and synthetic generator tests."""

import json

import numpy as np
import pytest

from statefilter import eegio
from statefilter.dsp import segment_epochs
from statefilter.attention import attention_index


def tiny_recording(n_trials=3, n_channels=2, n_samples=8, seed=0):
    rng = np.random.default_rng(seed)
    manifest = eegio.Manifest(
        dataset_id="test",
        subject_id="s01",
        session_id="0",
        fs_hz=250.0,
        n_trials=n_trials,
        n_channels=n_channels,
        n_samples=n_samples,
        channel_names=[f"ch{i}" for i in range(n_channels)],
        label_names=["a", "b"],
    )
    data = rng.standard_normal((n_trials, n_channels, n_samples))
    labels = rng.integers(0, 2, size=n_trials)
    flags = [{"distracted": bool(i % 2)} for i in range(n_trials)]
    return eegio.Recording(manifest=manifest, data=data, labels=labels, epoch_flags=flags)


class TestRoundtrip:
    def test_write_read_identity(self, tmp_path):
        rec = tiny_recording()
        eegio.write_recording(rec, tmp_path)
        back = eegio.read_recording(tmp_path)
        assert back.equals(rec)

    def test_known_byte_encoding(self, tmp_path):
        manifest = eegio.Manifest(
            dataset_id="test",
            subject_id="s",
            session_id="0",
            fs_hz=250.0,
            n_trials=1,
            n_channels=1,
            n_samples=2,
            channel_names=["c"],
            label_names=["x"],
        )
        rec = eegio.Recording(
            manifest=manifest, data=[[[1.0, -2.5]]], labels=[0]
        )
        eegio.write_recording(rec, tmp_path)
        raw = (tmp_path / "data.bin").read_bytes()
        assert raw == bytes.fromhex("0000803f000020c0")
        assert (tmp_path / "labels.bin").read_bytes() == b"\x00\x00\x00\x00"

    def test_no_header_exact_size(self, tmp_path):
        rec = tiny_recording(n_trials=5, n_channels=3, n_samples=7)
        eegio.write_recording(rec, tmp_path)
        assert (tmp_path / "data.bin").stat().st_size == 4 * 5 * 3 * 7
        assert (tmp_path / "labels.bin").stat().st_size == 4 * 5

    def test_unwritable_path_raises_oserror(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            eegio.write_recording(tiny_recording(), blocker / "sub")


class TestValidation:
    def test_nan_sample_rejected(self):
        rec = tiny_recording()
        data = rec.data.copy()
        data[0, 0, 0] = np.nan
        with pytest.raises(eegio.InvalidRecording):
            eegio.Recording(manifest=rec.manifest, data=data, labels=rec.labels)

    def test_truncated_data_file(self, tmp_path):
        rec = tiny_recording()
        eegio.write_recording(rec, tmp_path)
        raw = (tmp_path / "data.bin").read_bytes()
        (tmp_path / "data.bin").write_bytes(raw[:-4])
        with pytest.raises(eegio.SizeMismatch):
            eegio.read_recording(tmp_path)

    def test_label_out_of_range(self, tmp_path):
        rec = tiny_recording()
        eegio.write_recording(rec, tmp_path)
        bad = np.array([7, 0, 0], dtype="<i4")
        (tmp_path / "labels.bin").write_bytes(bad.tobytes())
        with pytest.raises(eegio.LabelRange):
            eegio.read_recording(tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(eegio.ManifestError):
            eegio.read_recording(tmp_path)

    def test_missing_manifest_field(self, tmp_path):
        rec = tiny_recording()
        eegio.write_recording(rec, tmp_path)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        del doc["fs_hz"]
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(eegio.ManifestError):
            eegio.read_recording(tmp_path)

    def test_channel_name_count_mismatch(self, tmp_path):
        rec = tiny_recording()
        eegio.write_recording(rec, tmp_path)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        doc["channel_names"] = ["only_one"]
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(eegio.ManifestError):
            eegio.read_recording(tmp_path)


class TestSynth:
    def test_distract_frac_zero_all_attentive(self):
        cfg = eegio.SynthConfig(
            n_subjects=1, n_sessions=1, n_trials=10, distract_frac=0.0, seed=3
        )
        (rec,) = eegio.synth_dataset(cfg)
        assert all(not f["distracted"] for f in rec.epoch_flags)

    def test_determinism_byte_identical(self, tmp_path):
        cfg = eegio.SynthConfig(n_subjects=1, n_sessions=1, n_trials=6, seed=11)
        a, b = tmp_path / "a", tmp_path / "b"
        eegio.write_dataset(eegio.synth_dataset(cfg), a)
        eegio.write_dataset(eegio.synth_dataset(cfg), b)
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

    def test_labels_balanced(self):
        for n_trials in (10, 11):
            cfg = eegio.SynthConfig(
                n_subjects=1, n_sessions=1, n_trials=n_trials, seed=5
            )
            (rec,) = eegio.synth_dataset(cfg)
            counts = np.bincount(rec.labels, minlength=2)
            assert abs(int(counts[0]) - int(counts[1])) <= 1

    def test_distracted_count(self):
        cfg = eegio.SynthConfig(n_subjects=1, n_sessions=1, n_trials=80, seed=2)
        (rec,) = eegio.synth_dataset(cfg)
        n_dist = sum(f["distracted"] for f in rec.epoch_flags)
        assert n_dist == round(0.3 * 80)

    def test_bad_config_rejected(self):
        with pytest.raises(eegio.InvalidConfig):
            eegio.synth_dataset(eegio.SynthConfig(distract_frac=1.5))
        with pytest.raises(eegio.InvalidConfig):
            eegio.synth_dataset(eegio.SynthConfig(n_channels=1))
        with pytest.raises(eegio.InvalidConfig):
            eegio.synth_dataset(eegio.SynthConfig(fs_hz=15.0))

    def test_attention_separation(self):
        """Distracted epochs dominate attentive ones in alpha/theta ratio."""
        cfg = eegio.SynthConfig(n_subjects=1, n_sessions=1, seed=0)
        (rec,) = eegio.synth_dataset(cfg)
        epochs = segment_epochs(rec, 2.0)
        atr = attention_index(epochs)
        distracted = np.array([f["distracted"] for f in epochs.epoch_flags])
        assert atr[distracted].mean() >= 3.0 * atr[~distracted].mean()
        # Mann-Whitney U with normal approximation; complete separation expected
        n1, n2 = int(distracted.sum()), int((~distracted).sum())
        ranks = atr.argsort().argsort() + 1
        u = ranks[distracted].sum() - n1 * (n1 + 1) / 2
        mean_u = n1 * n2 / 2
        sd_u = np.sqrt(n1 * n2 * (n1 + n2 + 1) / 12)
        z = (u - mean_u) / sd_u
        # one-sided p < 0.01 corresponds to z > 2.33
        assert z > 2.33


class TestEpochsIo:
    def test_roundtrip(self, tmp_path):
        rec = tiny_recording(n_trials=4, n_samples=500)
        epochs = segment_epochs(rec, 1.0)
        eegio.write_epochs(epochs, tmp_path)
        back = eegio.read_epochs(tmp_path)
        assert np.array_equal(back.labels, epochs.labels)
        assert np.array_equal(back.source_trial, epochs.source_trial)
        assert back.window_sec == epochs.window_sec
        assert np.allclose(back.data, epochs.data, atol=1e-6)

    def test_raw_directory_rejected(self, tmp_path):
        rec = tiny_recording()
        eegio.write_recording(rec, tmp_path)
        with pytest.raises(eegio.ManifestError):
            eegio.read_epochs(tmp_path)
