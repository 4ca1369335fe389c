"""Attention index, Tukey fencing, and fence-multiplier search tests.

The brute-force fence oracle below re-implements the textbook definition
(sort, interpolate quartiles at h=(n-1)p, fence, compare) without numpy
quantile calls, pinning down the quantile convention independently.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statefilter import attention as att
from statefilter import dsp, eegio


def oracle_quantile(values, p):
    xs = sorted(values)
    h = (len(xs) - 1) * p
    lo = int(np.floor(h))
    if lo == len(xs) - 1:
        return xs[-1]
    return xs[lo] + (h - lo) * (xs[lo + 1] - xs[lo])


def oracle_fence_mask(values, k):
    q1 = oracle_quantile(values, 0.25)
    q3 = oracle_quantile(values, 0.75)
    fence = q3 + k * (q3 - q1)
    return [1 if v <= fence else 0 for v in values]


def epochs_from_signals(signals, fs=250.0, labels=None, flags=None, source=None):
    """EpochSet straight from an (epoch, channel, sample) array."""
    signals = np.asarray(signals, dtype=np.float64)
    n = signals.shape[0]
    return eegio.EpochSet(
        data=signals,
        labels=np.zeros(n, dtype=int) if labels is None else np.asarray(labels),
        subject_id="s",
        session_id="0",
        fs_hz=fs,
        window_sec=signals.shape[-1] / fs,
        source_trial=np.arange(n) if source is None else np.asarray(source),
        channel_names=[f"ch{i}" for i in range(signals.shape[1])],
        label_names=["a", "b"],
        epoch_flags=flags,
    )


class TestAttentionIndex:
    def test_equal_amplitude_ratio_one(self):
        t = np.arange(500) / 250.0
        x = np.sin(2 * np.pi * 10 * t) + np.sin(2 * np.pi * 6 * t)
        atr = att.attention_index(epochs_from_signals(x[np.newaxis, np.newaxis, :]))
        assert atr[0] == pytest.approx(1.0, rel=1e-6)

    def test_energy_scales_quadratically(self):
        t = np.arange(500) / 250.0
        x = 2 * np.sin(2 * np.pi * 10 * t) + np.sin(2 * np.pi * 6 * t)
        atr = att.attention_index(epochs_from_signals(x[np.newaxis, np.newaxis, :]))
        assert atr[0] == pytest.approx(4.0, rel=1e-6)

    def test_theta_free_epoch_degenerate(self):
        t = np.arange(500) / 250.0
        x = np.sin(2 * np.pi * 10 * t)
        with pytest.raises(att.DegenerateSpectrum):
            att.attention_index(epochs_from_signals(x[np.newaxis, np.newaxis, :]))

    def test_channels_summed_before_ratio(self):
        t = np.arange(500) / 250.0
        # channel 0 carries alpha, channel 1 carries theta; ratio of sums = 1
        sig = np.stack([np.sin(2 * np.pi * 10 * t), np.sin(2 * np.pi * 6 * t)])
        atr = att.attention_index(epochs_from_signals(sig[np.newaxis]))
        assert atr[0] == pytest.approx(1.0, rel=1e-6)

    @given(st.floats(min_value=0.1, max_value=100.0))
    @settings(max_examples=20, deadline=None)
    def test_scale_invariance(self, c):
        rng = np.random.default_rng(4)
        sig = rng.standard_normal((5, 2, 500))
        base = att.attention_index(epochs_from_signals(sig))
        scaled = att.attention_index(epochs_from_signals(c * sig))
        assert np.max(np.abs(scaled - base)) <= 1e-9 * np.max(np.abs(base))


class TestQuantile:
    def test_hand_examples(self):
        xs = [1.0, 2.0, 3.0, 4.0, 100.0]
        assert att.quantile(xs, 0.25) == pytest.approx(2.0)
        assert att.quantile(xs, 0.75) == pytest.approx(4.0)
        assert att.quantile([7.0], 0.3) == 7.0
        assert att.quantile([0.0, 1.0, 2.0, 3.0], 0.75) == pytest.approx(2.25)

    def test_empty_rejected(self):
        with pytest.raises(att.EmptyInput):
            att.quantile([], 0.5)

    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=30),
        st.floats(0.0, 1.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_matches_oracle(self, xs, p):
        assert att.quantile(xs, p) == pytest.approx(oracle_quantile(xs, p), abs=1e-9)


class TestTukeyMask:
    def test_hand_example(self):
        profile = att.tukey_mask(np.array([1.0, 2.0, 3.0, 4.0, 100.0]), 1.5)
        assert profile.q1 == pytest.approx(2.0)
        assert profile.q3 == pytest.approx(4.0)
        assert profile.fence_upper == pytest.approx(7.0)
        assert profile.mask.tolist() == [True, True, True, True, False]
        assert profile.n_kept == 4
        assert profile.n_total == 5

    def test_constant_vector_all_kept(self):
        profile = att.tukey_mask(np.full(7, 3.3), 1.5)
        assert profile.fence_upper == pytest.approx(3.3)
        assert profile.n_kept == 7

    def test_small_example_all_kept(self):
        profile = att.tukey_mask(np.array([0.0, 1.0, 2.0, 3.0]), 1.0)
        assert profile.fence_upper == pytest.approx(3.75)
        assert profile.n_kept == 4

    def test_against_brute_force_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(300):
            n = rng.integers(1, 13)
            xs = rng.uniform(-10, 10, size=n)
            k = rng.uniform(0, 4)
            profile = att.tukey_mask(xs, k)
            assert profile.mask.astype(int).tolist() == oracle_fence_mask(xs, k)

    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40),
        st.floats(0, 5),
        st.floats(0, 5),
    )
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_k(self, xs, k1, k2):
        lo, hi = sorted((k1, k2))
        m_lo = att.tukey_mask(np.array(xs), lo).mask
        m_hi = att.tukey_mask(np.array(xs), hi).mask
        assert np.all(m_lo <= m_hi)

    def test_never_empty(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            xs = rng.standard_normal(rng.integers(1, 20))
            assert att.tukey_mask(xs, 0.0).n_kept >= 1

    def test_q3_always_kept(self):
        rng = np.random.default_rng(29)
        xs = rng.standard_normal(30)
        q3 = att.quantile(xs, 0.75)
        for k in (0.0, 0.5, 2.0):
            profile = att.tukey_mask(xs, k)
            assert np.all(profile.mask[xs <= q3])

    def test_profile_json_roundtrip(self, tmp_path):
        profile = att.tukey_mask(np.array([1.0, 5.0, 2.0, 80.0]), 1.5)
        path = tmp_path / "attention.json"
        profile.save(path)
        back = att.AttentionProfile.load(path)
        assert np.array_equal(back.mask, profile.mask)
        assert np.array_equal(back.atr, profile.atr)
        assert back.fence_upper == profile.fence_upper


class TestApplyMask:
    def make(self, n=4):
        rng = np.random.default_rng(1)
        return epochs_from_signals(rng.standard_normal((n, 2, 100)))

    def test_identity_mask(self):
        epochs = self.make()
        profile = att.tukey_mask(np.ones(4), 1.0)
        out = att.apply_mask(epochs, profile)
        assert len(out) == 4
        assert np.array_equal(out.data, epochs.data)

    def test_selects_in_order(self):
        epochs = self.make(3)
        profile = att.AttentionProfile(
            atr=np.array([1.0, 9.0, 1.0]),
            q1=1.0,
            q3=1.0,
            k=0.0,
            fence_upper=1.0,
            mask=np.array([True, False, True]),
            n_kept=2,
            n_total=3,
        )
        out = att.apply_mask(epochs, profile)
        assert len(out) == 2
        assert np.array_equal(out.data[0], epochs.data[0])
        assert np.array_equal(out.data[1], epochs.data[2])

    def test_length_mismatch(self):
        epochs = self.make(4)
        profile = att.tukey_mask(np.ones(5), 1.0)
        with pytest.raises(att.LengthMismatch):
            att.apply_mask(epochs, profile)

    def test_refuses_test_role(self):
        epochs = self.make(4)
        epochs.role = "test"
        profile = att.tukey_mask(np.ones(4), 1.0)
        with pytest.raises(att.EvaluationDataLeak):
            att.apply_mask(epochs, profile)


class TestTrialUnit:
    def test_trial_mask_moves_whole_trials(self):
        t = np.arange(500) / 250.0
        calm = np.sin(2 * np.pi * 10 * t) + np.sin(2 * np.pi * 6 * t)
        loud = 6 * np.sin(2 * np.pi * 10 * t) + 0.5 * np.sin(2 * np.pi * 6 * t)
        sig = np.stack([calm, calm, calm, calm, calm, calm, loud, loud])
        epochs = epochs_from_signals(
            sig[:, np.newaxis, :], source=[0, 0, 1, 1, 2, 2, 3, 3]
        )
        profile = att.build_profile(epochs, 0.0, unit="trial")
        assert profile.mask.tolist() == [True] * 6 + [False] * 2
        # per-window atr equals its trial mean
        assert profile.atr[0] == pytest.approx(profile.atr[1])


class TestSplitTrials:
    def make_epochs(self, n_trials=10, windows=2):
        rng = np.random.default_rng(3)
        n = n_trials * windows
        labels = np.repeat(np.arange(n_trials) % 2, windows)
        source = np.repeat(np.arange(n_trials), windows)
        return epochs_from_signals(
            rng.standard_normal((n, 2, 100)), labels=labels, source=source
        )

    def test_trials_stay_together(self):
        epochs = self.make_epochs()
        fit_idx, val_idx = att.split_trials(epochs, 0.2, seed=5)
        fit_trials = set(epochs.source_trial[fit_idx].tolist())
        val_trials = set(epochs.source_trial[val_idx].tolist())
        assert fit_trials.isdisjoint(val_trials)
        assert len(fit_idx) + len(val_idx) == len(epochs)

    def test_stratified_both_classes(self):
        epochs = self.make_epochs()
        fit_idx, val_idx = att.split_trials(epochs, 0.2, seed=5)
        assert set(epochs.labels[fit_idx].tolist()) == {0, 1}
        assert set(epochs.labels[val_idx].tolist()) == {0, 1}

    def test_single_trial_class_rejected(self):
        epochs = epochs_from_signals(
            np.random.default_rng(0).standard_normal((3, 2, 100)),
            labels=[0, 1, 1],
            source=[0, 1, 2],
        )
        with pytest.raises(att.InsufficientData):
            att.split_trials(epochs, 0.2, seed=0)


class TestSelectK:
    def make_epochs(self):
        rng = np.random.default_rng(8)
        n_trials = 10
        labels = np.repeat(np.arange(n_trials) % 2, 2)
        source = np.repeat(np.arange(n_trials), 2)
        sig = rng.standard_normal((n_trials * 2, 2, 500))
        # give every epoch some theta so the index is defined
        t = np.arange(500) / 250.0
        sig += 0.5 * np.sin(2 * np.pi * 6 * t)
        return epochs_from_signals(sig, labels=labels, source=source)

    def test_singleton_grid(self):
        epochs = self.make_epochs()
        result = att.select_k(
            epochs,
            grid=[1.5],
            seed=0,
            train_fn=lambda ep: None,
            eval_fn=lambda m, ep: 0.5,
        )
        assert result.k_selected == 1.5

    def test_ties_resolve_to_largest(self):
        epochs = self.make_epochs()
        result = att.select_k(
            epochs,
            grid=[0.5, 1.0, 2.0],
            seed=0,
            train_fn=lambda ep: None,
            eval_fn=lambda m, ep: 0.7,
        )
        assert result.k_selected == 2.0
        assert result.val_accuracy == [0.7, 0.7, 0.7]

    def test_deterministic_given_seed(self):
        epochs = self.make_epochs()
        calls = []

        def train_fn(ep):
            calls.append(len(ep))
            return len(ep)

        args = dict(grid=[0.0, 1.0], train_fn=train_fn, eval_fn=lambda m, ep: m / 100)
        r1 = att.select_k(epochs, seed=3, **args)
        r2 = att.select_k(epochs, seed=3, **args)
        assert r1.k_selected == r2.k_selected
        assert r1.val_accuracy == r2.val_accuracy

    def test_empty_grid(self):
        with pytest.raises(att.GridEmpty):
            att.select_k(
                self.make_epochs(),
                grid=[],
                train_fn=lambda ep: None,
                eval_fn=lambda m, ep: 0.0,
            )

    def test_refuses_test_role(self):
        epochs = self.make_epochs()
        epochs.role = "test"
        with pytest.raises(att.EvaluationDataLeak):
            att.select_k(
                epochs,
                grid=[1.0],
                train_fn=lambda ep: None,
                eval_fn=lambda m, ep: 0.0,
            )

    def test_finds_k_that_removes_distracted(self):
        """With a scorer rewarding clean fits, the search lands on the
        fence that strips ground-truth distracted epochs (>= 80% of them)."""
        cfg = eegio.SynthConfig(n_subjects=1, n_sessions=1, seed=6)
        (rec,) = eegio.synth_dataset(cfg)
        epochs = dsp.preprocess_recording(rec)
        distracted = np.array([f["distracted"] for f in epochs.epoch_flags])

        def train_fn(masked):
            return masked  # the "model" is the surviving fit subset

        def eval_fn(masked, val):
            kept = np.array([f["distracted"] for f in masked.epoch_flags])
            total = max(1, int(kept.size))
            return 1.0 - kept.sum() / total  # fraction of kept that is clean

        result = att.select_k(
            epochs, grid=att.DEFAULT_K_GRID, seed=0, train_fn=train_fn, eval_fn=eval_fn
        )
        profile = att.build_profile(epochs, result.k_selected)
        removed = (~profile.mask) & distracted
        assert removed.sum() / distracted.sum() >= 0.8
        # no attentive epochs sacrificed on this dataset
        assert ((~profile.mask) & ~distracted).sum() == 0
