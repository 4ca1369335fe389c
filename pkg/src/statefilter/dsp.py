"""Deterministic DSP kernels: IIR filtering, decimation, segmentation,
standardization, and FFT band-power features.

The Butterworth designer builds the analog prototype, applies the lowpass or
bandpass transform with bilinear prewarping, and factors the result into
second-order sections.  All spectra are one-sided squared magnitudes of the
real FFT; band intervals are half-open ``[lo, hi)`` so adjacent bands share
edges without overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .eegio import EpochSet, Recording

EPS_LOG = 1e-12
STD_FLOOR = 1e-12


class DspError(Exception):
    """Base class for signal-processing errors."""


class InvalidSpec(DspError):
    """Filter edge frequencies or order out of range."""


class NonFiniteInput(DspError):
    """Signal contains NaN or Inf."""


class NonIntegerFactor(DspError):
    """Requested decimation ratio is not a positive integer."""


class EmptyResult(DspError):
    """Segmentation produced no epochs at all."""


class EmptyBand(DspError):
    """No FFT bin falls inside the requested band (window too short)."""


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth design request; prototype_order counts analog poles."""

    kind: str  # "bandpass" or "lowpass"
    prototype_order: int = 4
    low_hz: float = 0.0
    high_hz: float = 0.0
    fs_hz: float = 0.0

    def validate(self) -> None:
        if self.kind not in ("bandpass", "lowpass"):
            raise InvalidSpec(f"unknown filter kind {self.kind!r}")
        if self.prototype_order < 1:
            raise InvalidSpec("prototype_order must be >= 1")
        nyq = self.fs_hz / 2.0
        if not self.fs_hz > 0:
            raise InvalidSpec("fs_hz must be positive")
        if self.kind == "bandpass":
            if not (0.0 < self.low_hz < self.high_hz < nyq):
                raise InvalidSpec(
                    f"bandpass edges must satisfy 0 < {self.low_hz} < "
                    f"{self.high_hz} < {nyq}"
                )
        else:
            if not (0.0 < self.high_hz < nyq):
                raise InvalidSpec(
                    f"lowpass cutoff must satisfy 0 < {self.high_hz} < {nyq}"
                )


def _prototype_poles(order: int) -> np.ndarray:
    """Analog Butterworth poles on the unit circle, left half-plane."""
    k = np.arange(order)
    return np.exp(1j * np.pi * (2 * k + order + 1) / (2 * order))


def _bilinear_zpk(
    z: np.ndarray, p: np.ndarray, k: float, fs: float
) -> tuple[np.ndarray, np.ndarray, float]:
    fs2 = 2.0 * fs
    zd = (fs2 + z) / (fs2 - z)
    pd = (fs2 + p) / (fs2 - p)
    k_d = k * float(np.real(np.prod(fs2 - z) / np.prod(fs2 - p)))
    # zeros pushed to Nyquist to keep numerator and denominator degrees equal
    zd = np.concatenate([zd, -np.ones(len(p) - len(z))])
    return zd, pd, k_d


def _sos_from_zpk(z: np.ndarray, p: np.ndarray, k: float) -> np.ndarray:
    """Pair digital poles/zeros into (n_sections, 6) [b0 b1 b2 1 a1 a2] rows.

    Assumes real-coefficient designs where zeros come in real values and
    poles are real or conjugate pairs, which covers Butterworth low/bandpass.
    """
    if np.any(np.abs(z.imag) > 1e-8):
        raise InvalidSpec("non-real digital zeros are not supported")
    zeros = sorted(z.real.tolist())
    conj = [pp for pp in p if pp.imag > 1e-12]
    real = sorted(pp.real for pp in p if abs(pp.imag) <= 1e-12)
    if 2 * len(conj) + len(real) != len(p):
        raise InvalidSpec("pole pairing failed; conjugate symmetry broken")
    dens: list[tuple[float, float, float]] = []
    for pp in conj:
        dens.append((1.0, -2.0 * pp.real, abs(pp) ** 2))
    while len(real) >= 2:
        p1, p2 = real.pop(), real.pop(0)
        dens.append((1.0, -(p1 + p2), p1 * p2))
    first_order = real.pop() if real else None

    def take_zero_pair() -> tuple[float, float, float]:
        if len(zeros) >= 2:
            z1, z2 = zeros.pop(), zeros.pop(0)  # pair widest apart: (+1, -1) for BP
            return (1.0, -(z1 + z2), z1 * z2)
        if zeros:
            z1 = zeros.pop()
            return (1.0, -z1, 0.0)
        return (1.0, 0.0, 0.0)

    sections = []
    # farthest-from-unit-circle poles first; the response is order-invariant
    dens.sort(key=lambda d: (d[2], d[1]))
    for den in dens:
        sections.append(take_zero_pair() + den)
    if first_order is not None:
        z1 = zeros.pop() if zeros else None
        num = (1.0, -z1, 0.0) if z1 is not None else (1.0, 0.0, 0.0)
        sections.append(num + (1.0, -first_order, 0.0))
    sos = np.array(sections, dtype=np.float64)
    sos[0, :3] *= k
    return sos


def design_butterworth(spec: FilterSpec) -> np.ndarray:
    """Digital Butterworth as second-order sections, shape (n_sections, 6).

    A bandpass of prototype order n has 2n poles and n sections; a lowpass
    has n poles and ceil(n/2) sections.
    """
    spec.validate()
    n = spec.prototype_order
    fs = spec.fs_hz
    proto = _prototype_poles(n)
    if spec.kind == "lowpass":
        wc = 2.0 * fs * math.tan(math.pi * spec.high_hz / fs)
        p_a = proto * wc
        z_a = np.zeros(0, dtype=complex)
        k_a = wc**n
    else:
        w1 = 2.0 * fs * math.tan(math.pi * spec.low_hz / fs)
        w2 = 2.0 * fs * math.tan(math.pi * spec.high_hz / fs)
        bw = w2 - w1
        w0 = math.sqrt(w1 * w2)
        scaled = proto * (bw / 2.0)
        disc = np.sqrt(scaled**2 - w0**2)
        p_a = np.concatenate([scaled + disc, scaled - disc])
        z_a = np.zeros(n, dtype=complex)
        k_a = bw**n
    zd, pd, kd = _bilinear_zpk(z_a, p_a, k_a, fs)
    sos = _sos_from_zpk(zd, pd, kd)
    if not np.all(np.isfinite(sos)):
        raise InvalidSpec("design produced non-finite coefficients")
    return sos


def sos_response(sos: np.ndarray, freqs_hz, fs_hz: float) -> np.ndarray:
    """Complex frequency response of a section cascade at the given frequencies."""
    w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / fs_hz
    z1 = np.exp(-1j * w)
    z2 = z1 * z1
    h = np.ones_like(z1, dtype=complex)
    for b0, b1, b2, _, a1, a2 in sos:
        h *= (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2)
    return h


def apply_filter(sos: np.ndarray, signal: np.ndarray) -> np.ndarray:
    """Causal forward filtering with zero initial state.

    ``signal`` may be any shape; time runs along the last axis.  Uses direct
    form II transposed per section, vectorized across leading axes.
    """
    x = np.asarray(signal, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("signal contains NaN or Inf")
    flat = x.reshape(-1, x.shape[-1]) if x.ndim > 1 else x[np.newaxis, :]
    y = flat.copy()
    for b0, b1, b2, _, a1, a2 in sos:
        s1 = np.zeros(y.shape[0])
        s2 = np.zeros(y.shape[0])
        out = np.empty_like(y)
        for i in range(y.shape[1]):
            xi = y[:, i]
            yi = b0 * xi + s1
            s1 = b1 * xi - a1 * yi + s2
            s2 = b2 * xi - a2 * yi
            out[:, i] = yi
        y = out
    return y.reshape(x.shape) if x.ndim > 1 else y[0]


def filter_recording(rec: Recording, sos: np.ndarray) -> Recording:
    """Filter every trial/channel of a Recording along time."""
    return Recording(
        manifest=rec.manifest,
        data=apply_filter(sos, rec.data),
        labels=rec.labels,
        epoch_flags=rec.epoch_flags,
    )


def decimate(rec: Recording, fs_target: float) -> Recording:
    """Integer-factor downsampling with an order-4 Butterworth anti-alias lowpass.

    A unit factor returns the input unchanged.  The lowpass cutoff is
    0.4 * fs_target.
    """
    ratio = rec.manifest.fs_hz / fs_target
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9:
        raise NonIntegerFactor(
            f"fs {rec.manifest.fs_hz} / target {fs_target} = {ratio} is not integer"
        )
    if factor == 1:
        return rec
    sos = design_butterworth(
        FilterSpec(
            kind="lowpass",
            prototype_order=4,
            high_hz=0.4 * fs_target,
            fs_hz=rec.manifest.fs_hz,
        )
    )
    smoothed = apply_filter(sos, rec.data)
    down = smoothed[:, :, ::factor]
    manifest = replace(rec.manifest, fs_hz=fs_target, n_samples=down.shape[-1])
    return Recording(
        manifest=manifest, data=down, labels=rec.labels, epoch_flags=rec.epoch_flags
    )


def segment_epochs(rec: Recording, window_sec: float, role: str = "train") -> EpochSet:
    """Cut each trial into floor(n_samples / W) non-overlapping windows.

    W = round(window_sec * fs).  Trailing remainder samples are discarded;
    trials shorter than one window contribute nothing.  Raises EmptyResult if
    no trial yields an epoch.
    """
    if window_sec <= 0:
        raise InvalidSpec("window_sec must be positive")
    m = rec.manifest
    w = int(round(window_sec * m.fs_hz))
    per_trial = m.n_samples // w if w >= 1 else 0
    if per_trial == 0:
        raise EmptyResult(
            f"window of {w} samples exceeds trial length {m.n_samples}"
        )
    usable = per_trial * w
    data = rec.data[:, :, :usable].reshape(
        m.n_trials, m.n_channels, per_trial, w
    )
    # -> [trial][window][channel][sample] -> flat epochs
    data = np.ascontiguousarray(data.transpose(0, 2, 1, 3)).reshape(
        m.n_trials * per_trial, m.n_channels, w
    )
    labels = np.repeat(rec.labels, per_trial)
    source_trial = np.repeat(np.arange(m.n_trials), per_trial)
    flags = None
    if rec.epoch_flags is not None:
        flags = [rec.epoch_flags[t] for t in source_trial]
    return EpochSet(
        data=data,
        labels=labels,
        subject_id=m.subject_id,
        session_id=m.session_id,
        fs_hz=m.fs_hz,
        window_sec=window_sec,
        source_trial=source_trial,
        channel_names=list(m.channel_names),
        label_names=list(m.label_names),
        epoch_flags=flags,
        role=role,
    )


def standardize(epochs: EpochSet, scope: str = "epoch") -> EpochSet:
    """Zero-mean, unit-variance normalization per channel.

    scope="epoch" normalizes each epoch's channels independently (default);
    scope="session" uses one mean/std per channel over the whole set.
    Channels with std below 1e-12 become all zeros.
    """
    if scope not in ("epoch", "session"):
        raise ValueError(f"unknown standardization scope {scope!r}")
    x = epochs.data
    if scope == "epoch":
        mean = x.mean(axis=2, keepdims=True)
        std = x.std(axis=2, keepdims=True)
    else:
        mean = x.mean(axis=(0, 2), keepdims=True)
        std = x.std(axis=(0, 2), keepdims=True)
    centered = x - mean
    out = np.where(std < STD_FLOOR, 0.0, centered / np.where(std < STD_FLOOR, 1.0, std))
    return EpochSet(
        data=out,
        labels=epochs.labels,
        subject_id=epochs.subject_id,
        session_id=epochs.session_id,
        fs_hz=epochs.fs_hz,
        window_sec=epochs.window_sec,
        source_trial=epochs.source_trial,
        channel_names=list(epochs.channel_names),
        label_names=list(epochs.label_names),
        epoch_flags=epochs.epoch_flags,
        role=epochs.role,
    )


def fft_mag_sq(x: np.ndarray, window: str = "rectangular") -> np.ndarray:
    """One-sided squared FFT magnitudes |X_k|^2, k = 0..floor(N/2).

    No normalization and no doubling of interior bins; bin k sits at
    frequency k * fs / N.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n < 2:
        raise ValueError("need at least 2 samples")
    if window == "rectangular":
        wx = x
    elif window == "hann":
        wx = x * np.hanning(n)
    else:
        raise ValueError(f"unknown window {window!r}")
    spec = np.fft.rfft(wx, axis=-1)
    return (spec.real**2 + spec.imag**2)


def band_bins(n_samples: int, fs: float, band: tuple[float, float]) -> np.ndarray:
    """Indices of one-sided FFT bins with lo <= k*fs/N < hi; EmptyBand if none."""
    lo, hi = band
    if not (0.0 <= lo < hi <= fs / 2.0 + 1e-12):
        raise ValueError(f"band {band} outside [0, fs/2]")
    k = np.arange(n_samples // 2 + 1)
    freqs = k * fs / n_samples
    idx = np.nonzero((freqs >= lo) & (freqs < hi))[0]
    if idx.size == 0:
        raise EmptyBand(
            f"no bin in [{lo}, {hi}) Hz at resolution {fs / n_samples} Hz"
        )
    return idx


def band_energy(
    spectrum: np.ndarray,
    fs: float,
    band: tuple[float, float],
    n_samples: int | None = None,
) -> float:
    """Sum of |X_k|^2 over bins inside the half-open band.

    ``n_samples`` is the original signal length; defaults to the even-length
    reconstruction 2 * (len(spectrum) - 1).
    """
    spectrum = np.asarray(spectrum, dtype=np.float64)
    n = n_samples if n_samples is not None else 2 * (len(spectrum) - 1)
    idx = band_bins(n, fs, band)
    return float(spectrum[..., idx].sum(axis=-1))


@dataclass(frozen=True)
class BandTable:
    """Named half-open frequency intervals, ordered and disjoint."""

    bands: tuple[tuple[str, float, float], ...] = (
        ("delta", 1.0, 4.0),
        ("theta", 4.0, 8.0),
        ("alpha", 8.0, 13.0),
        ("beta", 13.0, 30.0),
        ("gamma", 30.0, 40.0),
    )

    def __post_init__(self) -> None:
        prev_hi = -np.inf
        for name, lo, hi in self.bands:
            if not lo < hi:
                raise ValueError(f"band {name} has lo >= hi")
            if lo < prev_hi:
                raise ValueError(f"band {name} overlaps its predecessor")
            prev_hi = hi

    @property
    def names(self) -> list[str]:
        return [b[0] for b in self.bands]

    def interval(self, name: str) -> tuple[float, float]:
        for bname, lo, hi in self.bands:
            if bname == name:
                return (lo, hi)
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.bands)


DEFAULT_BANDS = BandTable()
ALPHA_BAND = DEFAULT_BANDS.interval("alpha")
THETA_BAND = DEFAULT_BANDS.interval("theta")


def periodogram_density(x: np.ndarray, fs: float) -> np.ndarray:
    """Hann-window periodogram PSD: P_k = |X_k|^2 / (fs * sum(w^2)),
    interior bins doubled.  Works on any shape with time along the last axis.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    w = np.hanning(n)
    p = fft_mag_sq(x, window="hann") / (fs * float((w**2).sum()))
    if n % 2 == 0:
        p[..., 1:-1] *= 2.0
    else:
        p[..., 1:] *= 2.0
    return p


def band_power_from_density(
    p: np.ndarray, n_samples: int, fs: float, band: tuple[float, float]
) -> np.ndarray:
    """Integrated band power sum(P_k * df) from a periodogram density."""
    idx = band_bins(n_samples, fs, band)
    df = fs / n_samples
    return p[..., idx].sum(axis=-1) * df


def psd_features(epochs: EpochSet, bands: BandTable = DEFAULT_BANDS) -> np.ndarray:
    """Log band-power feature matrix, shape (n_epochs, n_channels * n_bands).

    Features are ln(1e-12 + integrated Hann periodogram power per band),
    laid out channel-major: feature index = channel * n_bands + band.
    """
    n = epochs.n_samples
    fs = epochs.fs_hz
    p = periodogram_density(epochs.data, fs)
    cols = []
    for _, lo, hi in bands.bands:
        cols.append(band_power_from_density(p, n, fs, (lo, hi)))
    power = np.stack(cols, axis=-1)  # (epoch, channel, band)
    feats = np.log(EPS_LOG + power)
    return feats.reshape(len(epochs), epochs.n_channels * len(bands))


def preprocess_recording(
    rec: Recording,
    band: tuple[float, float] = (1.0, 40.0),
    order: int = 4,
    fs_out: float = 250.0,
    window_sec: float = 2.0,
    scope: str = "epoch",
    role: str = "train",
    extra_lowpass_hz: float | None = None,
) -> EpochSet:
    """Standard pipeline: band-pass, decimate, segment, standardize.

    ``extra_lowpass_hz`` adds a dataset-specific lowpass (same order) after
    the common band-pass, e.g. the 38 Hz cutoff some benchmarks prescribe.
    """
    sos = design_butterworth(
        FilterSpec(
            kind="bandpass",
            prototype_order=order,
            low_hz=band[0],
            high_hz=band[1],
            fs_hz=rec.manifest.fs_hz,
        )
    )
    filtered = filter_recording(rec, sos)
    if extra_lowpass_hz is not None:
        lp = design_butterworth(
            FilterSpec(
                kind="lowpass",
                prototype_order=order,
                high_hz=extra_lowpass_hz,
                fs_hz=rec.manifest.fs_hz,
            )
        )
        filtered = filter_recording(filtered, lp)
    downsampled = decimate(filtered, fs_out)
    epochs = segment_epochs(downsampled, window_sec, role=role)
    return standardize(epochs, scope=scope)


__all__ = [
    "DspError",
    "InvalidSpec",
    "NonFiniteInput",
    "NonIntegerFactor",
    "EmptyResult",
    "EmptyBand",
    "FilterSpec",
    "BandTable",
    "DEFAULT_BANDS",
    "ALPHA_BAND",
    "THETA_BAND",
    "design_butterworth",
    "sos_response",
    "apply_filter",
    "filter_recording",
    "decimate",
    "segment_epochs",
    "standardize",
    "fft_mag_sq",
    "band_bins",
    "band_energy",
    "periodogram_density",
    "band_power_from_density",
    "psd_features",
    "preprocess_recording",
]
