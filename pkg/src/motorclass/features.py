"""Feature extraction: filtered trials to labeled (epoch x 300) power rows,
plus train-fitted standardization."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp
from .dataset import CHANNELS, EPOCHS_PER_TRIAL, EPOCH_SAMPLES, Dataset

N_FEATURES = len(CHANNELS) * dsp.PSD_BINS  # 12 * 25 = 300


@dataclass
class Scaler:
    mean: np.ndarray  # (300,)
    std: np.ndarray   # (300,)


@dataclass
class FeatureMatrix:
    X: np.ndarray          # (n_rows, 300)
    y: np.ndarray          # (n_rows,) labels
    trial_ids: np.ndarray  # (n_rows,)
    epochs: np.ndarray     # (n_rows,) epoch index 0..7
    scaler: Scaler | None = None

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]


def feature_names() -> list:
    """Column names in matrix order: channel-major, 25 bins of 2 Hz each."""
    freqs = dsp.bin_frequencies()
    return [f"{ch}_{int(f)}Hz" for ch in CHANNELS for f in freqs]


def feature_index(channel: str, freq_hz: float) -> int:
    ch = CHANNELS.index(channel)
    b = int(round(freq_hz / 2.0))
    if not 1 <= b <= dsp.PSD_BINS or b * 2 != freq_hz:
        raise ValueError(f"no feature bin centered at {freq_hz} Hz")
    return ch * dsp.PSD_BINS + (b - 1)


def epoch_trial(samples: np.ndarray) -> np.ndarray:
    """Split (channels, 4096) samples into (8, channels, 512) contiguous 1 s epochs."""
    n_ch, n = samples.shape
    if n != EPOCHS_PER_TRIAL * EPOCH_SAMPLES:
        raise ValueError(f"expected {EPOCHS_PER_TRIAL * EPOCH_SAMPLES} samples, got {n}")
    return samples.reshape(n_ch, EPOCHS_PER_TRIAL, EPOCH_SAMPLES).transpose(1, 0, 2)


def build_feature_matrix(dataset: Dataset, filt: dsp.FirFilter,
                         log_power: bool = False) -> FeatureMatrix:
    """Filter each full trial, epoch it, and compute per-channel spectral rows.

    Row order is (trial order in the dataset, epoch index). With log_power the
    300 values are reported as dB (10 log10) rather than linear density.
    """
    n_trials = len(dataset.trials)
    X = np.empty((n_trials * EPOCHS_PER_TRIAL, N_FEATURES))
    y = np.empty(n_trials * EPOCHS_PER_TRIAL, dtype=int)
    trial_ids = np.empty_like(y)
    epoch_idx = np.empty_like(y)
    for i, trial in enumerate(dataset.trials):
        filtered = dsp._filter_rows(filt, np.asarray(trial.samples, dtype=float))
        epochs = epoch_trial(filtered)  # (8, 12, 512)
        psd = dsp._psd_epoch_rows(epochs.reshape(-1, EPOCH_SAMPLES), float(trial.fs))
        rows = psd.reshape(EPOCHS_PER_TRIAL, len(CHANNELS) * dsp.PSD_BINS)
        sl = slice(i * EPOCHS_PER_TRIAL, (i + 1) * EPOCHS_PER_TRIAL)
        X[sl] = rows
        y[sl] = trial.label
        trial_ids[sl] = trial.trial_id
        epoch_idx[sl] = np.arange(EPOCHS_PER_TRIAL)
    if log_power:
        X = 10.0 * np.log10(np.maximum(X, 1e-20))
    if not np.all(np.isfinite(X)):
        raise dsp.DspError("feature matrix contains non-finite values")
    return FeatureMatrix(X=X, y=y, trial_ids=trial_ids, epochs=epoch_idx)


def fit_scaler(X: np.ndarray) -> Scaler:
    """Per-column mean/stddev from training rows only."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("scaler needs at least 2 training rows")
    return Scaler(mean=X.mean(axis=0), std=X.std(axis=0))


def apply_scaler(scaler: Scaler, X: np.ndarray) -> np.ndarray:
    """Z-score with the fitted statistics; columns whose training stddev is
    below 1e-12 come out identically 0."""
    X = np.asarray(X, dtype=float)
    degenerate = scaler.std < 1e-12
    safe = np.where(degenerate, 1.0, scaler.std)
    Z = (X - scaler.mean) / safe
    Z[:, degenerate] = 0.0
    return Z


def save_features_csv(fm: FeatureMatrix, path) -> Path:
    path = Path(path)
    header = "trial_id,epoch,label," + ",".join(feature_names())
    table = np.column_stack([fm.trial_ids, fm.epochs, fm.y, fm.X])
    fmt = ["%d", "%d", "%d"] + ["%.17g"] * N_FEATURES
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=header, comments="")
    return path
