"""Dataset types, manifest/CSV I/O, validation, and the synthetic EEG generator.

The generator substitutes for clinical recordings: each channel is a 1/f^alpha
background, and a configurable band-power asymmetry between hemispheres is
planted per trial label so the downstream pipeline has a known ground truth
to recover.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FS = 512
TRIAL_SECONDS = 8
TRIAL_SAMPLES = FS * TRIAL_SECONDS
EPOCHS_PER_TRIAL = 8
EPOCH_SAMPLES = FS  # 1 s epochs

RIGHT = 1
LEFT = 2

CHANNELS = ("F3", "FC3", "C3", "CP3", "P3", "FCz", "CPz",
            "F4", "FC4", "C4", "CP4", "P4")
LEFT_GROUP = (0, 1, 2, 3, 4)
MIDLINE = (5, 6)
RIGHT_GROUP = (7, 8, 9, 10, 11)
CHANNEL_INDEX = {name: i for i, name in enumerate(CHANNELS)}

# integer generation-frequency intervals (Hz) per band, paper edges rounded
# to the 1 Hz synthesis grid
GEN_BAND_HZ = {
    "delta": (1, 3),
    "theta": (4, 7),
    "alpha": (7, 13),
    "beta": (14, 50),
}

_MICROVOLT_SCALE = 50.0


class DataError(Exception):
    """Validation or I/O failure with a machine-readable code."""

    def __init__(self, code: str, message: str, trial_id: int | None = None):
        self.code = code
        self.trial_id = trial_id
        super().__init__(f"{code}: {message}" if trial_id is None
                         else f"{code} (trial {trial_id}): {message}")


@dataclass
class Trial:
    subject_id: str
    trial_id: int
    label: int
    samples: np.ndarray  # (12 channels, 4096 samples), microvolts
    fs: int = FS


@dataclass
class Dataset:
    subject_id: str
    trials: list
    channels: tuple = CHANNELS

    def labels(self) -> np.ndarray:
        return np.array([t.label for t in self.trials], dtype=int)

    def count(self, label: int) -> int:
        return sum(1 for t in self.trials if t.label == label)


@dataclass(frozen=True)
class SynthConfig:
    n_trials_per_side: int = 40
    asymmetry_db: float = 0.0
    target_band: str = "alpha"
    target_channels: tuple = ("C3", "C4")
    noise_model: float = 1.0  # pink-noise exponent alpha, power ~ 1/f^alpha
    seed: int = 0

    def validate(self) -> None:
        if self.n_trials_per_side < 1:
            raise DataError("BadConfig", "n_trials_per_side must be >= 1")
        if self.asymmetry_db < 0:
            raise DataError("BadConfig", "asymmetry_db must be >= 0")
        if self.target_band not in GEN_BAND_HZ:
            raise DataError("BadConfig",
                            f"target_band must be one of {sorted(GEN_BAND_HZ)}, "
                            f"got {self.target_band!r}")
        for name in self.target_channels:
            if name not in CHANNEL_INDEX:
                raise DataError("BadConfig", f"unknown channel in target_channels: {name!r}")
        if self.noise_model <= 0:
            raise DataError("BadConfig", "noise_model (pink exponent) must be > 0")


def validate_trial(trial: Trial) -> list:
    """Return a list of (code, detail) violations; empty iff the trial is well formed."""
    report = []
    if trial.fs != FS:
        report.append(("BadSampleRate", f"fs={trial.fs}, expected {FS}"))
    if trial.samples.shape != (len(CHANNELS), TRIAL_SAMPLES):
        report.append(("BadSampleCount",
                       f"shape {trial.samples.shape}, expected {(len(CHANNELS), TRIAL_SAMPLES)}"))
    else:
        bad = np.argwhere(~np.isfinite(trial.samples))
        if len(bad):
            ch, idx = bad[0]
            report.append(("NonFinite", f"channel {CHANNELS[ch]}, sample {idx}"))
    if trial.label not in (RIGHT, LEFT):
        report.append(("BadLabel", f"label={trial.label}"))
    return report


def _line_shares(n_lines: int) -> np.ndarray:
    # rhythm power split: band-edge lines dominate because their spectral bins
    # must stand above the out-of-band background; interior lines sit in bins
    # whose in-band background is replaced, so a small share suffices
    if n_lines == 1:
        return np.array([1.0])
    if n_lines == 2:
        return np.array([0.5, 0.5])
    shares = np.full(n_lines, 0.10 / (n_lines - 2))
    shares[0] = shares[-1] = 0.45
    return shares


def _mirror_boost_channels(config: SynthConfig, label: int) -> list:
    """Channels actually boosted for one trial: the target channels that fall on
    the label's hemisphere, right-labeled trials on the right group and left on
    the left (positions mirror across groups; midline targets are never boosted)."""
    group = RIGHT_GROUP if label == RIGHT else LEFT_GROUP
    targets = {CHANNEL_INDEX[name] for name in config.target_channels}
    side = set(group)
    boosted = []
    for name in config.target_channels:
        i = CHANNEL_INDEX[name]
        if i in side:
            boosted.append(i)
        elif i not in MIDLINE:
            # mirror position into the label's hemisphere only if its mirror
            # partner was not itself named as a target
            other = (LEFT_GROUP, RIGHT_GROUP) if i in RIGHT_GROUP else (RIGHT_GROUP, LEFT_GROUP)
            pos = other[0].index(i) if i in other[0] else other[1].index(i)
            mirror = group[pos]
            if mirror not in targets and mirror not in boosted:
                boosted.append(mirror)
    return sorted(set(boosted) & side)


def generate_synthetic(config: SynthConfig) -> Dataset:
    """Deterministic synthetic dataset: 2 x n_trials_per_side trials of 1/f^alpha
    background with a planted band-power asymmetry.

    Background: per-epoch random-phase Fourier surrogate with fixed coefficient
    magnitudes (power exactly proportional to 1/f^alpha on the 1 Hz synthesis
    grid), independent across epochs and channels.

    Boost (asymmetry_db > 0): on each trial's hemisphere-matched target
    channels, the in-band background is replaced by a synchronized rhythm:
    cosine lines at the even in-band frequencies, one shared random phase per
    (trial, channel), alternating polarity, total power = 10^(db/10) times the
    band's baseline power. Replacing rather than adding keeps the planted band
    power exact per trial.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    freqs = np.arange(1, EPOCH_SAMPLES // 2)  # 1..255 Hz synthesis grid
    amp = _MICROVOLT_SCALE * freqs.astype(float) ** (-config.noise_model / 2.0)
    var_per_freq = 2.0 * amp ** 2 / EPOCH_SAMPLES

    lo, hi = GEN_BAND_HZ[config.target_band]
    band_mask = (freqs >= lo) & (freqs <= hi)
    band_power = float(var_per_freq[band_mask].sum())
    lines = np.arange(lo + (lo % 2), hi + 1, 2)
    shares = _line_shares(len(lines))
    ratio = 10.0 ** (config.asymmetry_db / 10.0)
    line_amp = np.sqrt(2.0 * ratio * band_power * shares)
    polarity = (-1.0) ** np.arange(len(lines))
    t_grid = np.arange(TRIAL_SAMPLES) / FS

    n = config.n_trials_per_side
    trials = []
    for tt in range(2 * n):
        label = RIGHT if tt < n else LEFT
        boosted = _mirror_boost_channels(config, label) if config.asymmetry_db > 0 else []
        spectra = np.empty((EPOCHS_PER_TRIAL, len(CHANNELS), len(freqs)), dtype=np.complex128)
        for e in range(EPOCHS_PER_TRIAL):
            phase = rng.uniform(0.0, 2.0 * np.pi, (len(CHANNELS), len(freqs)))
            spectra[e] = np.sqrt(2.0) * amp * np.exp(1j * phase)
            if boosted:
                spectra[e][np.ix_(boosted, np.nonzero(band_mask)[0])] = 0.0
        full = np.zeros((EPOCHS_PER_TRIAL, len(CHANNELS), EPOCH_SAMPLES), dtype=np.complex128)
        full[:, :, 1:EPOCH_SAMPLES // 2] = spectra
        full[:, :, EPOCH_SAMPLES // 2 + 1:] = np.conj(spectra[:, :, ::-1])
        epochs = np.fft.ifft(full, axis=-1).real * (EPOCH_SAMPLES / np.sqrt(2.0 * EPOCH_SAMPLES))
        samples = epochs.transpose(1, 0, 2).reshape(len(CHANNELS), TRIAL_SAMPLES)
        for ch in boosted:
            phi = rng.uniform(0.0, 2.0 * np.pi)
            rhythm = (polarity[:, None] * line_amp[:, None]
                      * np.cos(2.0 * np.pi * lines[:, None] * t_grid[None, :] + phi)).sum(axis=0)
            samples[ch] += rhythm
        trials.append(Trial(subject_id="synthetic", trial_id=tt, label=label,
                            samples=samples))
    return Dataset(subject_id="synthetic", trials=trials)


def save_dataset(dataset: Dataset, out_dir) -> Path:
    """Write manifest.json plus one CSV per trial; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for trial in dataset.trials:
        name = f"trial_{trial.trial_id:04d}.csv"
        np.savetxt(out / name, trial.samples.T, fmt="%.17g", delimiter=",",
                   header=",".join(dataset.channels), comments="")
        entries.append({"trial_id": trial.trial_id, "label": trial.label, "file": name})
    manifest = {
        "subject_id": dataset.subject_id,
        "fs": FS,
        "channels": list(dataset.channels),
        "trials": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_dataset(manifest_path) -> Dataset:
    """Load and validate a dataset from its manifest; raises DataError on the
    first violation, warns (does not reject) on left/right imbalance."""
    path = Path(manifest_path)
    if not path.exists():
        raise DataError("MissingFile", str(path))
    manifest = json.loads(path.read_text())
    for key in ("subject_id", "fs", "channels", "trials"):
        if key not in manifest:
            raise DataError("BadManifest", f"missing key {key!r}")
    if manifest["fs"] != FS:
        raise DataError("BadSampleRate", f"manifest fs={manifest['fs']}, expected {FS}")
    if list(manifest["channels"]) != list(CHANNELS):
        raise DataError("BadChannels",
                        f"manifest channels {manifest['channels']} != expected montage")
    if not manifest["trials"]:
        raise DataError("EmptyDataset", "manifest lists zero trials")
    trials = []
    for entry in manifest["trials"]:
        tid = entry.get("trial_id")
        label = entry.get("label")
        if label not in (RIGHT, LEFT):
            raise DataError("BadLabel", f"label={label!r}", trial_id=tid)
        fpath = path.parent / entry["file"]
        if not fpath.exists():
            raise DataError("MissingFile", str(fpath), trial_id=tid)
        try:
            table = np.loadtxt(fpath, delimiter=",", skiprows=1, ndmin=2)
        except ValueError as exc:
            raise DataError("BadTrialFile", str(exc), trial_id=tid) from exc
        if table.shape != (TRIAL_SAMPLES, len(CHANNELS)):
            raise DataError("BadSampleCount",
                            f"{fpath.name}: {table.shape[0]} rows x {table.shape[1]} cols, "
                            f"expected {TRIAL_SAMPLES} x {len(CHANNELS)}", trial_id=tid)
        if not np.all(np.isfinite(table)):
            raise DataError("NonFinite", f"{fpath.name} contains non-finite samples",
                            trial_id=tid)
        trials.append(Trial(subject_id=manifest["subject_id"], trial_id=tid,
                            label=label, samples=np.ascontiguousarray(table.T)))
    ds = Dataset(subject_id=manifest["subject_id"], trials=trials,
                 channels=tuple(manifest["channels"]))
    if ds.count(RIGHT) != ds.count(LEFT):
        warnings.warn(f"imbalanced dataset: {ds.count(RIGHT)} right vs {ds.count(LEFT)} left")
    return ds
