"""Paired t-tests per (channel, bin), two-tailed p-values from first
principles, the masked power-difference map, and band-level aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp
from .dataset import CHANNELS, EPOCHS_PER_TRIAL, LEFT, RIGHT
from .features import FeatureMatrix

# PSD bins (1-based, center 2k Hz) assigned to the classical bands;
# together the four bands partition bins 1..25
BAND_BINS = {
    "delta": (1,),
    "theta": (2, 3),
    "alpha": (4, 5, 6),
    "beta": tuple(range(7, 26)),
}
BAND_ORDER = ("delta", "theta", "alpha", "beta")


@dataclass
class TTestResult:
    t: float
    df: int
    p: float
    n: int


@dataclass
class SignificanceMap:
    t: np.ndarray            # (12, 25)
    p: np.ndarray            # (12, 25)
    delta: np.ndarray        # (12, 25) mean right power minus mean left power
    significant: np.ndarray  # (12, 25) bool, p < alpha
    alpha: float
    mean_right: np.ndarray   # (12, 25)
    mean_left: np.ndarray    # (12, 25)


@dataclass
class BandMap:
    bands: tuple                        # band names in order
    mean_delta: np.ndarray              # (4, 12)
    mean_delta_significant: np.ndarray  # (4, 12), NaN where a band has no significant bins


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 301):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                     + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_pvalue(t: float, df: int) -> float:
    """Two-tailed p-value for a t statistic: I_{df/(df+t^2)}(df/2, 1/2)."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if math.isnan(t):
        raise ValueError("t is NaN")
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, _betainc_reg(df / 2.0, 0.5, x)))


def paired_t(x, y) -> TTestResult:
    """Paired two-sided t-test of x against y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired_t expects two equal-length vectors")
    n = len(x)
    if n < 2:
        raise ValueError("paired_t needs at least 2 pairs")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("paired_t inputs must be finite")
    d = x - y
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, df=n - 1, p=1.0, n=n)
        t = math.inf if mean > 0 else -math.inf
        return TTestResult(t=t, df=n - 1, p=0.0, n=n)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t=t, df=n - 1, p=t_pvalue(t, n - 1), n=n)


def _ordered_rows(fm: FeatureMatrix, label: int) -> np.ndarray:
    """Rows of one label sorted by (trial_id, epoch): acquisition-rank order."""
    mask = fm.y == label
    order = np.lexsort((fm.epochs[mask], fm.trial_ids[mask]))
    return fm.X[mask][order]


def _trial_means(rows: np.ndarray) -> np.ndarray:
    return rows.reshape(-1, EPOCHS_PER_TRIAL, rows.shape[1]).mean(axis=1)


def significance_map(fm: FeatureMatrix, alpha: float = 0.05,
                     level: str = "epoch",
                     allow_truncate: bool = False) -> SignificanceMap:
    """Per-(channel, bin) paired t-test of right-label rows against left-label
    rows, paired by acquisition rank.

    level="epoch" pairs individual epoch rows (the default); level="trial"
    first averages each trial's 8 epochs. Unequal per-label counts are an
    error unless allow_truncate, which drops trailing rows of the longer side.
    """
    if level not in ("epoch", "trial"):
        raise ValueError(f"level must be 'epoch' or 'trial', got {level!r}")
    right = _ordered_rows(fm, RIGHT)
    left = _ordered_rows(fm, LEFT)
    if len(right) == 0 or len(left) == 0:
        raise ValueError("significance_map needs rows of both labels")
    if level == "trial":
        right = _trial_means(right)
        left = _trial_means(left)
    if len(right) != len(left):
        if not allow_truncate:
            raise ValueError(
                f"unequal per-label counts ({len(right)} right vs {len(left)} left); "
                "pass allow_truncate to drop trailing rows of the longer side")
        m = min(len(right), len(left))
        right, left = right[:m], left[:m]

    n_ch, n_bins = len(CHANNELS), dsp.PSD_BINS
    t = np.empty((n_ch, n_bins))
    p = np.empty((n_ch, n_bins))
    for j in range(right.shape[1]):
        res = paired_t(right[:, j], left[:, j])
        t[j // n_bins, j % n_bins] = res.t
        p[j // n_bins, j % n_bins] = res.p
    mean_r = right.mean(axis=0).reshape(n_ch, n_bins)
    mean_l = left.mean(axis=0).reshape(n_ch, n_bins)
    return SignificanceMap(t=t, p=p, delta=mean_r - mean_l,
                           significant=p < alpha, alpha=alpha,
                           mean_right=mean_r, mean_left=mean_l)


def band_aggregate(smap: SignificanceMap) -> BandMap:
    """Mean delta per band x channel, plus the mean over significant bins only
    (NaN when a band has no significant bin on a channel)."""
    n_ch = len(CHANNELS)
    mean_delta = np.empty((len(BAND_ORDER), n_ch))
    mean_sig = np.full((len(BAND_ORDER), n_ch), np.nan)
    for bi, band in enumerate(BAND_ORDER):
        cols = np.array(BAND_BINS[band]) - 1
        mean_delta[bi] = smap.delta[:, cols].mean(axis=1)
        for ch in range(n_ch):
            sig = smap.significant[ch, cols]
            if sig.any():
                mean_sig[bi, ch] = smap.delta[ch, cols][sig].mean()
    return BandMap(bands=BAND_ORDER, mean_delta=mean_delta,
                   mean_delta_significant=mean_sig)


def save_map_csv(smap: SignificanceMap, path) -> Path:
    path = Path(path)
    freqs = dsp.bin_frequencies()
    with open(path, "w") as fh:
        fh.write("channel,freq_hz,t,p,delta,significant\n")
        for ch, name in enumerate(CHANNELS):
            for b in range(dsp.PSD_BINS):
                fh.write(f"{name},{int(freqs[b])},{smap.t[ch, b]:.17g},"
                         f"{smap.p[ch, b]:.17g},{smap.delta[ch, b]:.17g},"
                         f"{int(smap.significant[ch, b])}\n")
    return path


def save_band_csv(bmap: BandMap, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("band,channel,mean_delta,mean_delta_significant\n")
        for bi, band in enumerate(bmap.bands):
            for ch, name in enumerate(CHANNELS):
                sig = bmap.mean_delta_significant[bi, ch]
                sig_txt = "" if np.isnan(sig) else f"{sig:.17g}"
                fh.write(f"{band},{name},{bmap.mean_delta[bi, ch]:.17g},{sig_txt}\n")
    return path


def save_psd_curves_csv(smap: SignificanceMap, path) -> Path:
    """Per-side mean power density per (channel, bin), companion to the map."""
    path = Path(path)
    freqs = dsp.bin_frequencies()
    with open(path, "w") as fh:
        fh.write("channel,freq_hz,mean_left,mean_right\n")
        for ch, name in enumerate(CHANNELS):
            for b in range(dsp.PSD_BINS):
                fh.write(f"{name},{int(freqs[b])},{smap.mean_left[ch, b]:.17g},"
                         f"{smap.mean_right[ch, b]:.17g}\n")
    return path
