"""Rule-based fusion: rank trained models by calibration accuracy, keep the
top three, and combine their votes with the fixed positive-gated rule
(1st positive AND (2nd OR 3rd positive))."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classifiers
from .dataset import LEFT, RIGHT

TIE_PRECEDENCE = ("SVM", "LDA", "Boosting", "KNN", "NaiveBayes")


@dataclass
class RuleEnsemble:
    ranked: list                 # exactly 3 TrainedModel, best calibration accuracy first
    ranked_kinds: tuple
    calibration_accuracy: dict   # kind -> accuracy on the calibration rows, all candidates
    positive_class: int = RIGHT
    tie_policy: tuple = TIE_PRECEDENCE


def rank_models(models: dict, calib_X, calib_y) -> RuleEnsemble:
    """Rank candidate models (>= 3, keyed by kind) by accuracy on labeled
    calibration rows; equal accuracies fall back to the fixed precedence."""
    calib_X = np.asarray(calib_X, dtype=float)
    calib_y = np.asarray(calib_y, dtype=int)
    if len(calib_X) == 0:
        raise ValueError("calibration set is empty")
    if len(models) < 3:
        raise ValueError(f"rule fusion needs >= 3 models, got {len(models)}")
    for kind in models:
        if kind not in TIE_PRECEDENCE:
            raise ValueError(f"unknown model kind {kind!r}")
    acc = {kind: float((classifiers.predict(m, calib_X) == calib_y).mean())
           for kind, m in models.items()}
    order = sorted(models, key=lambda k: (-acc[k], TIE_PRECEDENCE.index(k)))
    top = order[:3]
    return RuleEnsemble(ranked=[models[k] for k in top], ranked_kinds=tuple(top),
                        calibration_accuracy=acc)


def replace_models(ensemble: RuleEnsemble, models: dict) -> RuleEnsemble:
    """Same ranking, different fitted models (used to refit on the full
    training fold after ranking on the inner holdout)."""
    return RuleEnsemble(ranked=[models[k] for k in ensemble.ranked_kinds],
                        ranked_kinds=ensemble.ranked_kinds,
                        calibration_accuracy=ensemble.calibration_accuracy,
                        positive_class=ensemble.positive_class,
                        tie_policy=ensemble.tie_policy)


def rule_predict(ensemble: RuleEnsemble, rows):
    """Positive iff the 1st-ranked model votes positive and at least one of the
    2nd and 3rd does; every other triple is negative."""
    rows = np.asarray(rows, dtype=float)
    single = rows.ndim == 1
    X = rows[None, :] if single else rows
    pos = ensemble.positive_class
    neg = LEFT if pos == RIGHT else RIGHT
    a, b, c = (classifiers.predict(m, X) == pos for m in ensemble.ranked)
    out = np.where(a & (b | c), pos, neg)
    return int(out[0]) if single else out


def make_calibration_split(trial_ids, trial_labels, seed, fraction: float = 0.25):
    """Deterministic stratified trial-level split: per label, a seeded shuffle
    of the sorted trial ids sends floor(fraction * n) trials (at least 1) to
    the calibration side. Returns (fit_ids, calib_ids) as sorted arrays."""
    trial_ids = np.asarray(trial_ids)
    trial_labels = np.asarray(trial_labels)
    if len(trial_ids) != len(trial_labels):
        raise ValueError("trial_ids and trial_labels must align")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    fit_ids, calib_ids = [], []
    for label in (RIGHT, LEFT):
        ids = np.sort(trial_ids[trial_labels == label])
        if len(ids) < 2:
            raise ValueError(f"need >= 2 trials of label {label} to split")
        perm = rng.permutation(len(ids))
        n_calib = max(1, int(fraction * len(ids)))
        calib_ids.extend(ids[perm[:n_calib]])
        fit_ids.extend(ids[perm[n_calib:]])
    return np.sort(np.array(fit_ids)), np.sort(np.array(calib_ids))


def ensemble_to_json(ensemble: RuleEnsemble) -> dict:
    return {
        "ranked_kinds": list(ensemble.ranked_kinds),
        "calibration_accuracy": {k: float(v)
                                 for k, v in sorted(ensemble.calibration_accuracy.items())},
        "positive_class": ensemble.positive_class,
        "tie_policy": list(ensemble.tie_policy),
        "models": [classifiers.model_to_json(m) for m in ensemble.ranked],
    }


def ensemble_from_json(blob: dict) -> RuleEnsemble:
    models = [classifiers.model_from_json(b) for b in blob["models"]]
    return RuleEnsemble(ranked=models, ranked_kinds=tuple(blob["ranked_kinds"]),
                        calibration_accuracy=dict(blob["calibration_accuracy"]),
                        positive_class=blob["positive_class"],
                        tie_policy=tuple(blob["tie_policy"]))


def save_ensemble(ensemble: RuleEnsemble, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(ensemble_to_json(ensemble), indent=2, sort_keys=True) + "\n")
    return path


def load_ensemble(path) -> RuleEnsemble:
    return ensemble_from_json(json.loads(Path(path).read_text()))
