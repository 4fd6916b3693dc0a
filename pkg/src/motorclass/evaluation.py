"""Stratified 3-fold cross-validation at trial granularity, confusion-matrix
metrics, and per-classifier mean/std reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classifiers, dsp, features, fusion
from .dataset import FS, LEFT, RIGHT, Dataset

FOLD_K = 3
REPORT_ORDER = ("SVM", "KNN", "NaiveBayes", "Boosting", "LDA", "Rule")
METRIC_NAMES = ("accuracy", "precision", "recall", "f_score")

DEFAULT_FILTER = (1.0, 50.0, 1691)


@dataclass
class FoldPlan:
    folds: list   # 3 sorted arrays of trial ids, each mixing both sides
    seed: int
    k: int = FOLD_K


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f_score: float
    degenerate: tuple = ()

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f_score": self.f_score}


def make_folds(dataset: Dataset, seed: int) -> FoldPlan:
    """Per-side seeded shuffle, then round-robin assignment to 3 folds, so all
    8 epochs of a trial land in one fold and per-side sizes differ by <= 1."""
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(FOLD_K)]
    for label in (RIGHT, LEFT):
        ids = np.array(sorted(t.trial_id for t in dataset.trials if t.label == label))
        if len(ids) < FOLD_K:
            raise ValueError(f"need >= {FOLD_K} trials of label {label}, got {len(ids)}")
        perm = rng.permutation(len(ids))
        for i, tid in enumerate(ids[perm]):
            folds[i % FOLD_K].append(int(tid))
    return FoldPlan(folds=[np.array(sorted(f)) for f in folds], seed=seed)


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, precision, recall, F-score with Positive = Right; any 0/0
    ratio is defined as 0 and the metric name is recorded as degenerate."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    degenerate = []
    accuracy = (cm.tp + cm.tn) / cm.total
    if cm.tp + cm.fp == 0:
        precision = 0.0
        degenerate.append("precision")
    else:
        precision = cm.tp / (cm.tp + cm.fp)
    if cm.tp + cm.fn == 0:
        recall = 0.0
        degenerate.append("recall")
    else:
        recall = cm.tp / (cm.tp + cm.fn)
    if precision + recall == 0:
        f_score = 0.0
        degenerate.append("f_score")
    else:
        f_score = 2.0 * precision * recall / (precision + recall)
    return Metrics(accuracy, precision, recall, f_score, tuple(degenerate))


def _confusion(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionMatrix:
    return ConfusionMatrix(
        tp=int(((y_true == RIGHT) & (y_pred == RIGHT)).sum()),
        fp=int(((y_true == LEFT) & (y_pred == RIGHT)).sum()),
        fn=int(((y_true == RIGHT) & (y_pred == LEFT)).sum()),
        tn=int(((y_true == LEFT) & (y_pred == LEFT)).sum()),
    )


def _epoch_folds(fm: features.FeatureMatrix, seed: int) -> list:
    """Row-index folds stratified per side, ignoring trial boundaries."""
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(FOLD_K)]
    for label in (RIGHT, LEFT):
        rows = np.nonzero(fm.y == label)[0]
        perm = rng.permutation(len(rows))
        for i, r in enumerate(rows[perm]):
            folds[i % FOLD_K].append(int(r))
    return [np.array(sorted(f)) for f in folds]


def run_cv(dataset: Dataset, cfg: classifiers.TrainConfig, seed: int,
           kinds=None, ranking_source: str = "holdout",
           log_power: bool = False, epoch_folds: bool = False,
           filter_spec=DEFAULT_FILTER) -> dict:
    """Full cross-validated evaluation; returns the report as a plain dict.

    Per fold: fit the scaler on training rows only, train the requested models
    (default all five), rank them for the rule ensemble on an inner
    calibration holdout (or on training accuracy with ranking_source="train"),
    refit on the whole training fold, then score the held-out fold's epochs.
    """
    if ranking_source not in ("holdout", "train"):
        raise ValueError(f"ranking_source must be 'holdout' or 'train', got {ranking_source!r}")
    kinds = classifiers.MODEL_KINDS if kinds is None else tuple(kinds)
    use_rule = len(kinds) >= 3
    low, high, taps = filter_spec
    filt = dsp.design_bandpass(FS, low, high, taps)
    fm = features.build_feature_matrix(dataset, filt, log_power=log_power)
    trial_label = {t.trial_id: t.label for t in dataset.trials}

    if epoch_folds:
        row_folds = _epoch_folds(fm, seed)
    else:
        plan = make_folds(dataset, seed)
        row_folds = [np.nonzero(np.isin(fm.trial_ids, fold))[0] for fold in plan.folds]

    per_fold_cms = {kind: [] for kind in (*kinds, *(["Rule"] if use_rule else []))}
    for f in range(FOLD_K):
        test_rows = row_folds[f]
        train_rows = np.sort(np.concatenate([row_folds[g] for g in range(FOLD_K) if g != f]))
        X_train, y_train = fm.X[train_rows], fm.y[train_rows]
        X_test, y_test = fm.X[test_rows], fm.y[test_rows]

        scaler = features.fit_scaler(X_train)
        Z_train = features.apply_scaler(scaler, X_train)
        Z_test = features.apply_scaler(scaler, X_test)
        models = classifiers.train_all(Z_train, y_train, cfg, kinds=kinds)

        ensemble = None
        if use_rule:
            if ranking_source == "train":
                ranking = fusion.rank_models(models, Z_train, y_train)
                ensemble = ranking
            else:
                if epoch_folds:
                    # trial structure is dissolved; hold out rows directly
                    fit_idx, calib_idx = _holdout_rows(y_train, [seed, f])
                else:
                    fold_ids = np.unique(fm.trial_ids[train_rows])
                    fold_labels = np.array([trial_label[t] for t in fold_ids])
                    fit_ids, calib_ids = fusion.make_calibration_split(
                        fold_ids, fold_labels, [seed, f])
                    fit_idx = np.isin(fm.trial_ids[train_rows], fit_ids)
                    calib_idx = np.isin(fm.trial_ids[train_rows], calib_ids)
                inner_scaler = features.fit_scaler(X_train[fit_idx])
                inner_models = classifiers.train_all(
                    features.apply_scaler(inner_scaler, X_train[fit_idx]),
                    y_train[fit_idx], cfg, kinds=kinds)
                ranking = fusion.rank_models(
                    inner_models,
                    features.apply_scaler(inner_scaler, X_train[calib_idx]),
                    y_train[calib_idx])
                ensemble = fusion.replace_models(ranking, models)

        for kind in kinds:
            pred = classifiers.predict(models[kind], Z_test)
            per_fold_cms[kind].append(_confusion(y_test, pred))
        if use_rule:
            pred = fusion.rule_predict(ensemble, Z_test)
            per_fold_cms["Rule"].append(_confusion(y_test, pred))

    report = {
        "subject_id": dataset.subject_id,
        "seed": seed,
        "classifiers": [_summarize(kind, per_fold_cms[kind])
                        for kind in REPORT_ORDER if kind in per_fold_cms],
    }
    if not use_rule:
        report["rule_error"] = "rule fusion needs >= 3 classifiers"
    return report


def _holdout_rows(y_train: np.ndarray, seed) -> tuple:
    """Stratified 25% row holdout used for ranking when folds are epoch-level."""
    rng = np.random.default_rng(seed)
    calib = np.zeros(len(y_train), dtype=bool)
    for label in (RIGHT, LEFT):
        rows = np.nonzero(y_train == label)[0]
        perm = rng.permutation(len(rows))
        calib[rows[perm[:max(1, len(rows) // 4)]]] = True
    return ~calib, calib


def _summarize(kind: str, cms: list) -> dict:
    values = {name: [] for name in METRIC_NAMES}
    for cm in cms:
        m = compute_metrics(cm).as_dict()
        for name in METRIC_NAMES:
            values[name].append(m[name] * 100.0)
    entry = {"kind": kind}
    for name in METRIC_NAMES:
        arr = np.array(values[name])
        entry[f"{name}_mean"] = float(arr.mean())
        entry[f"{name}_std"] = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    entry["per_fold"] = [{"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn}
                         for cm in cms]
    return entry


def batch_report(reports: list) -> dict:
    """Combine per-subject reports: per classifier, mean over all subject-fold
    cells plus standard deviations at both granularities (over cells and over
    per-subject means)."""
    if not reports:
        raise ValueError("no reports to combine")
    kinds = [e["kind"] for e in reports[0]["classifiers"]]
    for rep in reports[1:]:
        if [e["kind"] for e in rep["classifiers"]] != kinds:
            raise ValueError("reports disagree on classifier sets")
    combined = {"subjects": [rep["subject_id"] for rep in reports],
                "n_subjects": len(reports), "classifiers": []}
    for kind in kinds:
        entry = {"kind": kind}
        for name in METRIC_NAMES:
            cells, subject_means = [], []
            for rep in reports:
                cls = next(e for e in rep["classifiers"] if e["kind"] == kind)
                fold_vals = [compute_metrics(ConfusionMatrix(**cm)).as_dict()[name] * 100.0
                             for cm in cls["per_fold"]]
                cells.extend(fold_vals)
                subject_means.append(float(np.mean(fold_vals)))
            cells = np.array(cells)
            subject_means = np.array(subject_means)
            entry[f"{name}_mean"] = float(cells.mean())
            entry[f"{name}_std_folds"] = float(cells.std(ddof=1)) if len(cells) > 1 else 0.0
            entry[f"{name}_std_subjects"] = (float(subject_means.std(ddof=1))
                                             if len(subject_means) > 1 else 0.0)
        combined["classifiers"].append(entry)
    return combined


def report_to_csv(report: dict, path) -> Path:
    """Table-shaped CSV: one row per classifier, mean and std per metric."""
    path = Path(path)
    std_keys = [k for k in report["classifiers"][0]
                if k.startswith("accuracy_std")]
    cols = ["classifier"]
    for name in METRIC_NAMES:
        cols.append(f"{name}_mean")
        for sk in std_keys:
            cols.append(name + sk[len("accuracy"):])
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for entry in report["classifiers"]:
            row = [entry["kind"]]
            for col in cols[1:]:
                row.append(f"{entry[col]:.17g}")
            fh.write(",".join(row) + "\n")
    return path


def format_table(report: dict) -> str:
    """Human-readable summary: classifier rows, mean +/- std percent."""
    std_suffix = "_std" if "accuracy_std" in report["classifiers"][0] else "_std_folds"
    lines = [f"{'classifier':<12}" + "".join(f"{n:>22}" for n in METRIC_NAMES)]
    for entry in report["classifiers"]:
        cells = [f"{entry[n + '_mean']:.2f} +/- {entry[n + std_suffix]:.2f}"
                 for n in METRIC_NAMES]
        lines.append(f"{entry['kind']:<12}" + "".join(f"{c:>22}" for c in cells))
    return "\n".join(lines)
