"""Shared fixtures. The Monte-Carlo style results (multi-seed generation runs,
cross-validation sweeps) are computed once per session and reused by both the
module tests and the acceptance gate."""

import numpy as np
import pytest

from motorclass import classifiers, dataset, dsp, evaluation, features, stats


@pytest.fixture(scope="session")
def bp_filter():
    return dsp.design_bandpass(512, 1.0, 50.0, 1691)


@pytest.fixture(scope="session")
def ds80():
    """80-trial separable dataset (6 dB alpha asymmetry on C3/C4), seed 0."""
    return dataset.generate_synthetic(dataset.SynthConfig(asymmetry_db=6.0, seed=0))


@pytest.fixture(scope="session")
def fm80(ds80, bp_filter):
    return features.build_feature_matrix(ds80, bp_filter)


@pytest.fixture(scope="session")
def null_fractions(bp_filter):
    """Significant-cell fraction at alpha=0.05 on 0 dB data, seeds 0..19."""
    out = []
    for seed in range(20):
        ds = dataset.generate_synthetic(dataset.SynthConfig(asymmetry_db=0.0, seed=seed))
        fm = features.build_feature_matrix(ds, bp_filter)
        out.append(float(stats.significance_map(fm, alpha=0.05).significant.mean()))
    return out


@pytest.fixture(scope="session")
def recovery_reports():
    """Cross-validation reports on 6 dB alpha C3/C4 datasets, seeds 0..4."""
    reports = []
    for seed in range(5):
        ds = dataset.generate_synthetic(dataset.SynthConfig(asymmetry_db=6.0, seed=seed))
        reports.append(evaluation.run_cv(ds, classifiers.TrainConfig(seed=seed), seed=seed))
    return reports


@pytest.fixture(scope="session")
def randomized_reports():
    """Cross-validation reports after a seeded label shuffle, seeds 0..4."""
    reports = []
    for seed in range(5):
        ds = dataset.generate_synthetic(dataset.SynthConfig(asymmetry_db=6.0, seed=seed))
        rng = np.random.default_rng(1000 + seed)
        labels = np.array([t.label for t in ds.trials])
        rng.shuffle(labels)
        for trial, label in zip(ds.trials, labels):
            trial.label = int(label)
        reports.append(evaluation.run_cv(ds, classifiers.TrainConfig(seed=seed), seed=seed))
    return reports


def accuracy_of(report: dict, kind: str) -> float:
    entry = next(e for e in report["classifiers"] if e["kind"] == kind)
    return entry["accuracy_mean"]
