"""Acceptance gate. Each test checks one numbered behavioral criterion of the
package and emits a single PASS/FAIL line; run with -v for one line per
criterion."""

import itertools
import json
import time

import numpy as np
import pytest

from motorclass import classifiers, cli, dataset, dsp, evaluation, features, fusion, stats
from motorclass.dataset import LEFT, RIGHT

import oracles


def _gate(num, name, problems, elapsed=None, budget=None):
    if budget is not None and elapsed is not None and elapsed > budget:
        problems.append(f"took {elapsed:.1f}s, budget {budget:.0f}s")
    verdict = "PASS" if not problems else "FAIL: " + "; ".join(problems)
    print(f"criterion {num} ({name}): {verdict}")
    assert not problems, f"criterion {num} ({name}): {problems}"


def _accuracy(report, kind):
    entry = next(e for e in report["classifiers"] if e["kind"] == kind)
    return entry["accuracy_mean"]


def test_criterion_01_rule_table_equivalence():
    t0 = time.perf_counter()
    problems = []

    def constant(vote_positive):
        b = 1.0 if vote_positive else -1.0
        return classifiers.TrainedModel("SVM", {"w": np.array([0.0]), "b": b})

    row = np.array([0.0])
    for a, b, c in itertools.product((True, False), repeat=3):
        ens = fusion.RuleEnsemble(ranked=[constant(a), constant(b), constant(c)],
                                  ranked_kinds=("SVM", "LDA", "Boosting"),
                                  calibration_accuracy={})
        got = fusion.rule_predict(ens, row)
        want = RIGHT if (a and (b or c)) else LEFT
        if got != want:
            problems.append(f"triple {(a, b, c)} -> {got}, want {want}")
    _gate(1, "rule-table equivalence", problems, time.perf_counter() - t0, 1.0)


def test_criterion_02_fft_oracle():
    t0 = time.perf_counter()
    problems = []
    rng = np.random.default_rng(0)
    lengths = [8, 16, 32, 64]
    for i in range(100):
        n = lengths[i % len(lengths)]
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        got = dsp.fft(x)
        ref = oracles.brute_dft(x)
        rel = float(np.abs(got - ref).max() / np.abs(ref).max())
        if rel > 1e-9:
            problems.append(f"vector {i} (n={n}): relative error {rel:.2e}")
    n = 2
    while n <= 1024:
        x = rng.normal(size=n)
        X = dsp.fft(x)
        lhs = float(np.sum(np.abs(x) ** 2))
        rhs = float(np.sum(np.abs(X) ** 2) / n)
        if abs(lhs - rhs) > 1e-9 * lhs:
            problems.append(f"Parseval fails at n={n}")
        n *= 2
    _gate(2, "FFT matches brute-force DFT", problems, time.perf_counter() - t0, 5.0)


def test_criterion_03_filter_response(bp_filter):
    t0 = time.perf_counter()
    problems = []
    for f in (5.0, 10.0, 25.0, 40.0):
        db = 20.0 * np.log10(oracles.freq_response(bp_filter.taps, 512, f))
        if abs(db) > 0.5:
            problems.append(f"passband {f} Hz: {db:+.3f} dB")
    for f in (0.1, 56.0, 100.0):
        db = 20.0 * np.log10(oracles.freq_response(bp_filter.taps, 512, f))
        if db > -40.0:
            problems.append(f"stopband {f} Hz: only {-db:.1f} dB down")
    _gate(3, "band-pass response", problems, time.perf_counter() - t0, 5.0)


def test_criterion_04_t_distribution_oracle():
    t0 = time.perf_counter()
    problems = []
    for df in (1, 3, 10, 100, 639):
        for t in (0.0, 0.5, 1.0, 2.0, 3.0, 5.0):
            got = stats.t_pvalue(t, df)
            ref = oracles.t_two_tailed_p(t, df)
            if abs(got - ref) > 5e-4:
                problems.append(f"df={df}, t={t}: {got:.6f} vs {ref:.6f}")
        if abs(stats.t_pvalue(0.0, df) - 1.0) > 1e-12:
            problems.append(f"p(0, {df}) != 1")
    if abs(stats.t_pvalue(1.0, 1) - 0.5) > 1e-9:
        problems.append("p(1, 1) != 0.5")
    _gate(4, "t-distribution tail probabilities", problems,
          time.perf_counter() - t0, 5.0)


def test_criterion_05_null_calibration(request):
    t0 = time.perf_counter()
    problems = []
    fractions = request.getfixturevalue("null_fractions")
    mean_frac = float(np.mean(fractions))
    if not 0.02 <= mean_frac <= 0.08:
        problems.append(f"significant-cell fraction {mean_frac:.4f} outside [0.02, 0.08]")
    for report in request.getfixturevalue("randomized_reports"):
        for entry in report["classifiers"]:
            acc = entry["accuracy_mean"]
            if not 40.0 <= acc <= 60.0:
                problems.append(f"seed {report['seed']} {entry['kind']}: "
                                f"{acc:.1f}% on shuffled labels")
    _gate(5, "null-data calibration", problems, time.perf_counter() - t0, 120.0)


def test_criterion_06_signal_recovery(request):
    t0 = time.perf_counter()
    problems = []
    reports = request.getfixturevalue("recovery_reports")
    means = {kind: float(np.mean([_accuracy(r, kind) for r in reports]))
             for kind in evaluation.REPORT_ORDER}
    for kind in ("SVM", "LDA", "KNN", "Boosting", "Rule"):
        if means[kind] < 95.0:
            problems.append(f"{kind}: {means[kind]:.2f}% < 95%")
    best_single = max(means[k] for k in evaluation.REPORT_ORDER if k != "Rule")
    if means["Rule"] < best_single - 1.0:
        problems.append(f"rule {means['Rule']:.2f}% trails best single "
                        f"{best_single:.2f}% by more than 1 point")
    _gate(6, "planted-asymmetry recovery", problems, time.perf_counter() - t0, 300.0)


def test_criterion_07_metric_identities():
    problems = []
    m = evaluation.compute_metrics(evaluation.ConfusionMatrix(tp=5, fp=0, fn=0, tn=5))
    if (m.accuracy, m.precision, m.recall, m.f_score) != (1.0, 1.0, 1.0, 1.0):
        problems.append("perfect matrix does not give all 1.0")
    m = evaluation.compute_metrics(evaluation.ConfusionMatrix(tp=3, fp=1, fn=2, tn=4))
    if m.accuracy != 0.7 or m.precision != 0.75 or m.recall != 0.6:
        problems.append(f"3/1/2/4 gives {m.accuracy}/{m.precision}/{m.recall}")
    if abs(m.f_score - 2.0 / 3.0) > 1e-12:
        problems.append(f"3/1/2/4 F-score {m.f_score!r} != 2/3")
    _gate(7, "confusion-matrix metric identities", problems)


def test_criterion_08_determinism_and_no_leakage(tmp_path, monkeypatch):
    problems = []
    ds = dataset.generate_synthetic(
        dataset.SynthConfig(n_trials_per_side=4, asymmetry_db=6.0, seed=5))

    # byte-identical reports for identical seeds, through the CLI
    manifest = dataset.save_dataset(ds, tmp_path / "ds")
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = cli.main(["evaluate", str(manifest), "--out", str(out)])
        if code != 0:
            problems.append(f"evaluate exited {code}")
        blobs.append((out / "report.json").read_bytes())
    if blobs[0] != blobs[1]:
        problems.append("same-seed reports are not byte-identical")

    # instrumented run: record every matrix reaching scaler fitting, model
    # training, and ranking
    captured = {"scaler": [], "train": [], "rank": []}
    real_fit = features.fit_scaler
    real_train = classifiers.train_all
    real_rank = fusion.rank_models

    def spy_fit(X):
        captured["scaler"].append(np.array(X, copy=True))
        return real_fit(X)

    def spy_train(X, y, cfg, kinds=None):
        captured["train"].append(np.array(X, copy=True))
        return real_train(X, y, cfg, kinds=kinds)

    def spy_rank(models, calib_X, calib_y):
        captured["rank"].append(np.array(calib_X, copy=True))
        return real_rank(models, calib_X, calib_y)

    monkeypatch.setattr(features, "fit_scaler", spy_fit)
    monkeypatch.setattr(classifiers, "train_all", spy_train)
    monkeypatch.setattr(fusion, "rank_models", spy_rank)
    evaluation.run_cv(ds, classifiers.TrainConfig(seed=0), seed=0)
    monkeypatch.undo()

    if [len(captured[k]) for k in ("scaler", "train", "rank")] != [6, 6, 3]:
        problems.append("unexpected call pattern: "
                        f"{[len(captured[k]) for k in ('scaler', 'train', 'rank')]}")
        _gate(8, "determinism and no leakage", problems)

    low, high, taps = evaluation.DEFAULT_FILTER
    fm = features.build_feature_matrix(ds, dsp.design_bandpass(dataset.FS, low, high, taps))
    plan = evaluation.make_folds(ds, seed=0)
    row_folds = [np.nonzero(np.isin(fm.trial_ids, fold))[0] for fold in plan.folds]

    def match(rows, label):
        idx = []
        for r in rows:
            d = np.abs(fm.X - r).max(axis=1)
            i = int(np.argmin(d))
            if d[i] > 1e-6:
                problems.append(f"{label}: captured row matches no dataset row")
            idx.append(i)
        return set(idx)

    def unscale(Z, scaler):
        std = np.where(scaler.std < 1e-12, 1.0, scaler.std)
        return Z * std + scaler.mean

    for f in range(3):
        test_idx = set(row_folds[f].tolist())
        train_idx = set(np.concatenate(
            [row_folds[g] for g in range(3) if g != f]).tolist())
        outer_raw, inner_raw = captured["scaler"][2 * f], captured["scaler"][2 * f + 1]
        outer_idx = match(outer_raw, f"fold {f} outer scaler")
        if outer_idx != train_idx:
            problems.append(f"fold {f}: scaler fitted on wrong row set")
        inner_idx = match(inner_raw, f"fold {f} inner scaler")
        if inner_idx & test_idx:
            problems.append(f"fold {f}: test rows leaked into inner scaler")
        checks = (
            (captured["train"][2 * f], real_fit(outer_raw), "training", train_idx),
            (captured["train"][2 * f + 1], real_fit(inner_raw), "inner training",
             inner_idx),
            (captured["rank"][f], real_fit(inner_raw), "ranking",
             train_idx - inner_idx),
        )
        for Z, scaler, label, allowed in checks:
            got = match(unscale(Z, scaler), f"fold {f} {label}")
            if got & test_idx:
                problems.append(f"fold {f}: test rows leaked into {label}")
            if not got <= allowed:
                problems.append(f"fold {f}: {label} saw rows outside its split")
    _gate(8, "determinism and no leakage", problems)


def test_criterion_09_counting_contract(request):
    problems = []
    fm = request.getfixturevalue("fm80")
    if fm.n_rows != 640:
        problems.append(f"{fm.n_rows} feature rows, want 640")
    n_right = int((fm.y == RIGHT).sum())
    n_left = int((fm.y == LEFT).sum())
    if (n_right, n_left) != (320, 320):
        problems.append(f"rows per side {n_right}/{n_left}, want 320/320")
    if len({int(t) for t in fm.trial_ids}) != 80:
        problems.append("trial count is not 80")
    _gate(9, "epoch counting contract", problems)
