"""Command-line front end: synth, validate, features, ttest, bands, evaluate,
report. JSON config with flag overrides; exit codes 0 ok, 1 usage, 2 data,
3 numeric."""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from . import classifiers, dataset, dsp, evaluation, features, fusion, stats

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DEFAULTS = {
    "filter": {"low_hz": 1.0, "high_hz": 50.0, "taps": 1691},
    "features": {"scale": "linear", "overlap": 0.0},
    "stats": {"alpha": 0.05, "pairing": "rank", "level": "epoch"},
    "train": {"svm_c": 1.0, "svm_epochs": 200, "knn_k": 5, "boost_rounds": 50,
              "lda_gamma": 1e-3, "nb_floor_scale": 1e-9, "seed": 0},
    "cv": {"k": 3, "seed": 0, "granularity": "trial"},
    "fusion": {"ranking_source": "holdout"},
    "synth": {"n_trials_per_side": 40, "asymmetry_db": 0.0, "target_band": "alpha",
              "target_channels": ["C3", "C4"], "noise_model": 1.0, "seed": 0},
    "io": {"input": None, "output": None},
}

_KIND_ALIASES = {
    "svm": "SVM", "knn": "KNN", "naivebayes": "NaiveBayes", "nb": "NaiveBayes",
    "boosting": "Boosting", "boost": "Boosting", "lda": "LDA",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _merge_config(path) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        user = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise UsageError("config root must be a JSON object")
    for section, values in user.items():
        if section not in cfg:
            raise UsageError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise UsageError(f"config section {section!r} must be an object")
        for key, value in values.items():
            if key not in cfg[section]:
                raise UsageError(f"unknown config key {section}.{key}")
            cfg[section][key] = value
    return cfg


def _validate_config(cfg: dict) -> None:
    if cfg["features"]["scale"] not in ("linear", "db"):
        raise UsageError("features.scale must be 'linear' or 'db'")
    if cfg["features"]["overlap"] != 0.0:
        raise UsageError("features.overlap: only 0.0 (non-overlapping epochs) is supported")
    if cfg["stats"]["pairing"] != "rank":
        raise UsageError("stats.pairing: only 'rank' (acquisition order) is supported")
    if cfg["stats"]["level"] not in ("epoch", "trial"):
        raise UsageError("stats.level must be 'epoch' or 'trial'")
    if cfg["cv"]["k"] != evaluation.FOLD_K:
        raise UsageError(f"cv.k: only {evaluation.FOLD_K} folds are supported")
    if cfg["cv"]["granularity"] not in ("trial", "epoch"):
        raise UsageError("cv.granularity must be 'trial' or 'epoch'")
    if cfg["fusion"]["ranking_source"] not in ("holdout", "train"):
        raise UsageError("fusion.ranking_source must be 'holdout' or 'train'")
    if not 0.0 <= cfg["stats"]["alpha"] <= 1.0:
        raise UsageError("stats.alpha must be in [0, 1]")


def _apply_overrides(cfg: dict, args) -> None:
    if getattr(args, "seed", None) is not None:
        cfg["synth"]["seed"] = args.seed
        cfg["cv"]["seed"] = args.seed
        cfg["train"]["seed"] = args.seed
    if getattr(args, "scale", None):
        cfg["features"]["scale"] = args.scale
    if getattr(args, "alpha", None) is not None:
        cfg["stats"]["alpha"] = args.alpha
    if getattr(args, "level", None):
        cfg["stats"]["level"] = args.level
    if getattr(args, "ranking", None):
        cfg["fusion"]["ranking_source"] = args.ranking
    if getattr(args, "granularity", None):
        cfg["cv"]["granularity"] = args.granularity
    for attr, section_key in (("n_per_side", "n_trials_per_side"),
                              ("asymmetry_db", "asymmetry_db"),
                              ("band", "target_band"),
                              ("noise_exponent", "noise_model")):
        value = getattr(args, attr, None)
        if value is not None:
            cfg["synth"][section_key] = value
    if getattr(args, "channels", None):
        cfg["synth"]["target_channels"] = [c.strip() for c in args.channels.split(",")]


def _require_out(args, cfg) -> Path:
    out = args.out or cfg["io"]["output"]
    if out is None:
        raise UsageError("an output directory is required (--out or config io.output)")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_input(args, cfg) -> Path:
    manifest = getattr(args, "manifest", None) or cfg["io"]["input"]
    if manifest is None:
        raise UsageError("an input manifest is required (positional or config io.input)")
    return Path(manifest)


def _write_effective_config(cfg: dict, out: Path) -> None:
    (out / "effective_config.json").write_text(
        json.dumps(cfg, indent=2, sort_keys=True, default=str) + "\n")


def _filter_from(cfg: dict) -> dsp.FirFilter:
    f = cfg["filter"]
    return dsp.design_bandpass(dataset.FS, f["low_hz"], f["high_hz"], f["taps"])


def _feature_matrix(cfg: dict, manifest: Path, log_power: bool) -> features.FeatureMatrix:
    ds = dataset.load_dataset(manifest)
    return features.build_feature_matrix(ds, _filter_from(cfg), log_power=log_power)


def _parse_kinds(text):
    if not text:
        return None
    kinds = []
    for token in text.split(","):
        token = token.strip().lower()
        if token not in _KIND_ALIASES:
            raise UsageError(f"unknown classifier {token!r}; choose from "
                             f"{sorted(set(_KIND_ALIASES))}")
        kind = _KIND_ALIASES[token]
        if kind not in kinds:
            kinds.append(kind)
    return tuple(kinds)


def cmd_synth(args, cfg) -> int:
    out = _require_out(args, cfg)
    s = cfg["synth"]
    synth_cfg = dataset.SynthConfig(
        n_trials_per_side=int(s["n_trials_per_side"]),
        asymmetry_db=float(s["asymmetry_db"]),
        target_band=s["target_band"],
        target_channels=tuple(s["target_channels"]),
        noise_model=float(s["noise_model"]),
        seed=int(s["seed"]))
    ds = dataset.generate_synthetic(synth_cfg)
    manifest = dataset.save_dataset(ds, out)
    _write_effective_config(cfg, out)
    print(manifest)
    return EXIT_OK


def cmd_validate(args, cfg) -> int:
    ds = dataset.load_dataset(_require_input(args, cfg))
    problems = []
    for trial in ds.trials:
        for code, detail in dataset.validate_trial(trial):
            problems.append(f"trial {trial.trial_id}: {code}: {detail}")
    if problems:
        for line in problems:
            print(line, file=sys.stderr)
        raise dataset.DataError("InvalidTrials", f"{len(problems)} violation(s)")
    flagged = 0
    if args.amplitude_check:
        for trial in ds.trials:
            epochs = features.epoch_trial(np.asarray(trial.samples, dtype=float))
            flagged += int((np.abs(epochs).max(axis=(1, 2)) > args.amplitude_threshold).sum())
    msg = (f"ok: {len(ds.trials)} trials ({ds.count(dataset.RIGHT)} right, "
           f"{ds.count(dataset.LEFT)} left), {len(ds.channels)} channels, fs={dataset.FS}")
    if args.amplitude_check:
        msg += f", {flagged} epoch(s) above {args.amplitude_threshold:g} uV"
    print(msg)
    return EXIT_OK


def cmd_features(args, cfg) -> int:
    out = _require_out(args, cfg)
    fm = _feature_matrix(cfg, _require_input(args, cfg),
                         log_power=cfg["features"]["scale"] == "db")
    path = features.save_features_csv(fm, out / "features.csv")
    _write_effective_config(cfg, out)
    print(path)
    return EXIT_OK


def _significance(args, cfg):
    # stats always run on linear power: the difference map is in density units
    fm = _feature_matrix(cfg, _require_input(args, cfg), log_power=False)
    return stats.significance_map(fm, alpha=cfg["stats"]["alpha"],
                                  level=cfg["stats"]["level"])


def cmd_ttest(args, cfg) -> int:
    out = _require_out(args, cfg)
    smap = _significance(args, cfg)
    stats.save_map_csv(smap, out / "ttest_map.csv")
    stats.save_band_csv(stats.band_aggregate(smap), out / "ttest_bands.csv")
    stats.save_psd_curves_csv(smap, out / "psd_curves.csv")
    _write_effective_config(cfg, out)
    frac = float(smap.significant.mean())
    print(f"significant cells: {int(smap.significant.sum())}/{smap.significant.size} "
          f"({100.0 * frac:.1f}%) at alpha={smap.alpha:g}")
    return EXIT_OK


def cmd_bands(args, cfg) -> int:
    out = _require_out(args, cfg)
    smap = _significance(args, cfg)
    path = stats.save_band_csv(stats.band_aggregate(smap), out / "bands.csv")
    _write_effective_config(cfg, out)
    print(path)
    return EXIT_OK


def cmd_evaluate(args, cfg) -> int:
    out = _require_out(args, cfg)
    ds = dataset.load_dataset(_require_input(args, cfg))
    kinds = _parse_kinds(args.classifiers)
    train_cfg = classifiers.TrainConfig(**cfg["train"])
    f = cfg["filter"]
    report = evaluation.run_cv(
        ds, train_cfg, seed=int(cfg["cv"]["seed"]), kinds=kinds,
        ranking_source=cfg["fusion"]["ranking_source"],
        log_power=cfg["features"]["scale"] == "db",
        epoch_folds=cfg["cv"]["granularity"] == "epoch",
        filter_spec=(f["low_hz"], f["high_hz"], f["taps"]))
    report["config"] = cfg
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    evaluation.report_to_csv(report, out / "report.csv")
    _write_effective_config(cfg, out)
    print(evaluation.format_table(report))
    if "rule_error" in report:
        print(f"note: {report['rule_error']}; rule row omitted", file=sys.stderr)
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    out = _require_out(args, cfg)
    reports = []
    for p in args.reports:
        path = Path(p)
        if not path.exists():
            raise dataset.DataError("MissingFile", str(path))
        reports.append(json.loads(path.read_text()))
    combined = evaluation.batch_report(reports)
    combined["config"] = cfg
    (out / "combined_report.json").write_text(
        json.dumps(combined, indent=2, sort_keys=True) + "\n")
    evaluation.report_to_csv(combined, out / "combined_report.csv")
    _write_effective_config(cfg, out)
    print(evaluation.format_table(combined))
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "features": cmd_features,
    "ttest": cmd_ttest,
    "bands": cmd_bands,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--seed", type=int, help="override the command's seed")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads (results are thread-count independent)")
    common.add_argument("--out", type=Path, help="output directory")

    parser = _Parser(prog="motorclass",
                     description="EEG motor-attempt classification pipeline")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--n-per-side", type=int, dest="n_per_side")
    p.add_argument("--asymmetry-db", type=float, dest="asymmetry_db")
    p.add_argument("--band", help="target band (delta/theta/alpha/beta)")
    p.add_argument("--channels", help="comma-separated target channels")
    p.add_argument("--noise-exponent", type=float, dest="noise_exponent")

    p = sub.add_parser("validate", parents=[common], help="validate a dataset manifest")
    p.add_argument("manifest", nargs="?", type=Path)
    p.add_argument("--amplitude-check", action="store_true",
                   help="also flag epochs exceeding the amplitude threshold")
    p.add_argument("--amplitude-threshold", type=float, default=200.0)

    p = sub.add_parser("features", parents=[common], help="export the feature matrix CSV")
    p.add_argument("manifest", nargs="?", type=Path)
    p.add_argument("--scale", choices=("linear", "db"))

    for name, help_text in (("ttest", "per-(channel,bin) paired t-test CSVs"),
                            ("bands", "band-aggregated difference CSV")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("manifest", nargs="?", type=Path)
        p.add_argument("--alpha", type=float)
        p.add_argument("--level", choices=("epoch", "trial"))

    p = sub.add_parser("evaluate", parents=[common], help="cross-validated evaluation")
    p.add_argument("manifest", nargs="?", type=Path)
    p.add_argument("--classifiers", help="comma-separated subset (svm,knn,nb,boosting,lda)")
    p.add_argument("--ranking", choices=("holdout", "train"))
    p.add_argument("--granularity", choices=("trial", "epoch"), help="fold granularity")
    p.add_argument("--scale", choices=("linear", "db"))

    p = sub.add_parser("report", parents=[common], help="combine evaluation reports")
    p.add_argument("reports", nargs="+", type=Path)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required "
                             f"(one of: {', '.join(sorted(COMMANDS))})")
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = _merge_config(args.config)
        _apply_overrides(cfg, args)
        _validate_config(cfg)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except dataset.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (dsp.DspError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
