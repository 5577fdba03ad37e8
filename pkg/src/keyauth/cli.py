"""Command-line driver: ingest | eval-anomaly | train | serve | report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
Every run prints its effective configuration so any reported number can be
reproduced from the log line.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import classifiers, detectors, evaluation, nn, synth
from .dataset import (Dataset, build_negative_dataset, filter_outliers,
                      load_dataset, make_anomaly_splits, make_class_split,
                      parse_csv, save_dataset)
from .errors import KeyauthError
from .features import FEATURE_NAMES

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

ALL_DETECTORS = list(detectors.STAT_KINDS) + ["ocsvm"]
MODELS = ("fc", "cnn1d", "cnn1d-neg", "rf", "svm")


def _print_config(args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"[config] {json.dumps(cfg, default=str)}")


def _load_any(path: str) -> Dataset:
    """Accept either the raw benchmark CSV or a normalized dataset file."""
    first = Path(path).open(encoding="utf-8").readline()
    if first.startswith("subject,"):
        return parse_csv(path)
    return load_dataset(path)


def cmd_ingest(args: argparse.Namespace) -> int:
    ds = parse_csv(args.csv)
    removed = 0
    if args.outlier_z is not None:
        ds, removed = filter_outliers(ds, z_cut=args.outlier_z)
    save_dataset(ds, args.out)
    print(f"subjects={len(ds.subjects)} samples={len(ds)} removed={removed}")
    print(f"wrote {args.out}")
    return 0


def cmd_eval_anomaly(args: argparse.Namespace) -> int:
    ds = _load_any(args.dataset)
    if args.subjects:
        wanted = set(args.subjects.split(","))
        ds = Dataset.from_samples([s for s in ds.samples if s.subject in wanted])
    splits = make_anomaly_splits(ds, train_reps=args.train_reps,
                                 impostor_reps=args.impostor_reps)
    kinds = args.detectors.split(",") if args.detectors else ALL_DETECTORS
    factories = evaluation.detector_factories(
        kinds, z_threshold=args.z_threshold, nu=args.nu)
    rows, details = evaluation.run_anomaly_benchmark(splits, factories)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.export_detector_table(rows, out / "detector_table.csv")
    if args.roc:
        evaluation.export_roc_points(details, out / "roc")
    for r in sorted(rows, key=lambda r: -r.mean_eer):
        print(f"{r.detector:20s} EER {r.mean_eer:.3f} (sd {r.sd_eer:.3f})  "
              f"ZFR {r.mean_zfr:.3f} (sd {r.sd_zfr:.3f})  n={r.n_subjects}")
        for failure in r.failures:
            print(f"  [failed cell] {failure}")
    print(f"wrote {out / 'detector_table.csv'}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    ds = _load_any(args.dataset)
    if args.outlier_z is not None:
        ds, removed = filter_outliers(ds, z_cut=args.outlier_z)
        print(f"outlier filtering removed {removed} samples")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = nn.TrainConfig(epochs=args.epochs, seed=args.seed, lr=args.lr)
    if args.model == "cnn1d-neg":
        split = build_negative_dataset(ds, seed=args.seed)
    else:
        split = make_class_split(ds, seed=args.seed)
    if args.model in ("fc", "cnn1d", "cnn1d-neg"):
        arch = "cnn1d" if args.model.startswith("cnn1d") else "fc"
        model = classifiers.train_nn(arch, split, cfg)
        nn.save_network(model.layers, out / f"{args.model}.model")
        print(f"test accuracy {model.metrics.accuracy:.4f}")
        if args.model == "cnn1d-neg":
            preds = classifiers.predict_nn(
                model.layers, model.standardizer.apply(split.test_x))
            report = classifiers.evaluate_negative_class(
                preds, split.test_y, split.n_classes)
            print(f"negative class: recall {report.recall:.4f} "
                  f"precision {report.precision:.4f} f {report.f_score:.4f}")
    elif args.model == "rf":
        forest = classifiers.train_random_forest(
            split, n_trees=args.trees, max_features=args.max_features,
            seed=args.seed)
        acc = float((classifiers.predict_forest(forest, split.test_x)
                     == split.test_y).mean())
        print(f"test accuracy {acc:.4f}")
    elif args.model == "svm":
        svm = classifiers.train_multiclass_svm(
            split, lam=args.svm_lambda, epochs=args.epochs, seed=args.seed)
        acc = float((classifiers.predict_svm(svm, split.test_x)
                     == split.test_y).mean())
        print(f"test accuracy {acc:.4f}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import UserStore, create_app

    store = UserStore(args.store, min_enroll=args.min_enroll)
    ui = Path(args.ui) if args.ui else None
    app = create_app(store, ui_dir=ui, default_detector=args.detector)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    """Export per-feature distribution summaries (plot data) as CSV."""
    ds = _load_any(args.dataset)
    mat = ds.matrix()
    lines = ["feature,mean,std,min,p25,median,p75,max"]
    for i, name in enumerate(FEATURE_NAMES):
        col = mat[:, i]
        q = np.percentile(col, [25, 50, 75])
        lines.append(f"{name},{col.mean():.6f},{col.std():.6f},{col.min():.6f},"
                     f"{q[0]:.6f},{q[1]:.6f},{q[2]:.6f},{col.max():.6f}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.out} ({len(FEATURE_NAMES)} features, {len(ds)} samples)")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    ds = synth.synth_dataset(n_subjects=args.subjects, reps_per_subject=args.reps,
                             seed=args.seed)
    synth.write_benchmark_csv(ds, args.out)
    print(f"wrote {args.out}: {len(ds.subjects)} subjects x {args.reps} reps")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keyauth",
        description="Keystroke-dynamics anomaly detection, classification, and live service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse the benchmark CSV into the normalized dataset file")
    p.add_argument("csv")
    p.add_argument("--out", required=True)
    p.add_argument("--outlier-z", type=float, default=None,
                   help="per-subject z-score cut; omit to keep all samples")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("eval-anomaly", help="run the per-subject anomaly benchmark")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--detectors", default=",".join(detectors.STAT_KINDS),
                   help=f"comma list from {ALL_DETECTORS}")
    p.add_argument("--subjects", default=None, help="comma list; default all")
    p.add_argument("--train-reps", type=int, default=200)
    p.add_argument("--impostor-reps", type=int, default=5)
    p.add_argument("--z-threshold", type=float, default=detectors.DEFAULT_Z_THRESHOLD)
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--roc", action="store_true", help="also write per-subject ROC CSVs")
    p.set_defaults(func=cmd_eval_anomaly)

    p = sub.add_parser("train", help="train a multi-class identification model")
    p.add_argument("dataset")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-features", type=int, default=5)
    p.add_argument("--svm-lambda", type=float, default=0.01)
    p.add_argument("--outlier-z", type=float, default=4.0,
                   help="classifier runs filter outliers by default")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="run the enroll/verify HTTP service")
    p.add_argument("--store", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--detector", default="scaled_manhattan")
    p.add_argument("--min-enroll", type=int, default=10)
    p.add_argument("--ui", default=None, help="directory of built web UI to mount at /ui")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="export per-feature distribution summary CSV")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic benchmark-schema CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=51)
    p.add_argument("--reps", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    _print_config(args)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyauthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - map anything else to runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
