#!/usr/bin/env python3
"""Reproduce the anomaly-detector EER/ZFR table and classifier accuracies.

Point --csv at the real 51-subject benchmark file to reproduce the published
numbers; without it the script falls back to a synthetic benchmark-schema
dataset so the full pipeline still runs end to end.

Outputs under --out:
  detector_table.csv   per-detector mean/sd EER and ZFR (sorted by mean EER)
  roc/                 per-subject ROC points (with --roc)
  classifier_runs.txt  per-model, per-seed test accuracies and their means
"""

import argparse
import time
from pathlib import Path

import numpy as np

from keyauth import classifiers, evaluation
from keyauth.dataset import (filter_outliers, make_anomaly_splits,
                             make_class_split, parse_csv)
from keyauth.detectors import STAT_KINDS
from keyauth.nn import TrainConfig
from keyauth.synth import synth_dataset


def anomaly_table(ds, out_dir, with_roc):
    smallest = min(len(ds.by_subject(s)) for s in ds.subjects)
    train_reps = min(200, smallest // 2)
    splits = make_anomaly_splits(ds, train_reps=train_reps, impostor_reps=5)
    factories = evaluation.detector_factories(list(STAT_KINDS) + ["ocsvm"])
    start = time.perf_counter()
    rows, details = evaluation.run_anomaly_benchmark(splits, factories)
    elapsed = time.perf_counter() - start
    evaluation.export_detector_table(rows, out_dir / "detector_table.csv")
    if with_roc:
        evaluation.export_roc_points(details, out_dir / "roc")
    print(f"anomaly benchmark: {len(splits)} subjects in {elapsed:.1f}s")
    for r in sorted(rows, key=lambda r: -r.mean_eer):
        print(f"  {r.detector:20s} EER {r.mean_eer:.3f}±{r.sd_eer:.3f}  "
              f"ZFR {r.mean_zfr:.3f}±{r.sd_zfr:.3f}")


def classifier_runs(ds, out_dir, seeds, epochs):
    ds, removed = filter_outliers(ds, z_cut=4.0)
    print(f"classifier runs (outlier filter removed {removed} rows)")
    lines = []
    for model_kind in ("fc", "cnn1d", "rf", "svm"):
        accs = []
        for seed in seeds:
            split = make_class_split(ds, seed=seed)
            if model_kind in ("fc", "cnn1d"):
                cfg = TrainConfig(seed=seed, epochs=epochs)
                accs.append(classifiers.train_nn(model_kind, split, cfg)
                            .metrics.accuracy)
            elif model_kind == "rf":
                forest = classifiers.train_random_forest(split, seed=seed)
                preds = classifiers.predict_forest(forest, split.test_x)
                accs.append(float((preds == split.test_y).mean()))
            else:
                svm = classifiers.train_multiclass_svm(split, seed=seed)
                preds = classifiers.predict_svm(svm, split.test_x)
                accs.append(float((preds == split.test_y).mean()))
        line = (f"{model_kind:6s} mean {np.mean(accs):.4f}  "
                f"runs {[round(a, 4) for a in accs]}")
        print("  " + line)
        lines.append(line)
    (out_dir / "classifier_runs.txt").write_text("\n".join(lines) + "\n")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--csv", default=None,
                        help="real benchmark CSV; omit for synthetic data")
    parser.add_argument("--out", default="results")
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--roc", action="store_true")
    parser.add_argument("--skip-classifiers", action="store_true")
    args = parser.parse_args()

    if args.csv:
        ds = parse_csv(args.csv)
        print(f"loaded {args.csv}: {len(ds.subjects)} subjects, {len(ds)} rows")
    else:
        ds = synth_dataset(n_subjects=51, reps_per_subject=400, seed=0)
        print("no --csv given: using a full-size synthetic dataset")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    anomaly_table(ds, out_dir, args.roc)
    if not args.skip_classifiers:
        seeds = [int(s) for s in args.seeds.split(",")]
        classifier_runs(ds, out_dir, seeds, args.epochs)


if __name__ == "__main__":
    main()
