#!/usr/bin/env python3
"""Generate a synthetic benchmark-schema CSV for development and CI.

The file has the same header, key set, and per-row layout as the real
51-subject benchmark, so every pipeline stage runs unchanged against it.
"""

import argparse

from keyauth.synth import synth_dataset, write_benchmark_csv


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="synthetic-benchmark.csv")
    parser.add_argument("--subjects", type=int, default=51)
    parser.add_argument("--reps", type=int, default=400)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    ds = synth_dataset(n_subjects=args.subjects, reps_per_subject=args.reps,
                       seed=args.seed)
    write_benchmark_csv(ds, args.out)
    print(f"wrote {args.out}: {len(ds.subjects)} subjects x {args.reps} reps")


if __name__ == "__main__":
    main()
