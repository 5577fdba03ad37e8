"""Synthetic benchmark-schema data for tests, fixtures, and offline experiments.

The real 51-subject benchmark is distributed separately; this generator
produces files with the identical schema and physically consistent timings
(UD = DD - H) so every pipeline stage can be exercised without it. Subject
separation is controlled by `subject_spread` relative to `within_noise`.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import Dataset
from .features import (DD_INDICES, FEATURE_NAMES, HOLD_INDICES, KEY_SEQUENCE,
                       KeystrokeSample, UD_INDICES)

N_KEYS = len(KEY_SEQUENCE)


def synth_dataset(n_subjects: int = 51, reps_per_subject: int = 400,
                  seed: int = 0, subject_spread: float = 1.0,
                  within_noise: float = 1.0) -> Dataset:
    """Generate subjects with individual hold/latency profiles plus session drift."""
    rng = np.random.default_rng(seed)
    samples = []
    n_sessions = 8
    reps_per_session = -(-reps_per_subject // n_sessions)  # ceil
    for s in range(n_subjects):
        subject = f"s{s + 2:03d}"
        hold_mean = 0.09 + subject_spread * rng.normal(0.0, 0.02, size=N_KEYS)
        dd_mean = 0.25 + subject_spread * rng.normal(0.0, 0.06, size=N_KEYS - 1)
        hold_sd = np.abs(rng.normal(0.012, 0.004, size=N_KEYS)) * within_noise + 1e-4
        dd_sd = np.abs(rng.normal(0.035, 0.010, size=N_KEYS - 1)) * within_noise + 1e-4
        rep = 0
        for session in range(1, n_sessions + 1):
            drift = rng.normal(0.0, 0.008)
            for _ in range(reps_per_session):
                if rep >= reps_per_subject:
                    break
                rep += 1
                hold = np.maximum(hold_mean + rng.normal(0.0, hold_sd), 0.01)
                dd = np.maximum(dd_mean + drift + rng.normal(0.0, dd_sd), 0.02)
                vec = np.empty(len(FEATURE_NAMES))
                vec[list(HOLD_INDICES)] = hold
                vec[list(DD_INDICES)] = dd
                vec[list(UD_INDICES)] = dd - hold[:-1]
                samples.append(KeystrokeSample(
                    subject=subject, session=session,
                    repetition=(rep - 1) % 50 + 1, vector=vec))
    return Dataset.from_samples(samples)


def write_benchmark_csv(ds: Dataset, path: str | Path) -> None:
    """Write a dataset in the benchmark CSV schema."""
    lines = ["subject,sessionIndex,rep," + ",".join(FEATURE_NAMES)]
    for s in ds.samples:
        cells = [s.subject, str(s.session), str(s.repetition)]
        cells += [f"{v:.6f}" for v in s.vector]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
