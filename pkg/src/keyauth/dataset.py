"""Benchmark CSV ingestion, outlier filtering, and evaluation splits."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SchemaError, SubjectTooSmall
from .features import FEATURE_NAMES, N_FEATURES, KeystrokeSample

CSV_META_COLUMNS = ("subject", "sessionIndex", "rep")
DATASET_FORMAT_TAG = "keyauth-dataset v1"


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of keystroke samples, ordered by subject then (session, rep)."""

    samples: tuple[KeystrokeSample, ...]
    subjects: tuple[str, ...] = field(default=())

    @staticmethod
    def from_samples(samples: Sequence[KeystrokeSample]) -> "Dataset":
        ordered = sorted(samples, key=lambda s: (s.subject, s.session, s.repetition))
        subjects = tuple(sorted({s.subject for s in ordered}))
        return Dataset(tuple(ordered), subjects)

    def by_subject(self, subject: str) -> list[KeystrokeSample]:
        return [s for s in self.samples if s.subject == subject]

    def matrix(self) -> np.ndarray:
        return np.array([s.vector for s in self.samples])

    def __len__(self) -> int:
        return len(self.samples)


def parse_csv(path: str | Path) -> Dataset:
    """Parse the benchmark CSV (header: subject,sessionIndex,rep,<31 features>)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        expected = list(CSV_META_COLUMNS) + list(FEATURE_NAMES)
        if [h.strip() for h in header] != expected:
            raise SchemaError(
                f"{path}: header mismatch; expected {len(expected)} columns "
                f"starting {expected[:4]}, got {header[:4]} ({len(header)} columns)"
            )
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise SchemaError(f"{path}:{lineno}: expected {len(expected)} cells, got {len(row)}")
            try:
                samples.append(KeystrokeSample(
                    subject=row[0],
                    session=int(row[1]),
                    repetition=int(row[2]),
                    vector=np.array([float(c) for c in row[3:]]),
                ))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return Dataset.from_samples(samples)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write the versioned normalized dataset file (full float precision)."""
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# {DATASET_FORMAT_TAG}\n")
    buf.write("# columns: subject,sessionIndex,rep," + ",".join(FEATURE_NAMES) + "\n")
    for s in ds.samples:
        cells = [s.subject, str(s.session), str(s.repetition)]
        cells += [repr(float(v)) for v in s.vector]
        buf.write(",".join(cells) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


def load_dataset(path: str | Path) -> Dataset:
    """Reload a file written by save_dataset."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"# {DATASET_FORMAT_TAG}":
        raise SchemaError(f"{path}: not a {DATASET_FORMAT_TAG} file")
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line or line.startswith("#"):
            continue
        cells = line.split(",")
        if len(cells) != 3 + N_FEATURES:
            raise SchemaError(f"{path}:{lineno}: bad cell count {len(cells)}")
        samples.append(KeystrokeSample(
            subject=cells[0], session=int(cells[1]), repetition=int(cells[2]),
            vector=np.array([float(c) for c in cells[3:]]),
        ))
    return Dataset.from_samples(samples)


def filter_outliers(ds: Dataset, z_cut: float = 4.0) -> tuple[Dataset, int]:
    """Drop samples whose any feature has per-subject |z-score| above z_cut."""
    if not z_cut > 0:
        raise ValueError("z_cut must be positive")
    kept: list[KeystrokeSample] = []
    removed = 0
    for subject in ds.subjects:
        rows = ds.by_subject(subject)
        mat = np.array([s.vector for s in rows])
        mean = mat.mean(axis=0)
        std = mat.std(axis=0)
        std = np.where(std > 0, std, np.inf)  # constant column never triggers
        z = np.abs(mat - mean) / std
        bad = (z > z_cut).any(axis=1)
        removed += int(bad.sum())
        kept.extend(s for s, b in zip(rows, bad) if not b)
    return Dataset.from_samples(kept), removed


@dataclass(frozen=True)
class AnomalySplit:
    """Per-subject one-class split: train / genuine test / impostor test."""

    subject: str
    train: np.ndarray          # (n_train, 31)
    genuine_test: np.ndarray   # (n_genuine, 31)
    impostor_test: np.ndarray  # (n_impostor, 31)


def make_anomaly_splits(ds: Dataset, train_reps: int = 200,
                        impostor_reps: int = 5) -> list[AnomalySplit]:
    """Deterministic per-subject splits.

    First `train_reps` repetitions train, the rest are genuine test; the first
    `impostor_reps` rows of every other subject form the impostor test set.
    """
    per_subject: dict[str, np.ndarray] = {}
    for subject in ds.subjects:
        rows = ds.by_subject(subject)
        if len(rows) < train_reps + 1:
            raise SubjectTooSmall(
                f"subject {subject} has {len(rows)} samples, needs > {train_reps}")
        per_subject[subject] = np.array([s.vector for s in rows])
    splits = []
    for subject in ds.subjects:
        mat = per_subject[subject]
        impostors = np.vstack([
            per_subject[other][:impostor_reps]
            for other in ds.subjects if other != subject
        ])
        splits.append(AnomalySplit(
            subject=subject,
            train=mat[:train_reps],
            genuine_test=mat[train_reps:],
            impostor_test=impostors,
        ))
    return splits


@dataclass(frozen=True)
class ClassSplit:
    """Stratified multi-class split with a validation carve-out."""

    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    label_map: dict[str, int]

    @property
    def n_classes(self) -> int:
        return len(set(self.label_map.values()))


def _stratified_split(groups: dict[int, np.ndarray], label_map: dict[str, int],
                      seed: int) -> ClassSplit:
    """75/25 per class, then 10% of train as validation. Deterministic per seed."""
    rng = np.random.default_rng(seed)
    tr_x, tr_y, va_x, va_y, te_x, te_y = [], [], [], [], [], []
    for label in sorted(groups):
        mat = groups[label]
        perm = rng.permutation(len(mat))
        n_train = round(0.75 * len(mat))
        n_val = round(0.10 * n_train)
        train_idx = perm[:n_train]
        test_idx = perm[n_train:]
        val_idx = train_idx[:n_val]
        core_idx = train_idx[n_val:]
        tr_x.append(mat[core_idx]); tr_y.append(np.full(len(core_idx), label))
        va_x.append(mat[val_idx]); va_y.append(np.full(len(val_idx), label))
        te_x.append(mat[test_idx]); te_y.append(np.full(len(test_idx), label))
    return ClassSplit(
        train_x=np.vstack(tr_x), train_y=np.concatenate(tr_y).astype(np.int64),
        val_x=np.vstack(va_x), val_y=np.concatenate(va_y).astype(np.int64),
        test_x=np.vstack(te_x), test_y=np.concatenate(te_y).astype(np.int64),
        label_map=label_map,
    )


def make_class_split(ds: Dataset, seed: int = 0) -> ClassSplit:
    """All-subject identification split: one class per subject."""
    label_map = {subject: i for i, subject in enumerate(ds.subjects)}
    groups = {
        label_map[subject]: np.array([s.vector for s in ds.by_subject(subject)])
        for subject in ds.subjects
    }
    return _stratified_split(groups, label_map, seed)


NEGATIVE_CLASS_LABEL = "<negative>"


def build_negative_dataset(ds: Dataset, n_known: int = 31, seed: int = 0,
                           per_heldout: int = 20) -> ClassSplit:
    """Known-subjects-plus-negative-class split.

    The first `n_known` subjects (lexicographic) become classes 0..n_known-1.
    The negative class pools `per_heldout` vectors sampled without replacement
    from each held-out subject, then the usual stratified 75/25 split applies.
    """
    rng = np.random.default_rng(seed)
    known = list(ds.subjects[:n_known])
    heldout = list(ds.subjects[n_known:])
    label_map = {subject: i for i, subject in enumerate(known)}
    label_map[NEGATIVE_CLASS_LABEL] = n_known
    groups = {
        label_map[subject]: np.array([s.vector for s in ds.by_subject(subject)])
        for subject in known
    }
    negative = []
    for subject in heldout:
        mat = np.array([s.vector for s in ds.by_subject(subject)])
        pick = rng.choice(len(mat), size=min(per_heldout, len(mat)), replace=False)
        negative.append(mat[pick])
    groups[n_known] = np.vstack(negative)
    return _stratified_split(groups, label_map, int(rng.integers(2**31)))
