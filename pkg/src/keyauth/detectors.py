"""Per-subject one-class anomaly scorers.

All detectors share one orientation: higher score = more anomalous.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateNorm, DimensionMismatch, InsufficientData, SchemaError
from .features import ColumnStats, column_stats, covariance_matrix

STAT_KINDS = (
    "euclidean", "manhattan", "scaled_manhattan",
    "mahalanobis", "mahalanobis_normed", "zscore",
)

# Floors so constant training columns cannot divide by zero.
MAD_FLOOR = 1e-6
STD_FLOOR = 1e-6
DEFAULT_Z_THRESHOLD = 1.96


@dataclass(frozen=True)
class StatDetectorModel:
    kind: str
    stats: ColumnStats
    cov_inverse: np.ndarray | None = None
    z_threshold: float = DEFAULT_Z_THRESHOLD


def fit_stat_detector(kind: str, train: Sequence[np.ndarray] | np.ndarray,
                      z_threshold: float = DEFAULT_Z_THRESHOLD) -> StatDetectorModel:
    """Fit the chosen detector's training statistics on genuine vectors."""
    if kind not in STAT_KINDS:
        raise ValueError(f"unknown detector kind {kind!r}")
    mat = np.atleast_2d(np.asarray(train, dtype=np.float64))
    if mat.shape[0] < 2:
        raise InsufficientData(f"detector needs >= 2 training rows, got {mat.shape[0]}")
    stats = column_stats(mat)
    cov_inv = None
    if kind.startswith("mahalanobis"):
        cov_inv = np.linalg.inv(covariance_matrix(mat))
    return StatDetectorModel(kind=kind, stats=stats, cov_inverse=cov_inv,
                             z_threshold=z_threshold)


def _diff(m: StatDetectorModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != m.stats.mean.shape:
        raise DimensionMismatch(f"vector shape {x.shape} vs model {m.stats.mean.shape}")
    return x - m.stats.mean


def score_euclidean(m: StatDetectorModel, x: np.ndarray) -> float:
    """Squared Euclidean distance to the training mean."""
    d = _diff(m, x)
    return float(d @ d)


def score_manhattan(m: StatDetectorModel, x: np.ndarray) -> float:
    d = _diff(m, x)
    return float(np.abs(d).sum())


def score_scaled_manhattan(m: StatDetectorModel, x: np.ndarray) -> float:
    """Manhattan distance with each dimension scaled by its mean absolute deviation."""
    d = _diff(m, x)
    return float((np.abs(d) / np.maximum(m.stats.mad, MAD_FLOOR)).sum())


def score_mahalanobis(m: StatDetectorModel, x: np.ndarray) -> float:
    d = _diff(m, x)
    assert m.cov_inverse is not None
    return float(d @ m.cov_inverse @ d)


def score_mahalanobis_normed(m: StatDetectorModel, x: np.ndarray) -> float:
    """Mahalanobis distance divided by ||x|| * ||mean||."""
    d = _diff(m, x)
    denom = float(np.linalg.norm(x) * np.linalg.norm(m.stats.mean))
    if denom == 0.0:
        raise DegenerateNorm("test or mean vector has zero norm")
    assert m.cov_inverse is not None
    return float(d @ m.cov_inverse @ d) / denom


def score_zscore_count(m: StatDetectorModel, x: np.ndarray) -> float:
    """Count of features whose absolute z-score exceeds the threshold."""
    d = _diff(m, x)
    z = np.abs(d) / np.maximum(m.stats.std, STD_FLOOR)
    return float((z > m.z_threshold).sum())


_SCORERS: dict[str, Callable[[StatDetectorModel, np.ndarray], float]] = {
    "euclidean": score_euclidean,
    "manhattan": score_manhattan,
    "scaled_manhattan": score_scaled_manhattan,
    "mahalanobis": score_mahalanobis,
    "mahalanobis_normed": score_mahalanobis_normed,
    "zscore": score_zscore_count,
}


def score(m: StatDetectorModel, x: np.ndarray) -> float:
    return _SCORERS[m.kind](m, x)


def score_batch(m: StatDetectorModel, mat: np.ndarray) -> np.ndarray:
    """Vectorized scoring of a stack of test vectors."""
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    if mat.shape[1] != m.stats.mean.shape[0]:
        raise DimensionMismatch(f"{mat.shape[1]} columns vs model {m.stats.mean.shape[0]}")
    d = mat - m.stats.mean
    if m.kind == "euclidean":
        return (d * d).sum(axis=1)
    if m.kind == "manhattan":
        return np.abs(d).sum(axis=1)
    if m.kind == "scaled_manhattan":
        return (np.abs(d) / np.maximum(m.stats.mad, MAD_FLOOR)).sum(axis=1)
    if m.kind == "mahalanobis":
        return ((d @ m.cov_inverse) * d).sum(axis=1)
    if m.kind == "mahalanobis_normed":
        norms = np.linalg.norm(mat, axis=1) * np.linalg.norm(m.stats.mean)
        if np.any(norms == 0.0):
            raise DegenerateNorm("zero-norm vector in batch")
        return ((d @ m.cov_inverse) * d).sum(axis=1) / norms
    if m.kind == "zscore":
        z = np.abs(d) / np.maximum(m.stats.std, STD_FLOOR)
        return (z > m.z_threshold).sum(axis=1).astype(np.float64)
    raise ValueError(m.kind)


# --- serialization (versioned text, round-trip exact) ---

MODEL_FORMAT_TAG = "keyauth-detector v1"


def _fmt_array(arr: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(arr).ravel())


def save_stat_detector(m: StatDetectorModel, path: str | Path) -> None:
    lines = [
        f"# {MODEL_FORMAT_TAG}",
        f"kind {m.kind}",
        f"count {m.stats.count}",
        f"z_threshold {repr(float(m.z_threshold))}",
        f"mean {_fmt_array(m.stats.mean)}",
        f"std {_fmt_array(m.stats.std)}",
        f"mad {_fmt_array(m.stats.mad)}",
    ]
    if m.cov_inverse is not None:
        lines.append(f"cov_inverse {_fmt_array(m.cov_inverse)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_stat_detector(path: str | Path) -> StatDetectorModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"# {MODEL_FORMAT_TAG}":
        raise SchemaError(f"{path}: not a {MODEL_FORMAT_TAG} file")
    fields: dict[str, str] = {}
    for line in lines[1:]:
        if line.strip():
            key, _, rest = line.partition(" ")
            fields[key] = rest
    mean = np.fromstring(fields["mean"], sep=" ")
    stats = ColumnStats(
        mean=mean,
        std=np.fromstring(fields["std"], sep=" "),
        mad=np.fromstring(fields["mad"], sep=" "),
        count=int(fields["count"]),
    )
    cov_inv = None
    if "cov_inverse" in fields:
        flat = np.fromstring(fields["cov_inverse"], sep=" ")
        n = mean.shape[0]
        cov_inv = flat.reshape(n, n)
    return StatDetectorModel(kind=fields["kind"], stats=stats, cov_inverse=cov_inv,
                             z_threshold=float(fields["z_threshold"]))
