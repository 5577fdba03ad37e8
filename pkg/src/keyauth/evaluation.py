"""ROC construction, equal-error-rate and zero-miss false-alarm-rate estimation,
anomaly benchmark orchestration, and classifier metrics.

Score orientation everywhere: higher = more anomalous. Tie convention: a score
exactly equal to the threshold counts as detected, so a genuine score >= t is a
false alarm and an impostor score >= t is a hit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import AnomalySplit
from .detectors import STAT_KINDS, fit_stat_detector, score_batch
from .errors import KeyauthError
from . import ocsvm as _ocsvm


class EmptySet(KeyauthError):
    """ROC operations need at least one genuine and one impostor score."""


@dataclass(frozen=True)
class ScoredTestSet:
    genuine_scores: np.ndarray
    impostor_scores: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.genuine_scores, dtype=np.float64)
        i = np.asarray(self.impostor_scores, dtype=np.float64)
        if g.size == 0 or i.size == 0:
            raise EmptySet("both genuine and impostor score sets must be non-empty")
        object.__setattr__(self, "genuine_scores", g)
        object.__setattr__(self, "impostor_scores", i)


def _rates(s: ScoredTestSet, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(false_alarm, miss) at each threshold: fa = P(genuine >= t), miss = P(impostor < t)."""
    g = np.sort(s.genuine_scores)
    i = np.sort(s.impostor_scores)
    fa = 1.0 - np.searchsorted(g, thresholds, side="left") / g.size
    miss = np.searchsorted(i, thresholds, side="left") / i.size
    return fa, miss


def _threshold_grid(s: ScoredTestSet) -> np.ndarray:
    scores = np.union1d(s.genuine_scores, s.impostor_scores)
    top = scores[-1] + 1.0  # sentinel above every score: fa = 0, miss = 1
    return np.append(scores, top)


@dataclass(frozen=True)
class RocCurve:
    """Operating points (false_alarm_rate, hit_rate), one per distinct threshold."""

    false_alarm: np.ndarray
    hit: np.ndarray
    thresholds: np.ndarray


def build_roc(s: ScoredTestSet) -> RocCurve:
    thresholds = _threshold_grid(s)
    fa, miss = _rates(s, thresholds)
    return RocCurve(false_alarm=fa, hit=1.0 - miss, thresholds=thresholds)


def equal_error_rate(s: ScoredTestSet) -> float:
    """Rate at which miss and false-alarm curves cross.

    Linear interpolation between the two operating points straddling the
    crossing; the midpoint rate when the curves touch over an interval.
    """
    thresholds = _threshold_grid(s)
    fa, miss = _rates(s, thresholds)
    diff = fa - miss
    exact = np.flatnonzero(diff == 0.0)
    if exact.size:
        rates = fa[exact]
        return float((rates.min() + rates.max()) / 2.0)
    # fa is non-increasing and miss non-decreasing in t, so diff crosses once.
    k = int(np.flatnonzero(diff[:-1] * diff[1:] < 0.0)[0])
    frac = diff[k] / (diff[k] - diff[k + 1])
    return float(fa[k] + frac * (fa[k + 1] - fa[k]))


def zero_miss_false_alarm(s: ScoredTestSet) -> float:
    """Smallest false-alarm rate with zero missed impostors.

    Miss is zero iff the threshold is at or below every impostor score, so this
    is the fraction of genuine scores >= min(impostor scores).
    """
    t = float(np.min(s.impostor_scores))
    return float((s.genuine_scores >= t).mean())


@dataclass(frozen=True)
class DetectorTableRow:
    detector: str
    mean_eer: float
    sd_eer: float
    mean_zfr: float
    sd_zfr: float
    n_subjects: int
    failures: tuple[str, ...] = ()


@dataclass(frozen=True)
class SubjectResult:
    subject: str
    detector: str
    eer: float
    zfr: float
    scores: ScoredTestSet


ScorerFactory = Callable[[np.ndarray], Callable[[np.ndarray], np.ndarray]]


def _stat_factory(kind: str, z_threshold: float) -> ScorerFactory:
    def fit(train: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        model = fit_stat_detector(kind, train, z_threshold=z_threshold)
        return lambda mat: score_batch(model, mat)
    return fit


def _ocsvm_factory(nu: float, gamma: float) -> ScorerFactory:
    def fit(train: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        model = _ocsvm.fit_ocsvm(train, nu=nu, gamma=gamma)
        return lambda mat: _ocsvm.score_ocsvm_batch(model, mat)
    return fit


def detector_factories(kinds: Sequence[str], z_threshold: float = 1.96,
                       nu: float = 0.1, gamma: float = _ocsvm.DEFAULT_GAMMA,
                       ) -> dict[str, ScorerFactory]:
    factories: dict[str, ScorerFactory] = {}
    for kind in kinds:
        if kind in STAT_KINDS:
            factories[kind] = _stat_factory(kind, z_threshold)
        elif kind == "ocsvm":
            factories[kind] = _ocsvm_factory(nu, gamma)
        else:
            raise ValueError(f"unknown detector {kind!r}")
    return factories


def run_anomaly_benchmark(splits: Sequence[AnomalySplit],
                          factories: dict[str, ScorerFactory],
                          ) -> tuple[list[DetectorTableRow], list[SubjectResult]]:
    """Fit and score every (subject, detector) cell; aggregate EER/ZFR per detector.

    A cell whose fit or scoring raises is recorded in the row's failures and
    excluded from the aggregate; the benchmark continues.
    """
    rows: list[DetectorTableRow] = []
    details: list[SubjectResult] = []
    for name, factory in factories.items():
        eers, zfrs, failures = [], [], []
        for split in splits:
            try:
                scorer = factory(split.train)
                scored = ScoredTestSet(scorer(split.genuine_test),
                                       scorer(split.impostor_test))
                eer = equal_error_rate(scored)
                zfr = zero_miss_false_alarm(scored)
            except KeyauthError as exc:
                failures.append(f"{split.subject}: {exc}")
                continue
            eers.append(eer)
            zfrs.append(zfr)
            details.append(SubjectResult(split.subject, name, eer, zfr, scored))
        if eers:
            eer_arr = np.array(eers)
            zfr_arr = np.array(zfrs)
            stats = (float(eer_arr.mean()), float(eer_arr.std()),
                     float(zfr_arr.mean()), float(zfr_arr.std()))
        else:  # every cell failed: aggregates undefined
            stats = (float("nan"),) * 4
        rows.append(DetectorTableRow(
            detector=name,
            mean_eer=stats[0], sd_eer=stats[1],
            mean_zfr=stats[2], sd_zfr=stats[3],
            n_subjects=len(eers), failures=tuple(failures),
        ))
    return rows, details


@dataclass(frozen=True)
class ClassifierMetrics:
    accuracy: float
    confusion: np.ndarray  # [true, predicted]
    precision: np.ndarray
    recall: np.ndarray
    f_score: np.ndarray


def classifier_metrics(predictions: np.ndarray, labels: np.ndarray,
                       n_classes: int) -> ClassifierMetrics:
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    tp = np.diag(confusion).astype(np.float64)
    pred_totals = confusion.sum(axis=0).astype(np.float64)
    true_totals = confusion.sum(axis=1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_totals > 0, tp / pred_totals, 0.0)
        recall = np.where(true_totals > 0, tp / true_totals, 0.0)
        denom = precision + recall
        f_score = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return ClassifierMetrics(
        accuracy=float(tp.sum() / max(labels.size, 1)),
        confusion=confusion, precision=precision, recall=recall, f_score=f_score,
    )


DETECTOR_TABLE_HEADER = "detector,mean_eer,sd_eer,mean_zfr,sd_zfr,n_subjects"


def export_detector_table(rows: Sequence[DetectorTableRow], path: str | Path) -> None:
    """Detector summary CSV, ordered by mean EER descending (worst first)."""
    ordered = sorted(rows, key=lambda r: -r.mean_eer)
    lines = [DETECTOR_TABLE_HEADER]
    for r in ordered:
        lines.append(f"{r.detector},{r.mean_eer:.6f},{r.sd_eer:.6f},"
                     f"{r.mean_zfr:.6f},{r.sd_zfr:.6f},{r.n_subjects}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_roc_points(details: Sequence[SubjectResult], out_dir: str | Path) -> None:
    """One raw ROC-point CSV per (subject, detector) for external plotting."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for res in details:
        curve = build_roc(res.scores)
        lines = ["threshold,false_alarm_rate,hit_rate"]
        for t, fa, hit in zip(curve.thresholds, curve.false_alarm, curve.hit):
            lines.append(f"{t:.9g},{fa:.6f},{hit:.6f}")
        (out_dir / f"roc_{res.subject}_{res.detector}.csv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8")
