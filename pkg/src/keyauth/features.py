"""Domain types and timing-feature extraction for the fixed password ".tie5Roanl".

A typing attempt is 11 keystrokes (the ten password characters, with the
capital R treated as a single Shift+r stroke, plus Enter). Three timing
features are defined per keystroke pair:

    H  (hold)            = keyup  - keydown of the same key
    DD (keydown-keydown) = keydown of next key - keydown of this key
    UD (keyup-keydown)   = keydown of next key - keyup   of this key

UD may be negative when key presses overlap. Feature order follows the
benchmark CSV column order exactly and is the single source of truth for
every model in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, InsufficientData, MalformedTrace

# Key tokens in typing order; "R" is one keystroke (Shift+r).
KEY_SEQUENCE: tuple[str, ...] = (
    ".", "t", "i", "e", "5", "R", "o", "a", "n", "l", "Enter",
)

# Benchmark CSV key-name components, aligned with KEY_SEQUENCE.
_CSV_KEY_NAMES: tuple[str, ...] = (
    "period", "t", "i", "e", "five", "Shift.r", "o", "a", "n", "l", "Return",
)


def _build_feature_names() -> tuple[str, ...]:
    names: list[str] = []
    for k, name in enumerate(_CSV_KEY_NAMES):
        names.append(f"H.{name}")
        if k < len(_CSV_KEY_NAMES) - 1:
            nxt = _CSV_KEY_NAMES[k + 1]
            names.append(f"DD.{name}.{nxt}")
            names.append(f"UD.{name}.{nxt}")
    return tuple(names)


#: The 31 feature labels in canonical benchmark CSV column order.
FEATURE_NAMES: tuple[str, ...] = _build_feature_names()

N_FEATURES = 31
assert len(FEATURE_NAMES) == N_FEATURES

#: Indices of hold-time and keydown-keydown columns (strictly positive features).
HOLD_INDICES = tuple(i for i, n in enumerate(FEATURE_NAMES) if n.startswith("H."))
DD_INDICES = tuple(i for i, n in enumerate(FEATURE_NAMES) if n.startswith("DD."))
UD_INDICES = tuple(i for i, n in enumerate(FEATURE_NAMES) if n.startswith("UD."))


def as_timing_vector(values: Iterable[float]) -> np.ndarray:
    """Validate and return a 31-entry float64 timing vector (seconds)."""
    vec = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                     dtype=np.float64)
    if vec.shape != (N_FEATURES,):
        raise DimensionMismatch(f"expected {N_FEATURES} features, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("timing vector contains NaN or infinite entries")
    return vec


@dataclass(frozen=True)
class KeystrokeSample:
    """One repetition of the password by one subject."""

    subject: str
    session: int
    repetition: int
    vector: np.ndarray

    def __post_init__(self) -> None:
        if not 1 <= self.session <= 8:
            raise ValueError(f"session {self.session} outside 1..8")
        if not 1 <= self.repetition <= 50:
            raise ValueError(f"repetition {self.repetition} outside 1..50")
        object.__setattr__(self, "vector", as_timing_vector(self.vector))


@dataclass(frozen=True)
class KeyEvent:
    key: str
    kind: str  # "down" | "up"
    t_ms: float


@dataclass(frozen=True)
class EventTrace:
    """Raw timestamped keydown/keyup events from one typing attempt."""

    events: tuple[KeyEvent, ...] = field(default_factory=tuple)

    @staticmethod
    def from_dicts(rows: Sequence[dict]) -> "EventTrace":
        evs = []
        for r in rows:
            try:
                evs.append(KeyEvent(str(r["key"]), str(r["kind"]), float(r["t_ms"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedTrace(f"bad event record {r!r}") from exc
        return EventTrace(tuple(evs))


def _validate_trace(trace: EventTrace) -> tuple[np.ndarray, np.ndarray]:
    """Return (down_times, up_times) in ms for the 11 keystrokes, or raise."""
    last_t = -np.inf
    downs: list[KeyEvent] = []
    pending: dict[str, float] = {}
    ups: dict[int, float] = {}  # keystroke index -> up time
    for ev in trace.events:
        if ev.kind not in ("down", "up"):
            raise MalformedTrace(f"unknown event kind {ev.kind!r}")
        if ev.t_ms < last_t:
            raise MalformedTrace("timestamps decrease")
        last_t = ev.t_ms
        if ev.kind == "down":
            idx = len(downs)
            if idx >= len(KEY_SEQUENCE) or ev.key != KEY_SEQUENCE[idx]:
                raise MalformedTrace(
                    f"keydown #{idx + 1} is {ev.key!r}, expected "
                    f"{KEY_SEQUENCE[idx] if idx < len(KEY_SEQUENCE) else 'nothing'!r}"
                )
            if ev.key in pending:
                raise MalformedTrace(f"key {ev.key!r} pressed twice without release")
            pending[ev.key] = idx
            downs.append(ev)
        else:
            if ev.key not in pending:
                raise MalformedTrace(f"keyup for {ev.key!r} without matching keydown")
            ups[pending.pop(ev.key)] = ev.t_ms
    if len(downs) != len(KEY_SEQUENCE):
        raise MalformedTrace(f"only {len(downs)} of {len(KEY_SEQUENCE)} keys pressed")
    if pending:
        raise MalformedTrace(f"keys never released: {sorted(pending)}")
    down_t = np.array([ev.t_ms for ev in downs], dtype=np.float64)
    up_t = np.array([ups[i] for i in range(len(KEY_SEQUENCE))], dtype=np.float64)
    return down_t, up_t


def extract_features(trace: EventTrace) -> np.ndarray:
    """Extract the 31 timing features (seconds) from a raw event trace.

    Raises MalformedTrace for wrong key sequence, unmatched events, or
    non-monotone timestamps; a bad attempt is rejected, never padded.
    """
    down_t, up_t = _validate_trace(trace)
    out = np.empty(N_FEATURES, dtype=np.float64)
    j = 0
    for k in range(len(KEY_SEQUENCE)):
        out[j] = up_t[k] - down_t[k]
        j += 1
        if k < len(KEY_SEQUENCE) - 1:
            out[j] = down_t[k + 1] - down_t[k]
            out[j + 1] = down_t[k + 1] - up_t[k]
            j += 2
    return out / 1000.0  # ms -> s


def trace_from_vector(vector: np.ndarray, start_ms: float = 0.0) -> EventTrace:
    """Build a raw event trace whose extracted features equal `vector`.

    Inverse of extract_features; the vector's UD entries are implied by
    H and DD (UD = DD - H), as in any physically consistent attempt.
    """
    vec = as_timing_vector(vector)
    hold = vec[list(HOLD_INDICES)] * 1000.0
    dd = vec[list(DD_INDICES)] * 1000.0
    down = np.concatenate([[start_ms], start_ms + np.cumsum(dd)])
    up = down + hold
    events = []
    for k, key in enumerate(KEY_SEQUENCE):
        events.append(KeyEvent(key, "down", float(down[k])))
        events.append(KeyEvent(key, "up", float(up[k])))
    events.sort(key=lambda e: e.t_ms)
    return EventTrace(tuple(events))


@dataclass(frozen=True)
class ColumnStats:
    """Per-column mean, population standard deviation, and mean absolute deviation."""

    mean: np.ndarray
    std: np.ndarray
    mad: np.ndarray
    count: int


def column_stats(rows: Sequence[np.ndarray] | np.ndarray) -> ColumnStats:
    """Column statistics over a stack of timing vectors (population convention)."""
    mat = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if mat.shape[0] < 2:
        raise InsufficientData(f"need at least 2 rows, got {mat.shape[0]}")
    mean = mat.mean(axis=0)
    std = mat.std(axis=0)  # divisor n
    mad = np.abs(mat - mean).mean(axis=0)
    return ColumnStats(mean=mean, std=std, mad=mad, count=mat.shape[0])


COV_EPSILON = 1e-6


def covariance_matrix(rows: Sequence[np.ndarray] | np.ndarray,
                      regularize: bool = True) -> np.ndarray:
    """Population sample covariance, optionally regularized as S + eps*I."""
    mat = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if mat.shape[0] < 2:
        raise InsufficientData(f"need at least 2 rows, got {mat.shape[0]}")
    centered = mat - mat.mean(axis=0)
    cov = centered.T @ centered / mat.shape[0]
    if regularize:
        cov = cov + COV_EPSILON * np.eye(mat.shape[1])
    return cov
