"""Enroll/verify HTTP service over raw key-event traces.

State lives in an append-only JSON-lines file per user; the in-memory index is
rebuilt from those files at startup, and detector fitting is deterministic
given the stored attempts, so a restart reproduces the same models.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .detectors import (STAT_KINDS, StatDetectorModel, fit_stat_detector, score)
from .errors import InsufficientData, KeyauthError, MalformedTrace
from .features import EventTrace, extract_features

DEFAULT_MIN_ENROLL = 10
DEFAULT_DETECTOR = "scaled_manhattan"
STORE_VERSION = 1


class UnknownUser(KeyauthError):
    pass


class NotTrained(KeyauthError):
    pass


class InsufficientEnrollment(KeyauthError):
    pass


@dataclass
class UserRecord:
    user_id: str
    nonces: set[str] = field(default_factory=set)
    vectors: list[np.ndarray] = field(default_factory=list)
    detector_kind: str | None = None
    model: StatDetectorModel | None = None
    threshold: float | None = None


@dataclass(frozen=True)
class VerifyDecision:
    score: float
    threshold: float
    accepted: bool
    detector_kind: str


def loo_threshold(vectors: list[np.ndarray], kind: str) -> float:
    """mean + 3*SD of leave-one-out self-scores (population SD)."""
    scores = []
    for i in range(len(vectors)):
        rest = vectors[:i] + vectors[i + 1:]
        model = fit_stat_detector(kind, np.array(rest))
        scores.append(score(model, vectors[i]))
    arr = np.array(scores)
    return float(arr.mean() + 3.0 * arr.std())


class UserStore:
    """Append-only per-user persistence with an in-memory index.

    Reads (verify/list) take a consistent snapshot of (model, threshold);
    writes (enroll/train) serialize per user.
    """

    def __init__(self, root: str | Path, min_enroll: int = DEFAULT_MIN_ENROLL) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.min_enroll = min_enroll
        self._users: dict[str, UserRecord] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._global = threading.Lock()
        self._load()

    def _lock(self, user_id: str) -> threading.Lock:
        with self._global:
            return self._locks.setdefault(user_id, threading.Lock())

    def _path(self, user_id: str) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in user_id)
        return self.root / f"{safe}.jsonl"

    def _load(self) -> None:
        for path in sorted(self.root.glob("*.jsonl")):
            user_id = None
            rec = None
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                if obj.get("v") != STORE_VERSION:
                    continue
                if user_id is None:
                    user_id = obj["user"]
                    rec = UserRecord(user_id)
                    self._users[user_id] = rec
                assert rec is not None
                if obj["type"] == "enroll":
                    # Replay through the validator: malformed records never load.
                    trace = EventTrace.from_dicts(obj["events"])
                    rec.nonces.add(obj["nonce"])
                    rec.vectors.append(extract_features(trace))
                elif obj["type"] == "train":
                    rec.detector_kind = obj["detector"]
            if rec is not None and rec.detector_kind and len(rec.vectors) >= self.min_enroll:
                self._fit(rec)

    def _append(self, user_id: str, obj: dict) -> None:
        with self._path(user_id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj) + "\n")

    def _fit(self, rec: UserRecord) -> None:
        assert rec.detector_kind is not None
        rec.model = fit_stat_detector(rec.detector_kind, np.array(rec.vectors))
        rec.threshold = loo_threshold(rec.vectors, rec.detector_kind)

    def enroll(self, user_id: str, nonce: str, trace: EventTrace) -> int:
        vector = extract_features(trace)  # validates before any state change
        with self._lock(user_id):
            rec = self._users.setdefault(user_id, UserRecord(user_id))
            if nonce in rec.nonces:
                return len(rec.vectors)
            rec.nonces.add(nonce)
            rec.vectors.append(vector)
            self._append(user_id, {
                "v": STORE_VERSION, "type": "enroll", "user": user_id,
                "nonce": nonce,
                "events": [{"key": e.key, "kind": e.kind, "t_ms": e.t_ms}
                           for e in trace.events],
            })
            return len(rec.vectors)

    def train(self, user_id: str, detector_kind: str) -> float:
        if detector_kind not in STAT_KINDS:
            raise ValueError(f"unknown detector {detector_kind!r}")
        with self._lock(user_id):
            rec = self._users.get(user_id)
            if rec is None:
                raise UnknownUser(user_id)
            if len(rec.vectors) < self.min_enroll:
                raise InsufficientEnrollment(
                    f"{len(rec.vectors)} of {self.min_enroll} required attempts")
            rec.detector_kind = detector_kind
            self._fit(rec)
            self._append(user_id, {
                "v": STORE_VERSION, "type": "train", "user": user_id,
                "detector": detector_kind, "threshold": rec.threshold,
            })
            assert rec.threshold is not None
            return rec.threshold

    def verify(self, user_id: str, trace: EventTrace) -> VerifyDecision:
        vector = extract_features(trace)
        rec = self._users.get(user_id)
        if rec is None:
            raise UnknownUser(user_id)
        model, threshold = rec.model, rec.threshold  # snapshot pair
        if model is None or threshold is None:
            raise NotTrained(user_id)
        value = score(model, vector)
        return VerifyDecision(score=value, threshold=threshold,
                              accepted=value <= threshold,
                              detector_kind=model.kind)

    def summaries(self) -> list[dict]:
        return [
            {"id": rec.user_id, "attempts": len(rec.vectors),
             "trained": rec.model is not None}
            for rec in sorted(self._users.values(), key=lambda r: r.user_id)
        ]


ERROR_STATUS = {
    "malformed_trace": 422,
    "unknown_user": 404,
    "not_trained": 409,
    "insufficient_enrollment": 409,
    "bad_request": 400,
}


def _error(code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=ERROR_STATUS[code],
                        content={"error_code": code, "message": message})


def create_app(store: UserStore, ui_dir: str | Path | None = None,
               default_detector: str = DEFAULT_DETECTOR) -> FastAPI:
    app = FastAPI(title="keyauth service")

    @app.post("/api/users/{user_id}/enroll")
    async def enroll(user_id: str, request: Request):
        body = await request.json()
        try:
            trace = EventTrace.from_dicts(body.get("events", []))
            attempts = store.enroll(user_id, str(body.get("nonce", "")), trace)
        except MalformedTrace as exc:
            return _error("malformed_trace", str(exc))
        return {"attempts": attempts}

    @app.post("/api/users/{user_id}/train")
    async def train(user_id: str, request: Request):
        body = await request.json()
        try:
            threshold = store.train(user_id, str(body.get("detector",
                                                          default_detector)))
        except UnknownUser as exc:
            return _error("unknown_user", str(exc))
        except InsufficientEnrollment as exc:
            return _error("insufficient_enrollment", str(exc))
        except (ValueError, InsufficientData) as exc:
            return _error("bad_request", str(exc))
        return {"threshold": threshold}

    @app.post("/api/users/{user_id}/verify")
    async def verify(user_id: str, request: Request):
        body = await request.json()
        try:
            trace = EventTrace.from_dicts(body.get("events", []))
            decision = store.verify(user_id, trace)
        except MalformedTrace as exc:
            return _error("malformed_trace", str(exc))
        except UnknownUser as exc:
            return _error("unknown_user", str(exc))
        except NotTrained as exc:
            return _error("not_trained", str(exc))
        return {"score": decision.score, "threshold": decision.threshold,
                "accepted": decision.accepted, "detector": decision.detector_kind}

    @app.get("/api/users")
    async def list_users():
        return store.summaries()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
