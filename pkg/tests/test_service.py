import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from keyauth.features import trace_from_vector
from keyauth.service import UserStore, create_app
from keyauth.synth import synth_dataset


def trace_events(vector, jitter=0.0, seed=0):
    """Wire-format event list for a benchmark-style timing vector."""
    rng = np.random.default_rng(seed)
    trace = trace_from_vector(vector)
    return [
        {"key": e.key, "kind": e.kind,
         "t_ms": e.t_ms + (rng.uniform(-jitter, jitter) if jitter else 0.0)}
        for e in trace.events
    ]


@pytest.fixture(scope="module")
def subject_vectors():
    ds = synth_dataset(n_subjects=3, reps_per_subject=30, seed=23)
    return {s: np.array([r.vector for r in ds.by_subject(s)]) for s in ds.subjects}


@pytest.fixture
def client(tmp_path):
    store = UserStore(tmp_path / "store", min_enroll=10)
    return TestClient(create_app(store)), store


def enroll_n(client, user, vectors, n, nonce_prefix="n"):
    for i in range(n):
        r = client.post(f"/api/users/{user}/enroll",
                        json={"nonce": f"{nonce_prefix}{i}",
                              "events": trace_events(vectors[i])})
        assert r.status_code == 200, r.text
    return r.json()


class TestEnroll:
    def test_ten_enrollments_then_trainable(self, client, subject_vectors):
        api, _ = client
        vecs = subject_vectors["s002"]
        out = enroll_n(api, "alice", vecs, 10)
        assert out == {"attempts": 10}
        r = api.post("/api/users/alice/train", json={"detector": "scaled_manhattan"})
        assert r.status_code == 200
        assert r.json()["threshold"] > 0

    def test_backspace_rejected_count_unchanged(self, client, subject_vectors):
        api, _ = client
        events = trace_events(subject_vectors["s002"][0])
        events.insert(3, {"key": "Backspace", "kind": "down",
                          "t_ms": events[3]["t_ms"]})
        r = api.post("/api/users/alice/enroll", json={"nonce": "x", "events": events})
        assert r.status_code == 422
        assert r.json()["error_code"] == "malformed_trace"
        assert api.get("/api/users").json() == []

    def test_duplicate_nonce_idempotent(self, client, subject_vectors):
        api, _ = client
        events = trace_events(subject_vectors["s002"][0])
        for _ in range(3):
            r = api.post("/api/users/bob/enroll",
                         json={"nonce": "same", "events": events})
        assert r.json() == {"attempts": 1}


class TestTrain:
    def test_insufficient_enrollment(self, client, subject_vectors):
        api, _ = client
        enroll_n(api, "carol", subject_vectors["s002"], 9)
        r = api.post("/api/users/carol/train", json={"detector": "manhattan"})
        assert r.status_code == 409
        assert r.json()["error_code"] == "insufficient_enrollment"

    def test_unknown_user(self, client):
        api, _ = client
        r = api.post("/api/users/nobody/train", json={"detector": "manhattan"})
        assert r.status_code == 404
        assert r.json()["error_code"] == "unknown_user"

    def test_retrain_deterministic(self, client, subject_vectors):
        api, _ = client
        enroll_n(api, "dave", subject_vectors["s002"], 12)
        t1 = api.post("/api/users/dave/train", json={"detector": "zscore"}).json()
        t2 = api.post("/api/users/dave/train", json={"detector": "zscore"}).json()
        assert t1 == t2

    def test_bad_detector_name(self, client, subject_vectors):
        api, _ = client
        enroll_n(api, "erin", subject_vectors["s002"], 10)
        r = api.post("/api/users/erin/train", json={"detector": "nope"})
        assert r.status_code == 400


class TestVerify:
    def test_enrolled_attempts_all_verify(self, client, subject_vectors):
        api, _ = client
        vecs = subject_vectors["s002"]
        enroll_n(api, "alice", vecs, 10)
        api.post("/api/users/alice/train", json={"detector": "scaled_manhattan"})
        for i in range(10):
            r = api.post("/api/users/alice/verify",
                         json={"events": trace_events(vecs[i])})
            body = r.json()
            assert body["accepted"], body
            assert body["detector"] == "scaled_manhattan"
            assert body["score"] <= body["threshold"]

    def test_other_subject_mostly_rejected(self, client, subject_vectors):
        api, _ = client
        enroll_n(api, "alice", subject_vectors["s002"], 15)
        api.post("/api/users/alice/train", json={"detector": "scaled_manhattan"})
        rejected = 0
        impostors = subject_vectors["s003"][:20]
        for vec in impostors:
            r = api.post("/api/users/alice/verify",
                         json={"events": trace_events(vec)})
            rejected += not r.json()["accepted"]
        assert rejected >= 0.8 * len(impostors)

    def test_not_trained(self, client, subject_vectors):
        api, _ = client
        enroll_n(api, "fred", subject_vectors["s002"], 3)
        r = api.post("/api/users/fred/verify",
                     json={"events": trace_events(subject_vectors["s002"][0])})
        assert r.status_code == 409
        assert r.json()["error_code"] == "not_trained"

    def test_unknown_user(self, client, subject_vectors):
        api, _ = client
        r = api.post("/api/users/ghost/verify",
                     json={"events": trace_events(subject_vectors["s002"][0])})
        assert r.status_code == 404

    def test_verify_does_not_mutate(self, client, subject_vectors):
        api, store = client
        vecs = subject_vectors["s002"]
        enroll_n(api, "alice", vecs, 10)
        api.post("/api/users/alice/train", json={"detector": "euclidean"})
        before = api.get("/api/users").json()
        for _ in range(5):
            api.post("/api/users/alice/verify", json={"events": trace_events(vecs[0])})
        assert api.get("/api/users").json() == before


class TestListUsers:
    def test_empty_store(self, client):
        api, _ = client
        assert api.get("/api/users").json() == []

    def test_summary_shape_and_privacy(self, client, subject_vectors):
        api, _ = client
        enroll_n(api, "alice", subject_vectors["s002"], 2)
        out = api.get("/api/users").json()
        assert out == [{"id": "alice", "attempts": 2, "trained": False}]


class TestPersistence:
    def test_restart_rebuilds_models(self, tmp_path, subject_vectors):
        root = tmp_path / "store"
        store = UserStore(root, min_enroll=10)
        api = TestClient(create_app(store))
        vecs = subject_vectors["s002"]
        enroll_n(api, "alice", vecs, 10)
        t = api.post("/api/users/alice/train",
                     json={"detector": "scaled_manhattan"}).json()["threshold"]

        reopened = UserStore(root, min_enroll=10)
        api2 = TestClient(create_app(reopened))
        r = api2.post("/api/users/alice/verify",
                      json={"events": trace_events(vecs[0])})
        body = r.json()
        assert body["accepted"]
        assert body["threshold"] == pytest.approx(t)

    def test_concurrent_enrolls_serialize(self, tmp_path, subject_vectors):
        store = UserStore(tmp_path / "store", min_enroll=10)
        vecs = subject_vectors["s002"]

        def work(k):
            from keyauth.features import trace_from_vector
            store.enroll("u", f"nonce{k}", trace_from_vector(vecs[k]))

        threads = [threading.Thread(target=work, args=(k,)) for k in range(10)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert store.summaries() == [{"id": "u", "attempts": 10, "trained": False}]
