#!/usr/bin/env python3
"""Exercise a running enroll/verify service over HTTP.

Start the service first (any store directory works):

    keyauth serve --store /tmp/keyauth-store --port 8080

Then run this script: it enrolls ten attempts for one synthetic subject,
trains a detector, replays the genuine attempts, and fires impostor attempts
from the other subjects, printing the accept/reject outcome of each call.
"""

import argparse
import json
import urllib.request

from keyauth.features import trace_from_vector
from keyauth.synth import synth_dataset


def post(base, path, payload):
    req = urllib.request.Request(
        base + path, data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def events_for(vector):
    return [{"key": e.key, "kind": e.kind, "t_ms": e.t_ms}
            for e in trace_from_vector(vector).events]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--base", default="http://127.0.0.1:8080")
    parser.add_argument("--user", default="demo")
    parser.add_argument("--detector", default="scaled_manhattan")
    args = parser.parse_args()

    ds = synth_dataset(n_subjects=4, reps_per_subject=15, seed=3)
    genuine = [s.vector for s in ds.by_subject("s002")]
    impostors = [s.vector for subj in ("s003", "s004", "s005")
                 for s in ds.by_subject(subj)[:5]]

    for i, vec in enumerate(genuine[:10]):
        status, body = post(args.base, f"/api/users/{args.user}/enroll",
                            {"nonce": f"demo-{i}", "events": events_for(vec)})
        print(f"enroll {i}: {status} {body}")

    status, body = post(args.base, f"/api/users/{args.user}/train",
                        {"detector": args.detector})
    print(f"train: {status} {body}")

    accepted = 0
    for vec in genuine[:10]:
        _, body = post(args.base, f"/api/users/{args.user}/verify",
                       {"events": events_for(vec)})
        accepted += body["accepted"]
    print(f"genuine replays accepted: {accepted}/10")

    rejected = 0
    for vec in impostors:
        _, body = post(args.base, f"/api/users/{args.user}/verify",
                       {"events": events_for(vec)})
        rejected += not body["accepted"]
    print(f"impostors rejected: {rejected}/{len(impostors)}")


if __name__ == "__main__":
    main()
