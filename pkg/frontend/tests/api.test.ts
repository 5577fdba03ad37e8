import { describe, expect, it, vi } from "vitest";

import { ApiClient, ServiceError } from "../src/api.js";
import { WireEvent } from "../src/features.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

const EVENTS: WireEvent[] = [{ key: ".", kind: "down", t_ms: 0 }];

describe("ApiClient", () => {
  it("posts enroll payloads to the right path", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(200, { attempts: 3 }));
    const api = new ApiClient("http://svc", fetchMock);
    const out = await api.enroll("alice", "nonce-1", EVENTS);
    expect(out.attempts).toBe(3);
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("http://svc/api/users/alice/enroll");
    expect(JSON.parse(init!.body as string)).toEqual(
      { nonce: "nonce-1", events: EVENTS });
  });

  it("escapes user ids in paths", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(200, { attempts: 1 }));
    const api = new ApiClient("", fetchMock);
    await api.enroll("a/b c", "n", EVENTS);
    expect(fetchMock.mock.calls[0][0]).toBe("/api/users/a%2Fb%20c/enroll");
  });

  it("surfaces service error codes verbatim", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse(409, { error_code: "not_trained", message: "train first" }));
    const api = new ApiClient("", fetchMock);
    const err = await api.verify("bob", EVENTS).catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.code).toBe("not_trained");
    expect(err.message).toBe("train first");
  });

  it("train omits the detector field when unset", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(200, { threshold: 1.5 }));
    const api = new ApiClient("", fetchMock);
    const out = await api.train("alice");
    expect(out.threshold).toBe(1.5);
    expect(JSON.parse(fetchMock.mock.calls[0][1]!.body as string)).toEqual({});
  });

  it("verify returns the service verdict untouched", async () => {
    const body = { score: 2.5, threshold: 2.0, accepted: false,
                   detector: "scaled_manhattan" };
    const api = new ApiClient("", vi.fn(async () => jsonResponse(200, body)));
    expect(await api.verify("alice", EVENTS)).toEqual(body);
  });

  it("network failure propagates as a rejection", async () => {
    const api = new ApiClient("", vi.fn(async () => {
      throw new TypeError("connection refused");
    }));
    await expect(api.listUsers()).rejects.toThrow("connection refused");
  });

  it("lists user summaries", async () => {
    const users = [{ id: "alice", attempts: 10, trained: true }];
    const api = new ApiClient("", vi.fn(async () => jsonResponse(200, users)));
    expect(await api.listUsers()).toEqual(users);
  });
});
