/** Thin typed client for the enroll/verify HTTP service. */

import { WireEvent } from "./features.js";

export interface ApiError {
  error_code: string;
  message: string;
}

export interface EnrollResponse {
  attempts: number;
}

export interface TrainResponse {
  threshold: number;
}

export interface VerifyResponse {
  score: number;
  threshold: number;
  accepted: boolean;
  detector: string;
}

export interface UserSummary {
  id: string;
  attempts: number;
  trained: boolean;
}

export class ServiceError extends Error {
  constructor(readonly code: string, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (...a) => fetch(...a),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await resp.json();
    if (!resp.ok) {
      const err = payload as ApiError;
      throw new ServiceError(err.error_code ?? "unknown", err.message ?? "");
    }
    return payload as T;
  }

  enroll(user: string, nonce: string, events: WireEvent[]): Promise<EnrollResponse> {
    return this.post(`/api/users/${encodeURIComponent(user)}/enroll`,
                     { nonce, events });
  }

  train(user: string, detector?: string): Promise<TrainResponse> {
    return this.post(`/api/users/${encodeURIComponent(user)}/train`,
                     detector ? { detector } : {});
  }

  verify(user: string, events: WireEvent[]): Promise<VerifyResponse> {
    return this.post(`/api/users/${encodeURIComponent(user)}/verify`,
                     { events });
  }

  async listUsers(): Promise<UserSummary[]> {
    const resp = await this.fetchImpl(this.base + "/api/users");
    if (!resp.ok) {
      throw new ServiceError("unknown", `list failed: ${resp.status}`);
    }
    return (await resp.json()) as UserSummary[];
  }
}
