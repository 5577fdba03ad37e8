/**
 * Keystroke capture state machine for one typing attempt.
 *
 * Feeds on keydown/keyup pairs (physical key code + monotonic timestamp) and
 * builds the wire-format event list. Any deviation from a clean single pass
 * over the password — wrong key, Backspace, paste, non-monotone clock —
 * marks the attempt invalid; Enter's release completes it.
 */

import { KEY_SEQUENCE, WireEvent } from "./features.js";

export type CaptureStatus = "recording" | "complete" | "invalid";

export interface CapturedAttempt {
  events: WireEvent[];
  nonce: string;
  status: CaptureStatus;
  reason?: string;
}

/** Layout-independent physical key codes for the fixed password (QWERTY). */
const CODE_TO_TOKEN: Record<string, string> = {
  Period: ".", KeyT: "t", KeyI: "i", KeyE: "e", Digit5: "5", KeyR: "R",
  KeyO: "o", KeyA: "a", KeyN: "n", KeyL: "l", Enter: "Enter",
};

const MODIFIER_CODES = new Set([
  "ShiftLeft", "ShiftRight", "CapsLock",
]);

export function randomNonce(): string {
  const bytes = new Uint8Array(12);
  if (typeof crypto !== "undefined" && crypto.getRandomValues) {
    crypto.getRandomValues(bytes);
  } else {
    for (let i = 0; i < bytes.length; i++) {
      bytes[i] = Math.floor(Math.random() * 256);
    }
  }
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

export class AttemptCapture {
  private events: WireEvent[] = [];
  private downCount = 0;
  private lastT = -Infinity;
  private status: CaptureStatus = "recording";
  private reason?: string;
  readonly nonce = randomNonce();

  get current(): CapturedAttempt {
    return {
      events: [...this.events],
      nonce: this.nonce,
      status: this.status,
      reason: this.reason,
    };
  }

  /** Progress indicator: password keys pressed so far. */
  get keysDown(): number {
    return this.downCount;
  }

  private invalidate(reason: string): void {
    this.status = "invalid";
    this.reason = reason;
    this.events = [];
  }

  /** External invalidation hook (paste, blur, manual reset). */
  markInvalid(reason: string): void {
    if (this.status === "recording") {
      this.invalidate(reason);
    }
  }

  keyEvent(code: string, kind: "down" | "up", tMs: number): void {
    if (this.status !== "recording") {
      return;
    }
    if (MODIFIER_CODES.has(code)) {
      return; // Shift for the capital R is not itself a password key.
    }
    if (tMs < this.lastT) {
      this.invalidate("non-monotone timestamps");
      return;
    }
    this.lastT = tMs;
    const token = CODE_TO_TOKEN[code];
    if (token === undefined) {
      this.invalidate(code === "Backspace" ? "backspace pressed"
                                           : `unexpected key ${code}`);
      return;
    }
    if (kind === "down") {
      if (token !== KEY_SEQUENCE[this.downCount]) {
        this.invalidate(`expected ${KEY_SEQUENCE[this.downCount]}, got ${token}`);
        return;
      }
      this.downCount += 1;
    }
    this.events.push({ key: token, kind, t_ms: Math.round(tMs) });
    // Enter's press is necessarily the final keydown; the attempt completes
    // once every pressed key (in any release order) has been released.
    if (kind === "up" && this.downCount === KEY_SEQUENCE.length
        && this.events.length === 2 * KEY_SEQUENCE.length) {
      this.status = "complete";
    }
  }
}
