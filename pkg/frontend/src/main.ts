/**
 * Page controller: wires the capture box to the enroll/train/verify flows.
 *
 * The UI never decides accept/reject itself; it renders exactly what the
 * service returns. One API call is in flight at a time per flow.
 */

import { ApiClient, ServiceError } from "./api.js";
import { AttemptCapture, CapturedAttempt } from "./capture.js";
import { FEATURE_NAMES, localFeatures } from "./features.js";

const MIN_ENROLL = 10;

type Mode = "enroll" | "verify";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export class Page {
  private capture = new AttemptCapture();
  private busy = false;
  private api = new ApiClient();

  private readonly input = el<HTMLInputElement>("password-box");
  private readonly userBox = el<HTMLInputElement>("user-box");
  private readonly modeSelect = el<HTMLSelectElement>("mode-select");
  private readonly statusLine = el<HTMLElement>("status-line");
  private readonly verdict = el<HTMLElement>("verdict");
  private readonly gauge = el<HTMLElement>("gauge");
  private readonly featureBox = el<HTMLElement>("feature-box");
  private readonly trainButton = el<HTMLButtonElement>("train-button");
  private readonly banner = el<HTMLElement>("error-banner");

  private enrollCount = 0;

  start(): void {
    this.input.addEventListener("keydown", (ev) => this.onKey(ev, "down"));
    this.input.addEventListener("keyup", (ev) => this.onKey(ev, "up"));
    this.input.addEventListener("paste", (ev) => {
      ev.preventDefault();
      this.capture.markInvalid("paste blocked");
      this.resetBox("paste is not allowed — type the password");
    });
    this.trainButton.addEventListener("click", () => void this.train());
    this.render();
  }

  private onKey(ev: KeyboardEvent, kind: "down" | "up"): void {
    if (kind === "down" && ev.code !== "Tab") ev.preventDefault();
    this.capture.keyEvent(ev.code, kind, performance.now());
    const attempt = this.capture.current;
    if (attempt.status === "invalid") {
      this.resetBox(attempt.reason ?? "invalid attempt");
    } else if (attempt.status === "complete") {
      void this.submit(attempt);
    } else {
      this.statusLine.textContent = `typing… ${this.capture.keysDown}/11 keys`;
    }
  }

  private resetBox(message: string): void {
    this.capture = new AttemptCapture();
    this.input.value = "";
    this.statusLine.textContent = message;
  }

  private showFeatures(attempt: CapturedAttempt): void {
    try {
      const feats = localFeatures(attempt.events);
      this.featureBox.textContent = feats
        .map((v, i) => `${FEATURE_NAMES[i]}: ${v.toFixed(3)}s`)
        .join("\n");
    } catch {
      this.featureBox.textContent = "";
    }
  }

  private async submit(attempt: CapturedAttempt): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    this.banner.textContent = "";
    this.showFeatures(attempt);
    const user = this.userBox.value.trim() || "demo";
    const mode = this.modeSelect.value as Mode;
    try {
      if (mode === "enroll") {
        const out = await this.api.enroll(user, attempt.nonce, attempt.events);
        this.enrollCount = out.attempts;
        this.resetBox(`enrolled attempt ${out.attempts}/${MIN_ENROLL}`);
      } else {
        const out = await this.api.verify(user, attempt.events);
        this.verdict.textContent = out.accepted ? "ACCEPTED" : "REJECTED";
        this.verdict.className = out.accepted ? "accepted" : "rejected";
        this.gauge.textContent =
          `score ${out.score.toFixed(3)} vs threshold ` +
          `${out.threshold.toFixed(3)} (${out.detector})`;
        this.resetBox(out.accepted ? "match" : "no match — try again");
      }
    } catch (err) {
      if (err instanceof ServiceError) {
        this.banner.textContent = `${err.code}: ${err.message}`;
      } else {
        this.banner.textContent = `network failure: ${String(err)}`;
      }
      this.resetBox("attempt not recorded");
    } finally {
      this.busy = false;
      this.render();
    }
  }

  private async train(): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    this.banner.textContent = "";
    try {
      const out = await this.api.train(this.userBox.value.trim() || "demo");
      this.statusLine.textContent =
        `trained — threshold ${out.threshold.toFixed(3)}`;
    } catch (err) {
      this.banner.textContent = err instanceof ServiceError
        ? `${err.code}: ${err.message}`
        : `network failure: ${String(err)}`;
    } finally {
      this.busy = false;
    }
  }

  private render(): void {
    this.trainButton.disabled = this.enrollCount < MIN_ENROLL;
  }
}

if (typeof document !== "undefined" && document.getElementById("password-box")) {
  new Page().start();
}
