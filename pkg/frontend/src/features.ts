/**
 * Client-side mirror of the server's 31-feature timing extractor.
 *
 * Used only for on-screen display while typing; the server recomputes
 * features from the raw events and its answer is authoritative.
 */

export const KEY_SEQUENCE = [
  ".", "t", "i", "e", "5", "R", "o", "a", "n", "l", "Enter",
] as const;

export type KeyToken = (typeof KEY_SEQUENCE)[number];

export interface WireEvent {
  key: string;
  kind: "down" | "up";
  t_ms: number;
}

const CSV_KEY_NAMES = [
  "period", "t", "i", "e", "five", "Shift.r", "o", "a", "n", "l", "Return",
];

function buildFeatureNames(): string[] {
  const names: string[] = [];
  CSV_KEY_NAMES.forEach((name, k) => {
    names.push(`H.${name}`);
    if (k < CSV_KEY_NAMES.length - 1) {
      const next = CSV_KEY_NAMES[k + 1];
      names.push(`DD.${name}.${next}`, `UD.${name}.${next}`);
    }
  });
  return names;
}

/** The 31 feature labels in canonical benchmark column order. */
export const FEATURE_NAMES = buildFeatureNames();

/**
 * Extract the 31 hold / down-down / up-down intervals (seconds) from a
 * complete attempt's events. Throws if the events do not form exactly one
 * well-ordered pass over the password keys.
 */
export function localFeatures(events: WireEvent[]): number[] {
  const downs: number[] = [];
  const ups = new Map<number, number>();
  for (const ev of events) {
    if (ev.kind === "down") {
      const idx = downs.length;
      if (idx >= KEY_SEQUENCE.length || ev.key !== KEY_SEQUENCE[idx]) {
        throw new Error(`unexpected key ${ev.key} at position ${idx}`);
      }
      downs.push(ev.t_ms);
    } else {
      // Match the latest unreleased press of this key.
      for (let i = downs.length - 1; i >= 0; i--) {
        if (KEY_SEQUENCE[i] === ev.key && !ups.has(i)) {
          ups.set(i, ev.t_ms);
          break;
        }
      }
    }
  }
  if (downs.length !== KEY_SEQUENCE.length || ups.size !== KEY_SEQUENCE.length) {
    throw new Error("incomplete attempt");
  }
  const out: number[] = [];
  for (let k = 0; k < KEY_SEQUENCE.length; k++) {
    out.push((ups.get(k)! - downs[k]) / 1000);
    if (k < KEY_SEQUENCE.length - 1) {
      out.push((downs[k + 1] - downs[k]) / 1000);
      out.push((downs[k + 1] - ups.get(k)!) / 1000);
    }
  }
  return out;
}
