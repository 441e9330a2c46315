/** Shared test utilities: a seeded PRNG and float64 neighbour helpers. */

import type { OperatingCurve, PredictResponse } from "../src/api.js";

/** mulberry32: tiny deterministic PRNG, plenty for property-style loops. */
export function seededRandom(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const float = new Float64Array(1);
const bits = new BigInt64Array(float.buffer);

/** The smallest float64 strictly greater than x (positive finite x only). */
export function nextUp(x: number): number {
  if (!(x > 0) || !Number.isFinite(x)) throw new Error("nextUp expects positive finite x");
  float[0] = x;
  bits[0] = bits[0]! + 1n;
  return float[0]!;
}

/** The largest float64 strictly less than x (positive finite x only). */
export function nextDown(x: number): number {
  if (!(x > 0) || !Number.isFinite(x)) throw new Error("nextDown expects positive finite x");
  float[0] = x;
  bits[0] = bits[0]! - 1n;
  return float[0]!;
}

/** Uniform draw from the 7-simplex via normalized exponentials. */
export function randomDistribution(rand: () => number): Record<string, number> {
  const labels = ["akiec", "bcc", "bkl", "df", "mel", "nv", "vasc"];
  const draws = labels.map(() => -Math.log(1 - rand()));
  const total = draws.reduce((s, d) => s + d, 0);
  return Object.fromEntries(labels.map((label, i) => [label, draws[i]! / total]));
}

/**
 * A random well-formed operating curve: strictly ascending thresholds that
 * include both endpoints, sensitivity non-increasing from 1 to 0 and
 * specificity non-decreasing from 0 to 1 (what a real sweep always yields).
 */
export function randomCurve(rand: () => number, maxPoints = 40): OperatingCurve {
  const n = 2 + Math.floor(rand() * (maxPoints - 2));
  const inner = Array.from({ length: n }, () => rand());
  const thresholds = [...new Set([0, 1, ...inner])].sort((a, b) => a - b);
  const count = thresholds.length;
  const sens = thresholds.map((_, i) =>
    i === 0 ? 1 : i === count - 1 ? 0 : rand(),
  );
  sens.sort((a, b) => b - a);
  const spec = thresholds.map((_, i) =>
    i === 0 ? 0 : i === count - 1 ? 1 : rand(),
  );
  spec.sort((a, b) => a - b);
  return {
    auc: rand(),
    points: thresholds.map((t, i) => ({
      t,
      sensitivity: sens[i]!,
      specificity: spec[i]!,
      accuracy: rand(),
    })),
  };
}

export function makeResponse(overrides: Partial<PredictResponse> = {}): PredictResponse {
  const probabilities = {
    akiec: 0.02,
    bcc: 0.03,
    bkl: 0.1,
    df: 0.05,
    mel: 0.15,
    nv: 0.6,
    vasc: 0.05,
  };
  return {
    model_id: "resnet50",
    probabilities,
    malignant_probability: 0.2,
    threshold: 0.06,
    decision: "malignant",
    tta_n: 1,
    seed: 12345,
    disclaimer: "Research prototype for decision support; not a medical diagnosis.",
    ...overrides,
  };
}
