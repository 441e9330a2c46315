/**
 * Lookups against the stored validation operating curve.
 *
 * The curve arrives fully computed from the service; the client never
 * derives sensitivity or specificity itself, it only picks which stored
 * grid point to display for the current slider position.
 */

import type { OperatingCurve, OperatingPoint } from "./api.js";

/** Rejects curves the lookup cannot be trusted on. */
export function assertUsableCurve(curve: OperatingCurve): OperatingCurve {
  if (curve.points.length === 0) {
    throw new Error("operating curve has no points");
  }
  for (let i = 0; i < curve.points.length; i++) {
    const point = curve.points[i]!;
    if (!(point.t >= 0 && point.t <= 1)) {
      throw new Error(`operating curve threshold ${point.t} outside [0, 1]`);
    }
    if (i > 0 && point.t <= curve.points[i - 1]!.t) {
      throw new Error("operating curve thresholds must be strictly ascending");
    }
  }
  return curve;
}

/**
 * The stored grid point nearest to the slider value; ties between two
 * equidistant neighbours go to the lower threshold (the more sensitive one).
 */
export function nearestPoint(curve: OperatingCurve, t: number): OperatingPoint {
  let best = curve.points[0];
  if (best === undefined) throw new Error("operating curve has no points");
  let bestDistance = Math.abs(t - best.t);
  for (const point of curve.points) {
    const distance = Math.abs(t - point.t);
    if (distance < bestDistance) {
      best = point;
      bestDistance = distance;
    }
  }
  return best;
}
