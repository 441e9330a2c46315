/**
 * Pure HTML renderers: state in, markup strings out.
 *
 * Keeping these free of DOM access makes every displayed number testable
 * by string inspection. The only math performed here is display rounding
 * and the threshold comparison; all statistics come from service payloads.
 */

import { ApiError, LABEL_ORDER } from "./api.js";
import type { OperatingCurve, PredictResponse } from "./api.js";
import { nearestPoint } from "./curve.js";
import { decideAt } from "./state.js";

const LABEL_NAMES: Record<string, string> = {
  akiec: "actinic keratoses",
  bcc: "basal cell carcinoma",
  bkl: "benign keratosis",
  df: "dermatofibroma",
  mel: "melanoma",
  nv: "melanocytic nevus",
  vasc: "vascular lesion",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatPercent(probability: number): string {
  return `${(probability * 100).toFixed(1)}%`;
}

export function renderBars(probabilities: Record<string, number>): string {
  const rows = LABEL_ORDER.map((label) => {
    const p = probabilities[label] ?? 0;
    const pct = formatPercent(p);
    return `
      <div class="bar-row" data-label="${label}">
        <span class="bar-label" title="${LABEL_NAMES[label] ?? label}">${label}</span>
        <div class="bar-track"><div class="bar-fill" style="width:${(p * 100).toFixed(2)}%"></div></div>
        <span class="bar-value">${pct}</span>
      </div>`;
  });
  return `<div class="bars">${rows.join("")}</div>`;
}

export function renderBadge(malignantProbability: number, threshold: number): string {
  const decision = decideAt(malignantProbability, threshold);
  return `<span class="badge badge-${decision}">${decision.toUpperCase()}</span>`;
}

function describeViews(ttaN: number): string {
  return ttaN <= 1 ? "single deterministic view" : `average of ${ttaN} augmented views`;
}

export function renderPredictionPanel(response: PredictResponse, threshold: number): string {
  return `
    <div class="prediction">
      ${renderBars(response.probabilities)}
      <p class="malignant-line">
        malignant probability <strong>${response.malignant_probability.toFixed(4)}</strong>
        at threshold ${threshold.toFixed(2)} → ${renderBadge(response.malignant_probability, threshold)}
      </p>
      <p class="provenance">
        ${escapeHtml(response.model_id)} · ${describeViews(response.tta_n)} · seed ${response.seed}
      </p>
      <p class="disclaimer">${escapeHtml(response.disclaimer)}</p>
    </div>`;
}

function rocSvg(curve: OperatingCurve, t: number): string {
  const coords = curve.points.map((p) => ({
    x: (1 - p.specificity) * 100,
    y: (1 - p.sensitivity) * 100,
  }));
  const path = coords.map((c) => `${c.x.toFixed(2)},${c.y.toFixed(2)}`).join(" ");
  const current = nearestPoint(curve, t);
  const cx = ((1 - current.specificity) * 100).toFixed(2);
  const cy = ((1 - current.sensitivity) * 100).toFixed(2);
  return `
    <svg class="roc" viewBox="-6 -6 112 112" role="img" aria-label="ROC curve">
      <line x1="0" y1="100" x2="100" y2="0" class="roc-diagonal" />
      <polyline points="${path}" class="roc-line" fill="none" />
      <circle class="current-point" cx="${cx}" cy="${cy}" r="3" />
    </svg>`;
}

export function renderOperatingPanel(curve: OperatingCurve | null, t: number): string {
  if (curve === null) {
    return `
      <div class="operating-panel disabled">
        <p>No operating curve is bundled for this model, so sensitivity and
        specificity readouts are unavailable. The threshold still applies to
        the prediction above.</p>
      </div>`;
  }
  const point = nearestPoint(curve, t);
  return `
    <div class="operating-panel">
      <dl class="operating-readout">
        <dt>sensitivity</dt><dd class="sensitivity">${point.sensitivity.toFixed(4)}</dd>
        <dt>specificity</dt><dd class="specificity">${point.specificity.toFixed(4)}</dd>
        <dt>accuracy</dt><dd class="op-accuracy">${point.accuracy.toFixed(4)}</dd>
        <dt>grid point</dt><dd class="grid-point">t = ${point.t.toFixed(4)}</dd>
        <dt>AUC</dt><dd class="auc">${curve.auc.toFixed(4)}</dd>
      </dl>
      ${rocSvg(curve, t)}
    </div>`;
}

export function renderModelOptions(models: { model_id: string }[], selected: string): string {
  return models
    .map((m) => {
      const chosen = m.model_id === selected ? " selected" : "";
      return `<option value="${escapeHtml(m.model_id)}"${chosen}>${escapeHtml(m.model_id)}</option>`;
    })
    .join("");
}

export function renderError(message: string): string {
  return `<p class="error" role="alert">${escapeHtml(message)}</p>`;
}

/** Turns a thrown value into the inline message shown next to the upload form. */
export function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    if (err.status === 413) return `File too large: ${err.message}`;
    if (err.status === 400) return `Not a usable image: ${err.message}`;
    if (err.status === 404) return err.message;
    return `Service error (${err.status}): ${err.message}`;
  }
  if (err instanceof DOMException && err.name === "AbortError") {
    return "Superseded by a newer upload.";
  }
  if (err instanceof Error) return `Service unreachable: ${err.message}`;
  return "Service unreachable.";
}
