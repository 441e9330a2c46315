/**
 * UI state and its pure transitions.
 *
 * The decision badge is always the local comparison
 * `malignant_probability >= threshold` against the cached prediction —
 * moving the slider never re-contacts the service.
 */

import type { Decision, ModelRow, OperatingCurve, PredictResponse } from "./api.js";

export type UiState = {
  models: ModelRow[];
  selectedModel: string;
  /** Object URL for the chosen file, shown as the preview. */
  previewUrl: string | null;
  lastPrediction: PredictResponse | null;
  threshold: number;
  ttaEnabled: boolean;
  curve: OperatingCurve | null;
  /** Inline error from the most recent request, cleared on success. */
  error: string | null;
};

export function initialState(): UiState {
  return {
    models: [],
    selectedModel: "",
    previewUrl: null,
    lastPrediction: null,
    threshold: 0.06,
    ttaEnabled: false,
    curve: null,
    error: null,
  };
}

export function clampThreshold(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(1, Math.max(0, value));
}

/** The triage call at threshold t: malignant iff the cached probability reaches it. */
export function decideAt(malignantProbability: number, threshold: number): Decision {
  return malignantProbability >= threshold ? "malignant" : "benign";
}

export function withThreshold(state: UiState, value: number): UiState {
  return { ...state, threshold: clampThreshold(value) };
}

export function withModels(state: UiState, models: ModelRow[]): UiState {
  const selected = models.find((m) => m.model_id === state.selectedModel) ?? models[0];
  return {
    ...state,
    models,
    selectedModel: selected?.model_id ?? "",
    threshold: selected ? clampThreshold(selected.default_threshold) : state.threshold,
  };
}

export function withModelSelected(state: UiState, modelId: string): UiState {
  // Switching models invalidates both cached artifacts of the old one.
  return { ...state, selectedModel: modelId, lastPrediction: null, curve: null };
}

export function withPrediction(state: UiState, prediction: PredictResponse): UiState {
  return { ...state, lastPrediction: prediction, error: null };
}

export function withCurve(state: UiState, curve: OperatingCurve | null): UiState {
  return { ...state, curve };
}

export function withError(state: UiState, message: string): UiState {
  return { ...state, error: message };
}
