/**
 * DOM wiring for the triage console. All logic lives in the pure modules;
 * this file only moves values between the document and the state record.
 */

import { createSingleFlight, fetchModels, fetchOperatingCurve, predict } from "./api.js";
import { assertUsableCurve } from "./curve.js";
import {
  describeError,
  renderError,
  renderModelOptions,
  renderOperatingPanel,
  renderPredictionPanel,
} from "./render.js";
import { initialState, withCurve, withError, withModels, withModelSelected, withPrediction, withThreshold } from "./state.js";
import type { UiState } from "./state.js";

const API_BASE: string = (globalThis as { DERMOSCAN_API_BASE?: string }).DERMOSCAN_API_BASE ?? "";

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function startApp(): void {
  const modelSelect = element<HTMLSelectElement>("model-select");
  const fileInput = element<HTMLInputElement>("file-input");
  const ttaToggle = element<HTMLInputElement>("tta-toggle");
  const slider = element<HTMLInputElement>("threshold-slider");
  const thresholdBox = element<HTMLInputElement>("threshold-value");
  const preview = element<HTMLImageElement>("preview");
  const predictionPanel = element<HTMLDivElement>("prediction-panel");
  const operatingPanel = element<HTMLDivElement>("operating-panel");
  const errorBox = element<HTMLDivElement>("error-box");

  let state: UiState = initialState();
  let lastFile: File | null = null;
  const oneAtATime = createSingleFlight();

  function repaint(): void {
    modelSelect.innerHTML = renderModelOptions(state.models, state.selectedModel);
    slider.value = String(state.threshold);
    thresholdBox.value = state.threshold.toFixed(4);
    predictionPanel.innerHTML = state.lastPrediction
      ? renderPredictionPanel(state.lastPrediction, state.threshold)
      : "<p class=\"placeholder\">Upload a dermoscopic image to see class probabilities.</p>";
    operatingPanel.innerHTML = renderOperatingPanel(state.curve, state.threshold);
    errorBox.innerHTML = state.error ? renderError(state.error) : "";
  }

  async function loadCurve(): Promise<void> {
    try {
      const curve = assertUsableCurve(await fetchOperatingCurve(API_BASE, state.selectedModel));
      state = withCurve(state, curve);
    } catch {
      state = withCurve(state, null); // panel renders its own explanation
    }
    repaint();
  }

  async function runPredict(): Promise<void> {
    if (!lastFile || !state.selectedModel) return;
    const file = lastFile;
    try {
      const response = await oneAtATime((signal) =>
        predict(API_BASE, file, {
          model: state.selectedModel,
          tta: ttaToggle.checked ? 5 : 1,
          signal,
        }),
      );
      state = withPrediction(state, response);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      state = withError(state, describeError(err));
    }
    repaint();
  }

  modelSelect.addEventListener("change", () => {
    state = withModelSelected(state, modelSelect.value);
    repaint();
    void loadCurve();
    void runPredict();
  });

  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    lastFile = file;
    if (state.previewUrl) URL.revokeObjectURL(state.previewUrl);
    state = { ...state, previewUrl: URL.createObjectURL(file) };
    preview.src = state.previewUrl ?? "";
    preview.hidden = false;
    void runPredict();
  });

  ttaToggle.addEventListener("change", () => {
    void runPredict();
  });

  const onThresholdInput = (raw: string) => {
    state = withThreshold(state, Number(raw));
    repaint();
  };
  slider.addEventListener("input", () => onThresholdInput(slider.value));
  thresholdBox.addEventListener("change", () => onThresholdInput(thresholdBox.value));

  fetchModels(API_BASE)
    .then((models) => {
      if (models.length === 0) {
        state = withError(state, "The service reports no loaded models.");
        repaint();
        return;
      }
      state = withModels(state, models);
      repaint();
      void loadCurve();
    })
    .catch((err) => {
      state = withError(state, describeError(err));
      repaint();
    });

  repaint();
}

startApp();
