/**
 * Typed client for the dermoscan inference service.
 *
 * Every statistic shown in the UI originates here; the rest of the app only
 * compares, formats, and draws what these payloads contain.
 */

export type ModelRow = {
  model_id: string;
  arch: string;
  tta_default: number;
  default_threshold: number;
};

export type Decision = "malignant" | "benign";

export type PredictResponse = {
  model_id: string;
  probabilities: Record<string, number>;
  malignant_probability: number;
  threshold: number;
  decision: Decision;
  tta_n: number;
  seed: number;
  disclaimer: string;
};

export type OperatingPoint = {
  t: number;
  sensitivity: number;
  specificity: number;
  accuracy: number;
};

export type OperatingCurve = {
  auc: number;
  points: OperatingPoint[];
};

/** The seven diagnosis codes, in the order every probability bar is drawn. */
export const LABEL_ORDER = ["akiec", "bcc", "bkl", "df", "mel", "nv", "vasc"] as const;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let detail = response.statusText || `request failed (${response.status})`;
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export async function fetchHealth(base: string): Promise<{ status: string }> {
  const response = await fetch(`${base}/health`);
  await raiseForStatus(response);
  return (await response.json()) as { status: string };
}

export async function fetchModels(base: string): Promise<ModelRow[]> {
  const response = await fetch(`${base}/models`);
  await raiseForStatus(response);
  return (await response.json()) as ModelRow[];
}

export async function fetchOperatingCurve(base: string, model: string): Promise<OperatingCurve> {
  const response = await fetch(`${base}/operating-curve?model=${encodeURIComponent(model)}`);
  await raiseForStatus(response);
  return (await response.json()) as OperatingCurve;
}

export type PredictRequest = {
  model: string;
  /** Views per image; 1 is the plain deterministic pass. */
  tta: number;
  seed?: number;
  signal?: AbortSignal;
};

export async function predict(
  base: string,
  image: Blob,
  options: PredictRequest,
): Promise<PredictResponse> {
  const params = new URLSearchParams({
    model: options.model,
    tta: String(options.tta),
  });
  if (options.seed !== undefined) params.set("seed", String(options.seed));
  const form = new FormData();
  form.append("image", image);
  const response = await fetch(`${base}/predict?${params}`, {
    method: "POST",
    body: form,
    signal: options.signal,
  });
  await raiseForStatus(response);
  return (await response.json()) as PredictResponse;
}

/**
 * Serializes predict calls: starting a new request aborts the one in flight,
 * so at most one upload is ever pending and stale responses never land.
 */
export function createSingleFlight(): <T>(run: (signal: AbortSignal) => Promise<T>) => Promise<T> {
  let inFlight: AbortController | null = null;
  return async (run) => {
    inFlight?.abort();
    const controller = new AbortController();
    inFlight = controller;
    try {
      return await run(controller.signal);
    } finally {
      if (inFlight === controller) inFlight = null;
    }
  };
}
