import { afterEach, describe, expect, it, vi } from "vitest";

import {
  ApiError,
  createSingleFlight,
  fetchModels,
  fetchOperatingCurve,
  predict,
} from "../src/api.js";
import { makeResponse } from "./helpers.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("fetchModels", () => {
  it("parses the model listing", async () => {
    const rows = [{ model_id: "resnet50", arch: "resnet50", tta_default: 5, default_threshold: 0.06 }];
    const mock = vi.fn(async () => jsonResponse(rows));
    vi.stubGlobal("fetch", mock);

    expect(await fetchModels("http://svc:8000")).toEqual(rows);
    expect(mock).toHaveBeenCalledWith("http://svc:8000/models");
  });
});

describe("fetchOperatingCurve", () => {
  it("requests the named model's curve", async () => {
    const curve = { auc: 0.9, points: [{ t: 0, sensitivity: 1, specificity: 0, accuracy: 0.3 }] };
    const mock = vi.fn(async () => jsonResponse(curve));
    vi.stubGlobal("fetch", mock);

    expect(await fetchOperatingCurve("", "resnet50")).toEqual(curve);
    expect(mock).toHaveBeenCalledWith("/operating-curve?model=resnet50");
  });

  it("raises a typed error carrying the service's detail", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => jsonResponse({ detail: "no operating curve bundled" }, 404)));

    const failure = await fetchOperatingCurve("", "resnet50").catch((e: unknown) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(404);
    expect((failure as ApiError).message).toBe("no operating curve bundled");
  });
});

describe("predict", () => {
  it("posts the image as multipart form data with the chosen options", async () => {
    const mock = vi.fn(async (_url: string, _init?: RequestInit) => jsonResponse(makeResponse()));
    vi.stubGlobal("fetch", mock);

    const blob = new Blob([new Uint8Array([1, 2, 3])], { type: "image/jpeg" });
    const result = await predict("", blob, { model: "resnet50", tta: 5, seed: 11 });
    expect(result.model_id).toBe("resnet50");

    const [url, init] = mock.mock.calls[0]!;
    expect(url).toBe("/predict?model=resnet50&tta=5&seed=11");
    expect(init?.method).toBe("POST");
    const form = init?.body as FormData;
    expect(form.get("image")).toBeInstanceOf(Blob);
  });

  it("maps an oversized upload to a 413 error and sends nothing twice", async () => {
    const mock = vi.fn(async () => jsonResponse({ detail: "upload exceeds 1000 bytes" }, 413));
    vi.stubGlobal("fetch", mock);

    const failure = await predict("", new Blob(["x"]), { model: "m", tta: 1 }).catch((e: unknown) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(413);
    expect(mock).toHaveBeenCalledTimes(1);
  });

  it("falls back to the status text when the error body is not JSON", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => new Response("<html>busted</html>", { status: 502, statusText: "Bad Gateway" })),
    );

    const failure = await predict("", new Blob(["x"]), { model: "m", tta: 1 }).catch((e: unknown) => e);
    expect((failure as ApiError).status).toBe(502);
    expect((failure as ApiError).message).toBe("Bad Gateway");
  });
});

describe("createSingleFlight", () => {
  it("aborts the in-flight request when a newer one starts", async () => {
    const gate = createSingleFlight();
    const seen: AbortSignal[] = [];

    const first = gate(
      (signal) =>
        new Promise((_, reject) => {
          seen.push(signal);
          signal.addEventListener("abort", () => reject(new DOMException("aborted", "AbortError")));
        }),
    );
    const second = gate(async (signal) => {
      seen.push(signal);
      return "fresh";
    });

    await expect(second).resolves.toBe("fresh");
    await expect(first).rejects.toThrow(/aborted/);
    expect(seen[0]?.aborted).toBe(true);
    expect(seen[1]?.aborted).toBe(false);
  });

  it("leaves a lone request untouched", async () => {
    const gate = createSingleFlight();
    await expect(gate(async () => 7)).resolves.toBe(7);
  });
});
