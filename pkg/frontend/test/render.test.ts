import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import type { OperatingCurve } from "../src/api.js";
import {
  describeError,
  escapeHtml,
  formatPercent,
  renderBadge,
  renderBars,
  renderError,
  renderModelOptions,
  renderOperatingPanel,
  renderPredictionPanel,
} from "../src/render.js";
import { makeResponse, nextUp, randomDistribution, seededRandom } from "./helpers.js";

const LABELS = ["akiec", "bcc", "bkl", "df", "mel", "nv", "vasc"];

function displayedPercents(html: string): number[] {
  return [...html.matchAll(/class="bar-value">([0-9.]+)%</g)].map((m) => Number(m[1]));
}

function displayedSensitivity(html: string): number {
  const match = html.match(/class="sensitivity">([0-9.]+)</);
  if (!match) throw new Error("no sensitivity readout in panel");
  return Number(match[1]);
}

describe("probability bars", () => {
  it("renders seven bars in the canonical label order", () => {
    const html = renderBars(makeResponse().probabilities);
    const order = [...html.matchAll(/data-label="(\w+)"/g)].map((m) => m[1]);
    expect(order).toEqual(LABELS);
  });

  it("displayed percentages sum to 100 up to rounding", () => {
    const rand = seededRandom(0xba125);
    for (let trial = 0; trial < 200; trial++) {
      const html = renderBars(randomDistribution(rand));
      const shown = displayedPercents(html);
      expect(shown).toHaveLength(7);
      const total = shown.reduce((s, v) => s + v, 0);
      // each of the 7 values is rounded to one decimal: at most 0.05 off
      expect(Math.abs(total - 100)).toBeLessThanOrEqual(7 * 0.05 + 1e-9);
    }
  });

  it("treats a missing class as zero rather than crashing", () => {
    const html = renderBars({ nv: 1.0 });
    expect(displayedPercents(html).reduce((s, v) => s + v, 0)).toBeCloseTo(100, 5);
    expect(html).toContain('data-label="mel"');
  });

  it("formats probabilities to one decimal place", () => {
    expect(formatPercent(0.6)).toBe("60.0%");
    expect(formatPercent(0.02345)).toBe("2.3%");
    expect(formatPercent(1)).toBe("100.0%");
  });
});

describe("decision badge", () => {
  it("labels the two outcomes distinctly", () => {
    expect(renderBadge(0.2, 0.06)).toContain("MALIGNANT");
    expect(renderBadge(0.2, 0.06)).toContain("badge-malignant");
    expect(renderBadge(0.01, 0.06)).toContain("BENIGN");
    expect(renderBadge(0.01, 0.06)).toContain("badge-benign");
  });

  it("is recomputed locally from the slider, not from the server's decision", () => {
    const response = makeResponse({
      malignant_probability: 0.2,
      decision: "benign", // stale: computed server-side at threshold 0.5
      threshold: 0.5,
    });
    expect(renderPredictionPanel(response, 0.1)).toContain("MALIGNANT");
    expect(renderPredictionPanel(response, 0.9)).toContain("BENIGN");
  });

  it("flips exactly at t = cached malignant probability in the rendered panel", () => {
    const rand = seededRandom(99);
    for (let trial = 0; trial < 50; trial++) {
      const p = 0.001 + rand() * 0.998;
      const response = makeResponse({ malignant_probability: p });
      expect(renderPredictionPanel(response, p)).toContain("MALIGNANT");
      expect(renderPredictionPanel(response, nextUp(p))).toContain("BENIGN");
    }
  });
});

describe("prediction panel", () => {
  it("annotates the single-view variant", () => {
    const html = renderPredictionPanel(makeResponse({ tta_n: 1 }), 0.06);
    expect(html).toContain("single deterministic view");
  });

  it("annotates the augmented-average variant with its view count", () => {
    const html = renderPredictionPanel(makeResponse({ tta_n: 5 }), 0.06);
    expect(html).toContain("average of 5 augmented views");
  });

  it("always carries the service's disclaimer", () => {
    const html = renderPredictionPanel(makeResponse(), 0.06);
    expect(html).toContain("not a medical diagnosis");
  });
});

describe("operating panel", () => {
  const curve: OperatingCurve = {
    auc: 0.93,
    points: [
      { t: 0.0, sensitivity: 1.0, specificity: 0.0, accuracy: 0.31 },
      { t: 0.06, sensitivity: 0.9235, specificity: 0.62, accuracy: 0.71 },
      { t: 0.5, sensitivity: 0.7, specificity: 0.93, accuracy: 0.86 },
      { t: 1.0, sensitivity: 0.0, specificity: 1.0, accuracy: 0.69 },
    ],
  };

  it("shows stored sensitivity 1.0 at slider 0 and 0.0 at slider 1", () => {
    expect(displayedSensitivity(renderOperatingPanel(curve, 0))).toBe(1.0);
    expect(displayedSensitivity(renderOperatingPanel(curve, 1))).toBe(0.0);
  });

  it("shows the stored value verbatim at a measured grid point", () => {
    const html = renderOperatingPanel(curve, 0.06);
    expect(html).toContain("0.9235");
    expect(html).toContain("0.6200");
  });

  it("displayed sensitivity never increases as the slider moves right", () => {
    let previous = Infinity;
    for (let t = 0; t <= 1.00001; t += 0.01) {
      const shown = displayedSensitivity(renderOperatingPanel(curve, Math.min(t, 1)));
      expect(shown).toBeLessThanOrEqual(previous);
      previous = shown;
    }
  });

  it("highlights the current operating point on the ROC curve", () => {
    const html = renderOperatingPanel(curve, 0.06);
    // x = (1 - specificity) * 100, y = (1 - sensitivity) * 100
    expect(html).toContain('<circle class="current-point" cx="38.00" cy="7.65"');
  });

  it("explains itself when no curve is available instead of guessing", () => {
    const html = renderOperatingPanel(null, 0.06);
    expect(html).toContain("disabled");
    expect(html).toContain("unavailable");
    expect(html).not.toContain('class="sensitivity"');
  });
});

describe("inline errors", () => {
  it("describes an oversized upload as a file-too-large problem", () => {
    const message = describeError(new ApiError(413, "upload exceeds 10485760 bytes"));
    expect(message.toLowerCase()).toContain("file too large");
  });

  it("surfaces the service detail for undecodable images", () => {
    const message = describeError(new ApiError(400, "could not decode image payload"));
    expect(message).toContain("could not decode image payload");
  });

  it("passes unknown-model messages through", () => {
    expect(describeError(new ApiError(404, "unknown model 'x'"))).toBe("unknown model 'x'");
  });

  it("reports network failures as the service being unreachable", () => {
    expect(describeError(new TypeError("fetch failed"))).toContain("unreachable");
  });

  it("renders messages safely escaped", () => {
    const html = renderError('<img src=x onerror="alert(1)">');
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;img");
  });

  it("escapes markup-significant characters", () => {
    expect(escapeHtml('a<b>&"c')).toBe("a&lt;b&gt;&amp;&quot;c");
  });
});

describe("model options", () => {
  it("marks the selected model", () => {
    const html = renderModelOptions(
      [{ model_id: "resnet50" }, { model_id: "vgg16_bn" }],
      "vgg16_bn",
    );
    expect(html).toContain('<option value="resnet50">');
    expect(html).toContain('<option value="vgg16_bn" selected>');
  });
});
