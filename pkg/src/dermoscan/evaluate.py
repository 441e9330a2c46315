"""Metrics over prediction sets: confusion matrices, per-class P/R/F1,
benign/malignant regrouping, threshold sweeps, and report rendering.

Everything downstream of `predict`/`predict_tta` is pure numpy on plain
mappings, so the metric layer can be exercised without a model or torch.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch

from .augment import AugmentationPolicy, batch_augment, validation_batch
from .errors import MissingTruth, OutputNotWritable
from .labels import LABEL_ORDER, MALIGNANT, BENIGN, malignancy_class

# one deterministic view plus four augmented views
DEFAULT_TTA_N = 5


@dataclass(frozen=True)
class PredictionSet:
    """Per-image probability vectors for one model run (tta_n 0 = plain)."""

    model_id: str
    tta_n: int
    label_order: tuple[str, ...]
    entries: dict[str, tuple[float, ...]]

    def validate(self) -> "PredictionSet":
        k = len(self.label_order)
        for image_id, vec in self.entries.items():
            if len(vec) != k:
                raise ValueError(f"{image_id}: expected {k} probabilities, got {len(vec)}")
            if min(vec, default=0.0) < 0.0:
                raise ValueError(f"{image_id}: negative probability")
            if abs(sum(vec) - 1.0) > 1e-5:
                raise ValueError(f"{image_id}: probabilities sum to {sum(vec):.7f}")
        return self

    def to_json(self) -> str:
        return json.dumps(
            {
                "model_id": self.model_id,
                "tta_n": self.tta_n,
                "label_order": list(self.label_order),
                "entries": {k: list(self.entries[k]) for k in sorted(self.entries)},
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "PredictionSet":
        raw = json.loads(text)
        return cls(
            model_id=raw["model_id"],
            tta_n=int(raw["tta_n"]),
            label_order=tuple(raw["label_order"]),
            entries={k: tuple(float(x) for x in v) for k, v in raw["entries"].items()},
        ).validate()

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path

    @classmethod
    def load(cls, path: str | Path) -> "PredictionSet":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row = true label, column = argmax-predicted label."""

    counts: np.ndarray
    label_order: tuple[str, ...] = LABEL_ORDER

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    labels: tuple[str, ...]
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float


@dataclass(frozen=True)
class BinaryOperatingPoint:
    threshold: float
    sensitivity: float
    specificity: float
    accuracy: float


@dataclass(frozen=True)
class ThresholdSweepResult:
    points: tuple[BinaryOperatingPoint, ...]
    auc: float


def _softmax_probs(network: torch.nn.Module, views: torch.Tensor) -> torch.Tensor:
    with torch.no_grad():
        return torch.softmax(network(views), dim=1)


def predict(
    network: torch.nn.Module,
    images: Mapping[str, torch.Tensor],
    policy: AugmentationPolicy,
    model_id: str = "model",
    batch_size: int = 32,
) -> PredictionSet:
    """Deterministic single-view predictions for a map of presized images."""
    network.eval()
    ids = list(images)
    entries: dict[str, tuple[float, ...]] = {}
    for i in range(0, len(ids), batch_size):
        chunk = ids[i : i + batch_size]
        batch = torch.stack([images[k] for k in chunk])
        probs = _softmax_probs(network, validation_batch(batch, policy))
        for k, vec in zip(chunk, probs):
            entries[k] = tuple(float(x) for x in vec)
    return PredictionSet(model_id, 0, LABEL_ORDER, entries).validate()


def predict_tta(
    network: torch.nn.Module,
    image: torch.Tensor,
    policy: AugmentationPolicy,
    n: int = DEFAULT_TTA_N,
    seed: int | np.random.Generator = 0,
) -> np.ndarray:
    """Mean probability over one deterministic view and n-1 seeded augmented views."""
    if n < 1:
        raise ValueError("n must be >= 1")
    network.eval()
    batch = image.unsqueeze(0)
    views = [validation_batch(batch, policy)]
    gen = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(n - 1):
        views.append(batch_augment(batch, policy, gen))
    probs = _softmax_probs(network, torch.cat(views))
    return probs.mean(dim=0).double().numpy()


def confusion_matrix(preds: PredictionSet, truths: Mapping[str, str]) -> ConfusionMatrix:
    """Count (true, argmax-predicted) pairs; argmax ties go to the earliest label."""
    order = {label: i for i, label in enumerate(preds.label_order)}
    counts = np.zeros((len(preds.label_order),) * 2, dtype=np.int64)
    for image_id, vec in preds.entries.items():
        if image_id not in truths:
            raise MissingTruth(f"no true label for {image_id}")
        i = order[truths[image_id]]
        j = int(np.argmax(vec))
        counts[i, j] += 1
    return ConfusionMatrix(counts, preds.label_order)


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    counts = cm.counts
    tp = np.diag(counts).astype(float)
    precision = [_safe_div(tp[i], counts[:, i].sum()) for i in range(len(cm.label_order))]
    recall = [_safe_div(tp[i], counts[i, :].sum()) for i in range(len(cm.label_order))]
    f1 = [_safe_div(2 * p * r, p + r) for p, r in zip(precision, recall)]
    return ClassMetrics(
        labels=cm.label_order,
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        macro_precision=float(np.mean(precision)),
        macro_recall=float(np.mean(recall)),
        macro_f1=float(np.mean(f1)),
    )


def default_taxonomy() -> dict[str, str]:
    return {label: malignancy_class(label) for label in LABEL_ORDER}


def malignant_probability(
    vector: Sequence[float],
    taxonomy: Mapping[str, str] | None = None,
    label_order: tuple[str, ...] = LABEL_ORDER,
) -> float:
    """Regroup a 7-class vector to a single malignancy score."""
    taxonomy = taxonomy or default_taxonomy()
    return float(sum(v for label, v in zip(label_order, vector) if taxonomy[label] == MALIGNANT))


def _binary_arrays(scores: Mapping[str, float], truths: Mapping[str, str]) -> tuple[np.ndarray, np.ndarray]:
    missing = [k for k in scores if k not in truths]
    if missing:
        raise MissingTruth(f"no malignancy truth for {missing[0]} (+{len(missing) - 1} more)")
    keys = sorted(scores)
    s = np.array([scores[k] for k in keys], dtype=float)
    pos = np.array([truths[k] == MALIGNANT for k in keys], dtype=bool)
    return s, pos


def binary_metrics(scores: Mapping[str, float], truths: Mapping[str, str], t: float) -> BinaryOperatingPoint:
    """Operating point at threshold t: predicted malignant iff score >= t."""
    s, pos = _binary_arrays(scores, truths)
    called = s >= t
    tp = int((called & pos).sum())
    fn = int((~called & pos).sum())
    tn = int((~called & ~pos).sum())
    fp = int((called & ~pos).sum())
    return BinaryOperatingPoint(
        threshold=float(t),
        sensitivity=_safe_div(tp, tp + fn),
        specificity=_safe_div(tn, tn + fp),
        accuracy=_safe_div(tp + tn, len(s)),
    )


def _roc_auc(s: np.ndarray, pos: np.ndarray) -> float:
    """Trapezoidal area under the ROC built from every distinct score."""
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return 0.5  # concordance is undefined with one class absent; report chance
    order = np.argsort(-s, kind="stable")
    s_sorted, pos_sorted = s[order], pos[order]
    # keep only the last index of each tied run so ties move diagonally
    last = np.r_[np.nonzero(np.diff(s_sorted))[0], len(s_sorted) - 1]
    tpr = np.r_[0.0, np.cumsum(pos_sorted)[last] / n_pos]
    fpr = np.r_[0.0, np.cumsum(~pos_sorted)[last] / n_neg]
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def default_grid(scores: Mapping[str, float] | Sequence[float], step: float = 0.01) -> tuple[float, ...]:
    """Regular [0,1] grid densified with every observed score.

    Observed values are clipped to [0, 1]: accumulated float error can push a
    probability sum an ulp past 1, and the grid contract is hard [0, 1].
    """
    if not 0 < step <= 1:
        raise ValueError("step must be in (0, 1]")
    values = list(scores.values()) if isinstance(scores, Mapping) else list(scores)
    base = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    observed = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    return tuple(float(t) for t in np.unique(np.concatenate([base, observed])))


def threshold_sweep(
    scores: Mapping[str, float],
    truths: Mapping[str, str],
    grid: Sequence[float] | None = None,
) -> ThresholdSweepResult:
    """One operating point per grid value; AUC from all distinct scores."""
    if grid is None:
        grid = default_grid(scores)
    grid = np.asarray(grid, dtype=float)
    if grid.size and (grid.min() < 0.0 or grid.max() > 1.0):
        raise ValueError("grid thresholds must lie within [0, 1]")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    points = tuple(binary_metrics(scores, truths, float(t)) for t in grid)
    s, pos = _binary_arrays(scores, truths)
    return ThresholdSweepResult(points=points, auc=_roc_auc(s, pos))


def sweep_to_json(sweep: ThresholdSweepResult) -> str:
    return json.dumps(
        {
            "auc": sweep.auc,
            "points": [
                {
                    "t": p.threshold,
                    "sensitivity": p.sensitivity,
                    "specificity": p.specificity,
                    "accuracy": p.accuracy,
                }
                for p in sweep.points
            ],
        },
        indent=2,
    )


def sweep_from_json(text: str) -> ThresholdSweepResult:
    raw = json.loads(text)
    points = tuple(
        BinaryOperatingPoint(
            threshold=float(p["t"]),
            sensitivity=float(p["sensitivity"]),
            specificity=float(p["specificity"]),
            accuracy=float(p["accuracy"]),
        )
        for p in raw["points"]
    )
    return ThresholdSweepResult(points=points, auc=float(raw["auc"]))


def render_report(
    cm: ConfusionMatrix,
    metrics: ClassMetrics,
    sweep: ThresholdSweepResult,
    out_dir: str | Path,
) -> list[Path]:
    """Write the CSV tables and plots; contents are pure functions of the inputs."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = [
            _write_metrics_csv(metrics, out_dir / "metrics.csv"),
            _write_confusion_csv(cm, out_dir / "confusion_matrix.csv"),
            _write_sweep_csv(sweep, out_dir / "sweep.csv"),
            _write_roc_csv(sweep, out_dir / "roc.csv"),
        ]
        written += _render_plots(cm, metrics, sweep, out_dir)
    except OSError as exc:
        raise OutputNotWritable(f"cannot write report under {out_dir}: {exc}") from exc
    return written


def _write_metrics_csv(metrics: ClassMetrics, path: Path) -> Path:
    lines = ["label,precision,recall,f1"]
    for i, label in enumerate(metrics.labels):
        lines.append(f"{label},{metrics.precision[i]:.6f},{metrics.recall[i]:.6f},{metrics.f1[i]:.6f}")
    lines.append(f"macro,{metrics.macro_precision:.6f},{metrics.macro_recall:.6f},{metrics.macro_f1:.6f}")
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_confusion_csv(cm: ConfusionMatrix, path: Path) -> Path:
    lines = ["true\\predicted," + ",".join(cm.label_order)]
    for i, label in enumerate(cm.label_order):
        lines.append(label + "," + ",".join(str(int(c)) for c in cm.counts[i]))
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_sweep_csv(sweep: ThresholdSweepResult, path: Path) -> Path:
    lines = ["t,sensitivity,specificity,accuracy"]
    for p in sweep.points:
        lines.append(f"{p.threshold:.10g},{p.sensitivity:.6f},{p.specificity:.6f},{p.accuracy:.6f}")
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_roc_csv(sweep: ThresholdSweepResult, path: Path) -> Path:
    lines = ["t,fpr,tpr", *(f"{p.threshold:.10g},{1.0 - p.specificity:.6f},{p.sensitivity:.6f}" for p in sweep.points)]
    path.write_text("\n".join(lines) + "\n")
    return path


def _render_plots(cm, metrics, sweep, out_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []

    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    im = ax.imshow(cm.counts, cmap="Blues")
    ax.set_xticks(range(len(cm.label_order)), cm.label_order)
    ax.set_yticks(range(len(cm.label_order)), cm.label_order)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    peak = cm.counts.max() if cm.total else 1
    for i in range(len(cm.label_order)):
        for j in range(len(cm.label_order)):
            color = "white" if cm.counts[i, j] > peak / 2 else "black"
            ax.text(j, i, str(int(cm.counts[i, j])), ha="center", va="center", color=color, fontsize=8)
    fig.colorbar(im, ax=ax)
    written.append(_save_fig(fig, out_dir / "confusion_matrix.png"))

    fig, ax = plt.subplots(figsize=(8, 4))
    x = np.arange(len(metrics.labels))
    for offset, (name, series) in enumerate(
        [("precision", metrics.precision), ("recall", metrics.recall), ("f1", metrics.f1)]
    ):
        ax.bar(x + (offset - 1) * 0.27, series, width=0.25, label=name)
    ax.set_xticks(x, metrics.labels)
    ax.set_ylim(0, 1.05)
    ax.legend()
    written.append(_save_fig(fig, out_dir / "metrics.png"))

    ts = [p.threshold for p in sweep.points]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(ts, [p.sensitivity for p in sweep.points], label="sensitivity")
    ax.plot(ts, [p.specificity for p in sweep.points], label="specificity")
    ax.plot(ts, [p.accuracy for p in sweep.points], label="accuracy", linestyle="--")
    ax.set_xlabel("threshold")
    ax.legend()
    written.append(_save_fig(fig, out_dir / "sweep.png"))

    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([1.0 - p.specificity for p in sweep.points], [p.sensitivity for p in sweep.points], marker=".", ms=3)
    ax.plot([0, 1], [0, 1], linestyle=":", color="gray")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("sensitivity")
    ax.set_title(f"AUC = {sweep.auc:.4f}")
    written.append(_save_fig(fig, out_dir / "roc.png"))
    return written


def _save_fig(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path
