"""Full-scale benchmark on the real archive, compared against reference bands.

Runs the complete pipeline (ingest -> split -> fine-tune -> evaluate, with and
without test-time augmentation) for one or more architectures and writes a
comparison report. Out-of-band results are reported, not raised: at this scale
run-to-run variance is real, and the reference bands assume the default
hyperparameters, the 0.2/seed-101096 split, and pretrained backbones.

Expect hours of accelerator time per architecture.
"""
import argparse
import json
from pathlib import Path

from dermoscan.augment import AugmentationPolicy, load_image, presize
from dermoscan.evaluate import (
    PredictionSet,
    class_metrics,
    confusion_matrix,
    default_grid,
    malignant_probability,
    predict,
    predict_tta,
    threshold_sweep,
)
from dermoscan.ingest import build_class_folders, class_counts, parse_metadata, split_dataset
from dermoscan.labels import LABEL_ORDER, malignancy_class
from dermoscan.models import load_checkpoint
from dermoscan.train import TrainConfig, index_corpus, train

import numpy as np

# Expected operating bands for the default configuration. A run that lands
# outside a band gets flagged in the report for manual review.
RECALL_BANDS = {
    "resnet50": {"plain": {"akiec": 0.67, "bcc": 0.91, "mel": 0.74}, "tta": {"akiec": 0.69, "bcc": 0.93, "mel": 0.76}},
}
RECALL_TOLERANCE = 0.08
SENSITIVITY_BANDS = {("resnet50", "plain"): 0.9235, ("vgg16_bn", "tta"): 0.9540}
SENSITIVITY_TOLERANCE = 0.05
TTA_VIEWS = 5


def evaluate_checkpoint(ckpt, manifest, corpus_dir, tta, seed):
    network, meta = load_checkpoint(ckpt)
    policy = AugmentationPolicy(
        normalize_mean=tuple(meta["normalize_mean"]), normalize_std=tuple(meta["normalize_std"])
    )
    index = index_corpus(corpus_dir)
    ids = list(manifest.valid_ids)
    images = {k: presize(load_image(index[k][0]), policy.presize_to) for k in ids}
    if tta <= 1:
        preds = predict(network, images, policy, model_id=meta["arch"])
        entries = preds.entries
    else:
        entries = {}
        children = np.random.SeedSequence(seed).spawn(len(ids))
        for k, child in zip(ids, children):
            vec = predict_tta(network, images[k], policy, n=tta, seed=np.random.default_rng(child))
            entries[k] = tuple(float(x) for x in vec)

    preds = PredictionSet(meta["arch"], 0 if tta <= 1 else tta, LABEL_ORDER, entries)
    truths = {k: index[k][1] for k in ids}
    cm = confusion_matrix(preds, truths)
    metrics = class_metrics(cm)
    scores = {k: malignant_probability(v) for k, v in entries.items()}
    binary_truths = {k: malignancy_class(v) for k, v in truths.items()}
    sweep = threshold_sweep(scores, binary_truths, default_grid(scores))
    return metrics, sweep


def best_small_threshold(sweep):
    """Highest-accuracy point, ties broken toward the smallest threshold."""
    best = max(sweep.points, key=lambda p: (p.accuracy, -p.threshold))
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--metadata", required=True, help="archive metadata CSV")
    ap.add_argument("--images", required=True, nargs="+", help="directories of <image_id>.jpg")
    ap.add_argument("--out", required=True, help="working/report directory")
    ap.add_argument("--archs", nargs="+", default=["resnet50", "vgg16_bn"])
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=101096)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = parse_metadata(Path(args.metadata).read_text())
    print(f"{len(records)} records: {class_counts(records)}")

    corpus = out / "corpus"
    if not corpus.is_dir():
        report = build_class_folders(records, [Path(p) for p in args.images], corpus)
        print(f"staged {report.copied} images into {corpus}; {len(report.missing)} missing")

    manifest = split_dataset(records, 0.2, args.seed)
    print(f"split: {len(manifest.train_ids)} train / {len(manifest.valid_ids)} valid")

    rows = []
    for arch in args.archs:
        config = TrainConfig(arch=arch, epochs=args.epochs, seed=args.seed, checkpoint_dir=str(out / arch))
        ckpt, logs = train(config, manifest, corpus)
        print(f"{arch}: best valid loss {min(l.valid_loss for l in logs):.4f} -> {ckpt}")

        for mode, tta in (("plain", 1), ("tta", TTA_VIEWS)):
            metrics, sweep = evaluate_checkpoint(ckpt, manifest, corpus, tta, args.seed)
            recalls = dict(zip(metrics.labels, metrics.recall))
            best = best_small_threshold(sweep)
            row = {
                "arch": arch,
                "mode": mode,
                "recall_akiec": recalls["akiec"],
                "recall_bcc": recalls["bcc"],
                "recall_mel": recalls["mel"],
                "auc": sweep.auc,
                "best_threshold": best.threshold,
                "best_sensitivity": best.sensitivity,
                "flags": [],
            }
            bands = RECALL_BANDS.get(arch, {}).get(mode)
            if bands:
                for cls, target in bands.items():
                    if abs(recalls[cls] - target) > RECALL_TOLERANCE:
                        row["flags"].append(f"recall[{cls}]={recalls[cls]:.3f} outside {target}+/-{RECALL_TOLERANCE}")
            target = SENSITIVITY_BANDS.get((arch, mode))
            if target is not None and abs(best.sensitivity - target) > SENSITIVITY_TOLERANCE:
                row["flags"].append(f"sensitivity={best.sensitivity:.4f} outside {target}+/-{SENSITIVITY_TOLERANCE}")
            rows.append(row)
            print(f"{arch}/{mode}: recalls akiec {recalls['akiec']:.3f} bcc {recalls['bcc']:.3f} "
                  f"mel {recalls['mel']:.3f}, auc {sweep.auc:.3f}, "
                  f"sensitivity {best.sensitivity:.4f} @ t={best.threshold:.2f}")

    report_path = out / "comparison.json"
    report_path.write_text(json.dumps(rows, indent=2))
    flagged = [r for r in rows if r["flags"]]
    print(f"wrote {report_path}")
    if flagged:
        print(f"{len(flagged)} run(s) landed outside the reference bands:")
        for r in flagged:
            for f in r["flags"]:
                print(f"  {r['arch']}/{r['mode']}: {f}")
    else:
        print("all runs within the reference bands")


if __name__ == "__main__":
    main()
