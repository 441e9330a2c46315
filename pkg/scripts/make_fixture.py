"""Build a small self-contained service fixture: checkpoint + operating curve + sample images.

Trains resnet18 from scratch on a synthetic class-colored corpus, evaluates it
on the same images, and bundles the resulting threshold sweep next to the
checkpoint so `dermoscan serve --ckpt-dir <out>/checkpoints` works offline.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from synthdata import balanced_counts, make_class_corpus  # noqa: E402

from dermoscan.augment import AugmentationPolicy, load_image, presize
from dermoscan.evaluate import default_grid, malignant_probability, predict, sweep_to_json, threshold_sweep
from dermoscan.ingest import SplitManifest
from dermoscan.labels import malignancy_class
from dermoscan.models import load_checkpoint, sweep_path
from dermoscan.train import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="fixture root (created if missing)")
    ap.add_argument("--images", type=int, default=64, help="synthetic corpus size")
    ap.add_argument("--epochs", type=int, default=6)
    ap.add_argument("--lr", type=float, default=3e-4, help="learning rate for both param groups")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    out = Path(args.out)
    corpus = out / "corpus"
    labels = make_class_corpus(corpus, balanced_counts(args.images), seed=20)
    ids = tuple(sorted(labels))
    print(f"wrote {corpus} ({len(ids)} images)")

    manifest = SplitManifest(seed=args.seed, valid_fraction=0.0, train_ids=ids, valid_ids=ids)
    config = TrainConfig(
        arch="resnet18",
        epochs=args.epochs,
        frozen_epochs=0,
        batch_size=16,
        lr_head=args.lr,
        lr_backbone=args.lr,
        weight_decay=0.0,
        pretrained=False,
        head_dropout=0.0,
        policy=AugmentationPolicy(
            rotation_range=0.0,
            hflip_prob=0.0,
            vflip_prob=0.0,
            crop_scale_min=1.0,
            brightness_jitter=0.0,
            mixup_alpha=0.0,
        ),
        seed=args.seed,
        checkpoint_dir=str(out / "checkpoints"),
    )
    ckpt, logs = train(config, manifest, corpus)
    print(f"wrote {ckpt} (final train loss {logs[-1].train_loss:.4f})" if logs else f"wrote {ckpt}")

    network, _ = load_checkpoint(ckpt)
    images = {k: presize(load_image(corpus / labels[k] / f"{k}.jpg"), config.policy.presize_to) for k in ids}
    preds = predict(network, images, config.policy, model_id="resnet18", batch_size=16)
    scores = {k: malignant_probability(v) for k, v in preds.entries.items()}
    truths = {k: malignancy_class(labels[k]) for k in ids}
    sweep = threshold_sweep(scores, truths, default_grid(scores))

    # Demo contract: the browser slider reads stored endpoint rows, so the
    # toy model must not saturate. A malignant score of exactly 1.0 (float32
    # softmax underflow of every benign class) would leave sensitivity > 0
    # at the t=1.0 grid point under the score >= t decision rule.
    top = max(scores.values())
    first, last = sweep.points[0], sweep.points[-1]
    usable = (
        top < 1.0
        and (first.threshold, first.sensitivity, first.specificity) == (0.0, 1.0, 0.0)
        and (last.threshold, last.sensitivity, last.specificity) == (1.0, 0.0, 1.0)
    )
    if not usable:
        print(
            f"error: fixture model saturated (max malignant score {top!r}); "
            "endpoint rows would not read (1.0, 0.0)/(0.0, 1.0). "
            "Rebuild with fewer --epochs or a smaller --lr.",
            file=sys.stderr,
        )
        raise SystemExit(1)

    target = sweep_path(ckpt)
    target.write_text(sweep_to_json(sweep))
    print(f"wrote {target} (auc {sweep.auc:.3f}, score range {min(scores.values()):.3g}..{top:.9g})")

    samples = out / "samples"
    samples.mkdir(exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for label in ("nv", "mel"):
        pick = rng.choice([k for k in ids if labels[k] == label])
        data = (corpus / label / f"{pick}.jpg").read_bytes()
        (samples / f"{label}.jpg").write_bytes(data)
        print(f"wrote {samples / f'{label}.jpg'}")

    print(f"serve with: dermoscan serve --ckpt-dir {out / 'checkpoints'}")


if __name__ == "__main__":
    main()
