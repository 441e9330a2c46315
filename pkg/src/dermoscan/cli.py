"""Single command-line entry point: ingest, split, train, eval, sweep, serve.

Every subcommand prints its effective arguments up front (runs are
self-documenting) and one "wrote <path>" line per artifact it produces.
Exit codes: 0 success, 1 operational error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .augment import AugmentationPolicy, load_image, presize
from .errors import CorpusIncomplete, DermoscanError
from .evaluate import (
    PredictionSet,
    class_metrics,
    confusion_matrix,
    default_grid,
    malignant_probability,
    predict,
    predict_tta,
    render_report,
    sweep_to_json,
    threshold_sweep,
)
from .ingest import (
    build_class_folders,
    class_counts,
    load_manifest,
    parse_metadata,
    save_manifest,
    split_dataset,
)
from .labels import LABEL_ORDER, malignancy_class
from .models import load_checkpoint, sweep_path
from .service import config_from_env, serve
from .train import TrainConfig, index_corpus, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dermoscan", description="Dermoscopic lesion classification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="sort metadata-listed images into one folder per label")
    p.add_argument("--metadata", required=True, help="HAM10000-style metadata CSV")
    p.add_argument("--images", required=True, nargs="+", help="directories holding <image_id>.jpg files")
    p.add_argument("--out", required=True, help="destination root for the class folders")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("split", help="deterministic train/valid partition")
    p.add_argument("--metadata", required=True)
    p.add_argument("--val-frac", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=101096)
    p.add_argument("--out", required=True, help="manifest JSON path")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="fine-tune a pretrained backbone")
    p.add_argument("--config", help="JSON training config; may carry corpus_dir and split_manifest")
    p.add_argument("--arch", help="override architecture")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--mixup-alpha", type=float)
    p.add_argument("--out", help="override checkpoint directory")
    p.add_argument("--corpus", help="class-folder corpus (overrides config corpus_dir)")
    p.add_argument("--split", help="split manifest JSON (overrides config split_manifest)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="7-class report on the validation split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--tta", type=int, default=0, help="views per image; 0 or 1 = plain deterministic pass")
    p.add_argument("--seed", type=int, default=101096)
    p.add_argument("--report-dir", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="binary operating points over thresholds")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--out", help="sweep JSON path (default: bundled next to the checkpoint)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--ckpt-dir", help="directory of *.pt checkpoints (default: DERMOSCAN_CHECKPOINT_DIR)")
    p.add_argument("--port", type=int, help="default: DERMOSCAN_PORT or 8000")
    p.add_argument("--threshold", type=float, help="default malignancy threshold (default 0.06)")
    p.add_argument("--config", help="JSON service config; overrides environment")
    p.add_argument("--audit-log", help="opt-in request-metadata log (JSON lines)")
    p.set_defaults(func=_cmd_serve)
    return parser


def run(argv: list[str]) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    shown = {k: v for k, v in vars(args).items() if k not in ("command", "func") and v is not None}
    print(f"{args.command}: " + " ".join(f"{k}={v}" for k, v in sorted(shown.items())))
    try:
        return args.func(args)
    except (DermoscanError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(run(sys.argv[1:]))


def _cmd_ingest(args) -> int:
    records = parse_metadata(Path(args.metadata).read_text())
    counts = class_counts(records)
    print("counts: " + " ".join(f"{label}={counts[label]}" for label in LABEL_ORDER))
    report = build_class_folders(records, [Path(d) for d in args.images], Path(args.out))
    if report.missing:
        print(f"warning: {len(report.missing)} listed images not found", file=sys.stderr)
    print(f"copied {report.copied} images")
    print(f"wrote {args.out}")
    return 0


def _cmd_split(args) -> int:
    records = parse_metadata(Path(args.metadata).read_text())
    manifest = split_dataset(records, args.val_frac, args.seed)
    save_manifest(manifest, args.out)
    print(f"split: {len(manifest.train_ids)} train / {len(manifest.valid_ids)} valid")
    print(f"wrote {args.out}")
    return 0


def _cmd_train(args) -> int:
    raw: dict = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
    corpus = args.corpus or raw.pop("corpus_dir", None)
    split = args.split or raw.pop("split_manifest", None)
    raw.pop("corpus_dir", None)
    raw.pop("split_manifest", None)
    if not corpus or not split:
        raise ValueError("train needs a corpus and a split manifest (flags or config keys)")
    if args.arch:
        raw["arch"] = args.arch
    if args.epochs is not None:
        raw["epochs"] = args.epochs
    if args.batch_size is not None:
        raw["batch_size"] = args.batch_size
    if args.mixup_alpha is not None:
        raw.setdefault("policy", {})["mixup_alpha"] = args.mixup_alpha
    if args.out:
        raw["checkpoint_dir"] = args.out
    config = TrainConfig.from_dict(raw)
    ckpt, logs = train(config, load_manifest(split), corpus)
    if logs:
        print(f"final: train_loss={logs[-1].train_loss:.4f} valid_loss={logs[-1].valid_loss:.4f} "
              f"valid_accuracy={logs[-1].valid_accuracy:.4f}")
        print(f"wrote {ckpt.with_name(ckpt.stem + '.log.csv')}")
    print(f"wrote {ckpt}")
    return 0


def _predict_valid(network, policy, index, ids, tta: int, seed: int, batch_size: int = 32):
    """PredictionSet over the given ids: plain chunked pass, or per-image TTA."""
    if tta <= 1:
        entries: dict[str, tuple[float, ...]] = {}
        for i in range(0, len(ids), batch_size):
            chunk = ids[i : i + batch_size]
            images = {k: presize(load_image(index[k][0]), policy.presize_to) for k in chunk}
            entries.update(predict(network, images, policy).entries)
        return entries, 0
    children = np.random.SeedSequence(seed).spawn(len(ids))
    entries = {}
    for k, child in zip(ids, children):
        staged = presize(load_image(index[k][0]), policy.presize_to)
        vec = predict_tta(network, staged, policy, n=tta, seed=np.random.default_rng(child))
        entries[k] = tuple(float(x) for x in vec)
    return entries, tta


def _load_eval_inputs(args):
    network, meta = load_checkpoint(args.ckpt)
    policy = AugmentationPolicy(
        normalize_mean=tuple(meta["normalize_mean"]), normalize_std=tuple(meta["normalize_std"])
    )
    manifest = load_manifest(args.split)
    index = index_corpus(args.corpus)
    missing = [k for k in manifest.valid_ids if k not in index]
    if missing:
        raise CorpusIncomplete(f"{len(missing)} validation images missing from {args.corpus} (e.g. {missing[0]})")
    return network, policy, list(manifest.valid_ids), index


def _cmd_eval(args) -> int:
    network, policy, ids, index = _load_eval_inputs(args)
    entries, tta_n = _predict_valid(network, policy, index, ids, args.tta, args.seed)
    preds = PredictionSet(Path(args.ckpt).stem, tta_n, LABEL_ORDER, entries).validate()
    report_dir = Path(args.report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    print(f"wrote {preds.save(report_dir / 'predictions.json')}")

    truths = {k: index[k][1] for k in ids}
    cm = confusion_matrix(preds, truths)
    metrics = class_metrics(cm)
    scores = {k: malignant_probability(entries[k]) for k in ids}
    sweep = threshold_sweep(scores, {k: malignancy_class(v) for k, v in truths.items()})
    accuracy = float(np.trace(cm.counts)) / cm.total if cm.total else 0.0
    print(f"accuracy={accuracy:.4f} macro_f1={metrics.macro_f1:.4f} auc={sweep.auc:.4f}")
    for path in render_report(cm, metrics, sweep, report_dir):
        print(f"wrote {path}")
    return 0


def _cmd_sweep(args) -> int:
    network, policy, ids, index = _load_eval_inputs(args)
    entries, _ = _predict_valid(network, policy, index, ids, tta=0, seed=0)
    scores = {k: malignant_probability(entries[k]) for k in ids}
    truths = {k: malignancy_class(index[k][1]) for k in ids}
    sweep = threshold_sweep(scores, truths, default_grid(scores, args.grid_step))
    out = Path(args.out) if args.out else sweep_path(Path(args.ckpt))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sweep_to_json(sweep))
    print(f"auc={sweep.auc:.4f} over {len(sweep.points)} operating points")
    print(f"wrote {out}")
    return 0


def _cmd_serve(args) -> int:
    config = config_from_env(
        config_file=args.config,
        checkpoint_dir=args.ckpt_dir,
        port=args.port,
        default_threshold=args.threshold,
        audit_log=args.audit_log,
    )
    print(f"serving {len(config.checkpoint_paths)} checkpoint(s) on port {config.port} "
          f"(default model {config.default_model!r}, threshold {config.default_threshold})")
    serve(config)
    return 0
