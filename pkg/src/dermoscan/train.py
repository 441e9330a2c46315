"""Fine-tuning: frozen-head warmup, differential learning rates, cosine annealing.

The loop is deliberately plain: seeded shuffles, explicit per-batch augmentation
seeds and an AdamW optimizer with two parameter groups. Weight updates are not
promised bitwise-reproducible across machines, but every random draw that feeds
the data pipeline (split, shuffle, augmentation, mixup) is.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .augment import AugmentationPolicy, batch_augment, load_image, mixup, presize, validation_batch
from .errors import CorpusIncomplete, DivergedLoss, NonFiniteLogits
from .ingest import SplitManifest
from .labels import LABEL_INDEX, LABEL_ORDER
from .models import (
    ARCHITECTURES,
    LesionClassifier,
    ModelSpec,
    build_model,
    save_checkpoint,
    set_backbone_trainable,
    split_param_groups,
)

SCHEDULES = ("cosine", "constant")


@dataclass
class TrainConfig:
    arch: str = "resnet50"
    epochs: int = 20
    frozen_epochs: int = 1
    batch_size: int = 64
    lr_head: float = 1e-3
    lr_backbone: float = 1e-5
    weight_decay: float = 1e-2
    schedule: str = "cosine"
    pretrained: bool = True
    head_dropout: float = 0.25
    class_weighted_loss: bool = False
    policy: AugmentationPolicy = field(default_factory=AugmentationPolicy)
    seed: int = 101096
    checkpoint_dir: str = "checkpoints"

    def validate(self) -> "TrainConfig":
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"arch must be one of {ARCHITECTURES}, got {self.arch!r}")
        if self.epochs < 0 or self.frozen_epochs < 0:
            raise ValueError("epochs and frozen_epochs must be non-negative")
        if self.frozen_epochs > self.epochs:
            raise ValueError("frozen_epochs must not exceed epochs")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.lr_head <= 0:
            raise ValueError("lr_head must be positive")
        if self.lr_backbone <= 0:
            raise ValueError("lr_backbone must be positive")
        if self.lr_backbone > self.lr_head:
            raise ValueError("differential rates require lr_backbone <= lr_head")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not 0.0 <= self.head_dropout < 1.0:
            raise ValueError("head_dropout must lie in [0, 1)")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        self.policy.validate()
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = self.policy.to_dict()
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        kwargs = dict(raw)
        known = {f.name for f in fields(cls)}
        strangers = sorted(set(kwargs) - known)
        if strangers:
            raise ValueError(f"unknown config keys: {', '.join(strangers)}")
        if "policy" in kwargs and isinstance(kwargs["policy"], dict):
            kwargs["policy"] = AugmentationPolicy.from_dict(kwargs["policy"])
        return cls(**kwargs).validate()


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_accuracy: float
    learning_rate_head: float
    wall_time: float


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float = 0.0) -> float:
    """Half-cosine decay from lr_max at step 0 to lr_min at total_steps."""
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step must be in [0, {total_steps}], got {step}")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


def _per_sample_ce(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    # -log softmax via the log-sum-exp identity; stable for large logits
    logz = torch.logsumexp(logits, dim=1)
    picked = logits.gather(1, target.view(-1, 1)).squeeze(1)
    return logz - picked


def cross_entropy_loss(logits, target, class_weights: torch.Tensor | None = None) -> torch.Tensor:
    """Mean cross-entropy; accepts one (C,) logit vector or a (B, C) batch."""
    logits = torch.as_tensor(logits)
    if not torch.isfinite(logits).all():
        raise NonFiniteLogits("logits contain NaN or infinity")
    if logits.ndim == 1:
        logits = logits.unsqueeze(0)
    target = torch.atleast_1d(torch.as_tensor(target, dtype=torch.long))
    per = _per_sample_ce(logits, target)
    if class_weights is not None:
        w = class_weights.to(per.dtype)[target]
        return (per * w).sum() / w.sum()
    return per.mean()


def mixup_loss(logits, label_a, label_b, lam, class_weights: torch.Tensor | None = None) -> torch.Tensor:
    """lam-weighted cross-entropy against both mixup partners."""
    logits = torch.as_tensor(logits)
    if not torch.isfinite(logits).all():
        raise NonFiniteLogits("logits contain NaN or infinity")
    if logits.ndim == 1:
        logits = logits.unsqueeze(0)
    label_a = torch.atleast_1d(torch.as_tensor(label_a, dtype=torch.long))
    label_b = torch.atleast_1d(torch.as_tensor(label_b, dtype=torch.long))
    lam = torch.as_tensor(lam, dtype=logits.dtype)
    if bool((lam < 0).any() or (lam > 1).any()):
        raise ValueError("lam must lie in [0, 1]")
    ce_a = _per_sample_ce(logits, label_a)
    ce_b = _per_sample_ce(logits, label_b)
    if class_weights is not None:
        w = class_weights.to(logits.dtype)
        ce_a = ce_a * w[label_a]
        ce_b = ce_b * w[label_b]
    return (lam * ce_a + (1.0 - lam) * ce_b).mean()


def index_corpus(corpus_dir: str | Path) -> dict[str, tuple[Path, str]]:
    """Map image_id -> (file path, label) from a folder-per-class layout."""
    corpus_dir = Path(corpus_dir)
    index: dict[str, tuple[Path, str]] = {}
    for label in LABEL_ORDER:
        for p in sorted((corpus_dir / label).glob("*.jpg")):
            index[p.stem] = (p, label)
    return index


def _derived_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


def _load_presized(index, ids, presize_to: int) -> tuple[torch.Tensor, torch.Tensor]:
    images = torch.stack([presize(load_image(index[i][0]), presize_to) for i in ids])
    labels = torch.tensor([LABEL_INDEX[index[i][1]] for i in ids], dtype=torch.long)
    return images, labels


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i : i + size]


def _class_weights(index, ids) -> torch.Tensor:
    counts = torch.zeros(len(LABEL_ORDER))
    for i in ids:
        counts[LABEL_INDEX[index[i][1]]] += 1
    weights = torch.where(counts > 0, counts.sum() / (len(LABEL_ORDER) * counts.clamp(min=1)), torch.zeros(()))
    return weights


def train(
    config: TrainConfig,
    manifest: SplitManifest,
    corpus_dir: str | Path,
    weights_dir: str | Path | None = None,
) -> tuple[Path, list[EpochLog]]:
    """Run the fine-tuning schedule; returns (best checkpoint path, per-epoch logs)."""
    config.validate()
    index = index_corpus(corpus_dir)
    missing = [i for i in (*manifest.train_ids, *manifest.valid_ids) if i not in index]
    if missing:
        shown = ", ".join(missing[:5])
        raise CorpusIncomplete(f"{len(missing)} manifest images missing from {corpus_dir} (e.g. {shown})")

    torch.manual_seed(config.seed)
    model = build_model(
        ModelSpec(config.arch, len(LABEL_ORDER), config.pretrained, config.head_dropout),
        weights_dir=weights_dir,
    )
    groups = split_param_groups(model)
    optimizer = torch.optim.AdamW(
        [
            {"params": groups.backbone, "lr": config.lr_backbone},
            {"params": groups.head, "lr": config.lr_head},
        ],
        weight_decay=config.weight_decay,
    )

    ckpt_dir = Path(config.checkpoint_dir)
    ckpt_path = ckpt_dir / f"{config.arch}.pt"
    mean, std = config.policy.normalize_mean, config.policy.normalize_std
    logs: list[EpochLog] = []

    if config.epochs == 0:
        save_checkpoint(model, ckpt_path, mean, std)
        return ckpt_path, logs

    weights = _class_weights(index, manifest.train_ids) if config.class_weighted_loss else None
    log_path = ckpt_dir / f"{config.arch}.log.csv"
    best_valid = math.inf

    for epoch in range(config.epochs):
        start = time.perf_counter()
        frozen = epoch < config.frozen_epochs
        set_backbone_trainable(model, not frozen)

        if config.schedule == "cosine":
            lr_head = cosine_lr(epoch, config.epochs, config.lr_head, 0.0)
            lr_backbone = cosine_lr(epoch, config.epochs, config.lr_backbone, 0.0)
        else:
            lr_head, lr_backbone = config.lr_head, config.lr_backbone
        optimizer.param_groups[0]["lr"] = lr_backbone
        optimizer.param_groups[1]["lr"] = lr_head

        order_rng = np.random.default_rng(_derived_seed(config.seed, 0x5E, epoch))
        order = [manifest.train_ids[i] for i in order_rng.permutation(len(manifest.train_ids))]

        model.train()
        total_loss, seen = 0.0, 0
        for bidx, batch_ids in enumerate(_chunks(order, config.batch_size)):
            raw, labels = _load_presized(index, batch_ids, config.policy.presize_to)
            images = batch_augment(raw, config.policy, _derived_seed(config.seed, 0xA6, epoch, bidx))
            try:
                if config.policy.mixup_alpha > 0 and len(batch_ids) >= 2:
                    mixed = mixup(images, labels, config.policy.mixup_alpha, _derived_seed(config.seed, 0x317, epoch, bidx))
                    loss = mixup_loss(model(mixed.images), mixed.label_a, mixed.label_b, mixed.lam, weights)
                else:
                    loss = cross_entropy_loss(model(images), labels, weights)
            except NonFiniteLogits as e:
                raise DivergedLoss(f"training diverged at epoch {epoch}, batch {bidx}: {e}", logs) from e
            if not torch.isfinite(loss):
                raise DivergedLoss(f"training loss became non-finite at epoch {epoch}, batch {bidx}", logs)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += float(loss.item()) * len(batch_ids)
            seen += len(batch_ids)
        train_loss = total_loss / max(seen, 1)

        valid_loss, valid_acc = _evaluate_split(model, index, manifest.valid_ids, config)
        if not manifest.valid_ids:
            valid_loss, valid_acc = train_loss, 0.0

        logs.append(
            EpochLog(
                epoch=epoch,
                train_loss=train_loss,
                valid_loss=valid_loss,
                valid_accuracy=valid_acc,
                learning_rate_head=lr_head,
                wall_time=time.perf_counter() - start,
            )
        )
        _append_log(log_path, logs[-1])

        if valid_loss < best_valid:
            best_valid = valid_loss
            save_checkpoint(model, ckpt_path, mean, std)

    return ckpt_path, logs


def _evaluate_split(model: LesionClassifier, index, ids, config: TrainConfig) -> tuple[float, float]:
    if not ids:
        return math.nan, 0.0
    model.eval()
    total_loss, correct = 0.0, 0
    with torch.no_grad():
        for batch_ids in _chunks(list(ids), config.batch_size):
            raw, labels = _load_presized(index, batch_ids, config.policy.presize_to)
            views = validation_batch(raw, config.policy)
            logits = model(views)
            total_loss += float(cross_entropy_loss(logits, labels).item()) * len(batch_ids)
            correct += int((logits.argmax(dim=1) == labels).sum().item())
    model.train()
    return total_loss / len(ids), correct / len(ids)


def _append_log(path: Path, log: EpochLog) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists()
    with path.open("a", newline="") as f:
        writer = csv.writer(f)
        if new:
            writer.writerow(["epoch", "train_loss", "valid_loss", "valid_accuracy", "lr_head", "wall_time"])
        writer.writerow(
            [
                log.epoch,
                f"{log.train_loss:.6f}",
                f"{log.valid_loss:.6f}",
                f"{log.valid_accuracy:.6f}",
                f"{log.learning_rate_head:.10g}",
                f"{log.wall_time:.3f}",
            ]
        )
