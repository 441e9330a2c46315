"""Classifier construction: pretrained backbones with replaceable transfer heads.

The four supported backbones come from torchvision. ``build_model`` swaps the
stock 1000-class head for a dropout + linear head sized to the lesion taxonomy
and keeps backbone/head as separate submodules so differential learning rates
and freezing fall out of the module structure.
"""
from __future__ import annotations

import json
import os
import pickle
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .errors import CheckpointCorrupt, UnknownArchitecture, WeightsUnavailable
from .labels import LABEL_ORDER

ARCHITECTURES = ("densenet121", "vgg16_bn", "resnet18", "resnet50")

WEIGHTS_DIR_ENV = "DERMOSCAN_WEIGHTS_DIR"


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    num_classes: int = 7
    pretrained: bool = True
    head_dropout: float = 0.25

    def validate(self) -> "ModelSpec":
        if self.arch not in ARCHITECTURES:
            raise UnknownArchitecture(f"arch must be one of {ARCHITECTURES}, got {self.arch!r}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if not 0.0 <= self.head_dropout < 1.0:
            raise ValueError("head_dropout must be in [0, 1)")
        return self


@dataclass
class ParamGroups:
    backbone: list[nn.Parameter]
    head: list[nn.Parameter]


class LesionClassifier(nn.Module):
    """Backbone feature extractor followed by a fresh classification head."""

    def __init__(self, spec: ModelSpec, backbone: nn.Module, head: nn.Module, feature_dim: int):
        super().__init__()
        self.spec = spec
        self.feature_dim = feature_dim
        self.backbone = backbone
        self.head = head

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))


def stock_model(arch: str) -> nn.Module:
    """The unmodified torchvision architecture with its standard 1000-class head."""
    from torchvision import models

    ctors = {
        "densenet121": models.densenet121,
        "vgg16_bn": models.vgg16_bn,
        "resnet18": models.resnet18,
        "resnet50": models.resnet50,
    }
    if arch not in ctors:
        raise UnknownArchitecture(f"arch must be one of {ARCHITECTURES}, got {arch!r}")
    return ctors[arch](weights=None)


def _pretrained_state(arch: str, weights_dir: str | Path | None) -> dict:
    from torchvision import models

    weights = models.get_model_weights(arch).DEFAULT
    model_dir = weights_dir or os.environ.get(WEIGHTS_DIR_ENV) or None
    try:
        return weights.get_state_dict(
            progress=False, check_hash=True, model_dir=str(model_dir) if model_dir else None
        )
    except Exception as e:
        hint = model_dir or "the default torch hub cache"
        raise WeightsUnavailable(
            f"pretrained weights for {arch} not cached under {hint} and could not be "
            f"downloaded ({e}); pass pretrained=False or populate {WEIGHTS_DIR_ENV}"
        ) from e


def build_model(spec: ModelSpec, weights_dir: str | Path | None = None) -> LesionClassifier:
    """Construct a classifier per spec; raises WeightsUnavailable offline without a cache."""
    spec.validate()
    backbone = stock_model(spec.arch)
    if spec.pretrained:
        backbone.load_state_dict(_pretrained_state(spec.arch, weights_dir))

    if spec.arch in ("resnet18", "resnet50"):
        feature_dim = backbone.fc.in_features
        backbone.fc = nn.Identity()
    elif spec.arch == "densenet121":
        feature_dim = backbone.classifier.in_features
        backbone.classifier = nn.Identity()
    else:  # vgg16_bn: swap the 7x7 pool + 123M-parameter MLP for global pooling
        backbone.avgpool = nn.AdaptiveAvgPool2d(1)
        backbone.classifier = nn.Identity()
        feature_dim = 512

    head = nn.Sequential(nn.Dropout(spec.head_dropout), nn.Linear(feature_dim, spec.num_classes))
    return LesionClassifier(spec, backbone, head, feature_dim)


def parameter_count(network: nn.Module) -> int:
    """Number of trainable scalar parameters."""
    return sum(p.numel() for p in network.parameters() if p.requires_grad)


def split_param_groups(network: LesionClassifier) -> ParamGroups:
    """Disjoint backbone/head parameter sets covering the whole network."""
    return ParamGroups(
        backbone=list(network.backbone.parameters()),
        head=list(network.head.parameters()),
    )


def set_backbone_trainable(network: LesionClassifier, trainable: bool) -> None:
    for p in network.backbone.parameters():
        p.requires_grad_(trainable)


def sidecar_path(checkpoint: str | Path) -> Path:
    checkpoint = Path(checkpoint)
    return checkpoint.with_name(checkpoint.stem + ".json")


def sweep_path(checkpoint: str | Path) -> Path:
    checkpoint = Path(checkpoint)
    return checkpoint.with_name(checkpoint.stem + ".sweep.json")


def save_checkpoint(
    network: LesionClassifier,
    path: str | Path,
    normalize_mean=(0.485, 0.456, 0.406),
    normalize_std=(0.229, 0.224, 0.225),
) -> Path:
    """Write weights plus the JSON sidecar that makes inference self-describing."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(network.state_dict(), path)
    sidecar = {
        "arch": network.spec.arch,
        "num_classes": network.spec.num_classes,
        "normalize_mean": list(float(v) for v in normalize_mean),
        "normalize_std": list(float(v) for v in normalize_std),
        "label_order": list(LABEL_ORDER),
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2))
    return path


def load_checkpoint(path: str | Path) -> tuple[LesionClassifier, dict]:
    """Rebuild a model from weights + sidecar; the model comes back in eval mode."""
    path = Path(path)
    meta_path = sidecar_path(path)
    if not path.is_file():
        raise CheckpointCorrupt(f"checkpoint file not found: {path}")
    if not meta_path.is_file():
        raise CheckpointCorrupt(f"checkpoint sidecar not found: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
        spec = ModelSpec(arch=meta["arch"], num_classes=int(meta["num_classes"]), pretrained=False)
        network = build_model(spec)
        state = torch.load(path, map_location="cpu", weights_only=True)
        network.load_state_dict(state)
    except (KeyError, ValueError, RuntimeError, json.JSONDecodeError, pickle.UnpicklingError, EOFError) as e:
        raise CheckpointCorrupt(f"cannot load checkpoint {path}: {e}") from e
    network.eval()
    return network, meta
