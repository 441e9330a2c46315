"""Two-stage augmentation: stage images large, then rotate/flip/crop/resize per batch.

Stage one (``presize``) resizes every image to a large square (default 460) once,
in RAM. Stage two (``batch_augment``) composes rotation, flips, a random crop and
the final resize (default 224) into a single bilinear resampling per image, then
applies brightness jitter and normalization. Sampling the crop inside the rotated
frame's valid region is what keeps synthetic border fill out of the output; the
``_sample_geometry`` math below enforces that.

All randomness flows through an explicit seed or numpy Generator; identical
(batch, policy, seed) triples produce bitwise-identical outputs.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image, UnidentifiedImageError

from .errors import BatchTooSmall, EmptyImage, ShapeMismatch, ZeroStd

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# pixels kept clear of the rotated frame's border so bilinear taps never
# straddle it; meaningful for presize_to well above 4*GUARD (always true at 460)
BORDER_GUARD_PX = 2.0


@dataclass
class AugmentationPolicy:
    presize_to: int = 460
    final_size: int = 224
    rotation_range: float = 360.0
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5
    crop_scale_min: float = 0.75
    brightness_jitter: float = 0.2
    normalize_mean: tuple[float, float, float] = IMAGENET_MEAN
    normalize_std: tuple[float, float, float] = IMAGENET_STD
    mixup_alpha: float = 0.4

    def validate(self) -> "AugmentationPolicy":
        if self.presize_to < self.final_size:
            raise ValueError("presize_to must be >= final_size")
        for name in ("hflip_prob", "vflip_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if not 0.0 < self.crop_scale_min <= 1.0:
            raise ValueError("crop_scale_min must be in (0, 1]")
        if not 0.0 <= self.rotation_range <= 360.0:
            raise ValueError("rotation_range must be in [0, 360] degrees")
        if self.brightness_jitter < 0:
            raise ValueError("brightness_jitter must be non-negative")
        if any(s <= 0 for s in self.normalize_std):
            raise ValueError("normalize_std components must be > 0")
        if self.mixup_alpha < 0:
            raise ValueError("mixup_alpha must be non-negative")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["normalize_mean"] = list(self.normalize_mean)
        d["normalize_std"] = list(self.normalize_std)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "AugmentationPolicy":
        kwargs = dict(raw)
        for key in ("normalize_mean", "normalize_std"):
            if key in kwargs:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        return cls(**kwargs).validate()


def identity_policy(presize_to: int = 460, final_size: int = 224) -> AugmentationPolicy:
    """Policy whose only effect is the final resize (no jitter, no normalization)."""
    return AugmentationPolicy(
        presize_to=presize_to,
        final_size=final_size,
        rotation_range=0.0,
        hflip_prob=0.0,
        vflip_prob=0.0,
        crop_scale_min=1.0,
        brightness_jitter=0.0,
        normalize_mean=(0.0, 0.0, 0.0),
        normalize_std=(1.0, 1.0, 1.0),
        mixup_alpha=0.0,
    )


def _as_generator(rng: int | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _spawn_generators(rng: int | np.random.Generator, n: int) -> list[np.random.Generator]:
    # one independent substream per batch item
    if isinstance(rng, np.random.Generator):
        return rng.spawn(n)
    children = np.random.SeedSequence(rng).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


@dataclass(frozen=True)
class GeometrySample:
    """One item's draw: rotation, flips, crop extent and offset, brightness.

    crop_frac is the crop side as a fraction of the staged side, after clamping
    to the rotated frame's inscribed valid square. tx/ty are the crop center
    offsets in normalized [-1, 1] image coordinates.
    """

    theta_deg: float
    hflip: bool
    vflip: bool
    crop_frac: float
    tx: float
    ty: float
    brightness: float


def _sample_geometry(policy: AugmentationPolicy, gen: np.random.Generator) -> GeometrySample:
    theta = float(gen.uniform(0.0, policy.rotation_range)) if policy.rotation_range > 0 else 0.0
    hflip = bool(gen.uniform() < policy.hflip_prob)
    vflip = bool(gen.uniform() < policy.vflip_prob)
    scale = float(gen.uniform(policy.crop_scale_min, 1.0))

    if theta == 0.0:
        # unrotated frame: its whole area is valid, so a full-frame crop is exact
        limit = 1.0
        guard = 0.0
    else:
        rad = math.radians(theta)
        spread = abs(math.cos(rad)) + abs(math.sin(rad))  # in [1, sqrt(2)]
        guard = 2.0 * BORDER_GUARD_PX / policy.presize_to
        limit = (1.0 - guard) / spread

    crop_frac = max(min(scale, limit), 1e-3)
    rad = math.radians(theta)
    spread = abs(math.cos(rad)) + abs(math.sin(rad))
    avail = max((1.0 - guard) - crop_frac * spread, 0.0)
    tx = float(gen.uniform(-avail, avail))
    ty = float(gen.uniform(-avail, avail))
    b = policy.brightness_jitter
    brightness = float(gen.uniform(1.0 - b, 1.0 + b))
    return GeometrySample(theta, hflip, vflip, crop_frac, tx, ty, brightness)


def _affine_matrix(s: GeometrySample) -> list[list[float]]:
    # maps output grid coords to source coords: v = crop_frac * R(theta) * F * u + t
    rad = math.radians(s.theta_deg)
    cos, sin = math.cos(rad), math.sin(rad)
    fx = -1.0 if s.hflip else 1.0
    fy = -1.0 if s.vflip else 1.0
    k = s.crop_frac
    return [
        [k * cos * fx, -k * sin * fy, s.tx],
        [k * sin * fx, k * cos * fy, s.ty],
    ]


def _corner_extent(s: GeometrySample) -> float:
    """Largest |coordinate| the sampling footprint reaches in source space.

    The footprint is affine, so checking the four output corners bounds every
    sampled point; <= 1.0 means no tap falls outside the source image.
    """
    m = _affine_matrix(s)
    extent = 0.0
    for ux in (-1.0, 1.0):
        for uy in (-1.0, 1.0):
            vx = m[0][0] * ux + m[0][1] * uy + m[0][2]
            vy = m[1][0] * ux + m[1][1] * uy + m[1][2]
            extent = max(extent, abs(vx), abs(vy))
    return extent


def _resample(
    images: torch.Tensor,
    samples: list[GeometrySample],
    out_size: int,
    padding_mode: str = "reflection",
) -> torch.Tensor:
    mats = torch.tensor([_affine_matrix(s) for s in samples], dtype=images.dtype)
    grid = F.affine_grid(mats, (images.shape[0], images.shape[1], out_size, out_size), align_corners=False)
    return F.grid_sample(images, grid, mode="bilinear", padding_mode=padding_mode, align_corners=False)


_IDENTITY = GeometrySample(0.0, False, False, 1.0, 0.0, 0.0, 1.0)


def _coerce_batch(batch: torch.Tensor | list[torch.Tensor], side: int) -> torch.Tensor:
    if isinstance(batch, (list, tuple)):
        for i, img in enumerate(batch):
            if img.ndim != 3 or img.shape[0] != 3:
                raise ShapeMismatch(f"batch item {i} has shape {tuple(img.shape)}, want (3, H, W)")
        batch = torch.stack(list(batch))
    if batch.ndim != 4 or batch.shape[1] != 3:
        raise ShapeMismatch(f"batch has shape {tuple(batch.shape)}, want (B, 3, H, W)")
    if batch.shape[2] != side or batch.shape[3] != side:
        raise ShapeMismatch(
            f"batch images are {batch.shape[2]}x{batch.shape[3]}, expected presized {side}x{side}"
        )
    return batch


def _pil_to_tensor(img: Image.Image) -> torch.Tensor:
    arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    if arr.size == 0:
        raise EmptyImage("decoded image has no pixels")
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def load_image(path: str | Path) -> torch.Tensor:
    """Read an image file into a (3, H, W) float tensor with values in [0, 1]."""
    with Image.open(path) as img:
        return _pil_to_tensor(img)


def decode_image(data: bytes) -> torch.Tensor:
    """Decode raw JPEG/PNG bytes; raises EmptyImage if undecodable."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            return _pil_to_tensor(img)
    except (UnidentifiedImageError, OSError) as e:
        raise EmptyImage(f"cannot decode image bytes: {e}") from e


def presize(image: torch.Tensor, target: int) -> torch.Tensor:
    """Bilinear resize of one (3,H,W) image or a (B,3,H,W) batch to target x target."""
    single = image.ndim == 3
    if single:
        image = image.unsqueeze(0)
    if image.ndim != 4:
        raise ShapeMismatch(f"expected (3,H,W) or (B,3,H,W), got {tuple(image.shape)}")
    if image.numel() == 0 or image.shape[-1] == 0 or image.shape[-2] == 0:
        raise EmptyImage("cannot presize an empty image")
    out = F.interpolate(image, size=(target, target), mode="bilinear", align_corners=False)
    return out.squeeze(0) if single else out


def normalize(image: torch.Tensor, mean, std) -> torch.Tensor:
    """Per-channel (x - mean) / std; accepts (3,H,W) or (B,3,H,W)."""
    mean_t = torch.as_tensor(mean, dtype=image.dtype).view(3, 1, 1)
    std_t = torch.as_tensor(std, dtype=image.dtype).view(3, 1, 1)
    if bool((std_t == 0).any()):
        raise ZeroStd("normalize_std components must be non-zero")
    return (image - mean_t) / std_t


def denormalize(image: torch.Tensor, mean, std) -> torch.Tensor:
    mean_t = torch.as_tensor(mean, dtype=image.dtype).view(3, 1, 1)
    std_t = torch.as_tensor(std, dtype=image.dtype).view(3, 1, 1)
    return image * std_t + mean_t


def batch_augment(
    batch: torch.Tensor | list[torch.Tensor],
    policy: AugmentationPolicy,
    rng: int | np.random.Generator,
) -> torch.Tensor:
    """Augment a presized batch down to normalized final_size tensors."""
    policy.validate()
    images = _coerce_batch(batch, policy.presize_to)
    gens = _spawn_generators(rng, images.shape[0])
    samples = [_sample_geometry(policy, g) for g in gens]
    out = _resample(images, samples, policy.final_size)
    factors = torch.tensor([s.brightness for s in samples], dtype=out.dtype).view(-1, 1, 1, 1)
    out = torch.clamp(out * factors, 0.0, 1.0)
    return normalize(out, policy.normalize_mean, policy.normalize_std)


def validation_batch(batch: torch.Tensor | list[torch.Tensor], policy: AugmentationPolicy) -> torch.Tensor:
    """Deterministic evaluation view: full-frame resize to final_size + normalize."""
    images = _coerce_batch(batch, policy.presize_to)
    out = _resample(images, [_IDENTITY] * images.shape[0], policy.final_size)
    return normalize(out, policy.normalize_mean, policy.normalize_std)


def validation_view(image: torch.Tensor, policy: AugmentationPolicy) -> torch.Tensor:
    return validation_batch(image.unsqueeze(0), policy).squeeze(0)


@dataclass
class MixedBatch:
    images: torch.Tensor
    label_a: torch.Tensor
    label_b: torch.Tensor
    lam: torch.Tensor


def mix_images(images_a: torch.Tensor, images_b: torch.Tensor, lam: torch.Tensor) -> torch.Tensor:
    lam = lam.to(images_a.dtype).view(-1, *([1] * (images_a.ndim - 1)))
    return lam * images_a + (1.0 - lam) * images_b


def mixup(
    images: torch.Tensor,
    labels: torch.Tensor,
    alpha: float,
    rng: int | np.random.Generator,
) -> MixedBatch:
    """Convexly combine each item with a seeded-permutation partner.

    Per-item lambda ~ Beta(alpha, alpha); alpha == 0 degenerates to lambda = 1,
    returning the batch unchanged with weightless partner labels.
    """
    if images.ndim != 4:
        raise ShapeMismatch(f"mixup expects (B, C, H, W) images, got {tuple(images.shape)}")
    n = images.shape[0]
    if n < 2:
        raise BatchTooSmall(f"mixup needs a batch of at least 2, got {n}")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    gen = _as_generator(rng)
    perm = torch.as_tensor(gen.permutation(n))
    if alpha == 0:
        lam = torch.ones(n, dtype=images.dtype)
    else:
        lam = torch.as_tensor(gen.beta(alpha, alpha, size=n), dtype=images.dtype)
    mixed = mix_images(images, images[perm], lam)
    return MixedBatch(images=mixed, label_a=labels, label_b=labels[perm], lam=lam)
