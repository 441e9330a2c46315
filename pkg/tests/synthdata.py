"""Synthetic stand-ins for the dermoscopy corpus.

Each label gets a strong colour signature plus a lesion-ish blob and noise,
so images stay distinguishable after rotation/flip/crop. Everything is
seeded; the same arguments always produce byte-identical files.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np
from PIL import Image

from dermoscan.labels import LABEL_ORDER

# base RGB per label, far apart in colour space
CLASS_COLORS = {
    "akiec": (200, 40, 40),
    "bcc": (40, 180, 60),
    "bkl": (50, 70, 200),
    "df": (210, 200, 50),
    "mel": (180, 40, 180),
    "nv": (40, 190, 190),
    "vasc": (230, 140, 40),
}

# Table-1 class sizes for the full-corpus fixture
FULL_COUNTS = {"nv": 6705, "mel": 1113, "bkl": 1099, "bcc": 514, "akiec": 327, "vasc": 142, "df": 115}

METADATA_COLUMNS = ["lesion_id", "image_id", "dx", "dx_type", "age", "sex", "localization"]


def synth_records(counts: dict[str, int]) -> list[dict[str, str]]:
    """Metadata rows covering `counts` images per label, ids ISIC_0000000..."""
    rows = []
    serial = 0
    for label in LABEL_ORDER:
        for _ in range(counts.get(label, 0)):
            rows.append(
                {
                    "lesion_id": f"HAM_{serial // 2:07d}",
                    "image_id": f"ISIC_{serial:07d}",
                    "dx": label,
                    "dx_type": "histo" if serial % 3 == 0 else "follow_up",
                    "age": str(float(30 + serial % 50)),
                    "sex": "male" if serial % 2 == 0 else "female",
                    "localization": "back",
                }
            )
            serial += 1
    return rows


def serialize_rows(records: list[dict[str, str]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=METADATA_COLUMNS)
    writer.writeheader()
    writer.writerows(records)
    return buf.getvalue()


def write_metadata_csv(path: Path, counts: dict[str, int]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_rows(synth_records(counts)))
    return path


def class_image(label: str, rng: np.random.Generator, size: tuple[int, int] = (600, 450)) -> Image.Image:
    """Colour-signed fake lesion photo at HAM10000's native 600x450."""
    w, h = size
    base = np.array(CLASS_COLORS[label], dtype=np.float64)
    arr = np.ones((h, w, 3)) * base
    arr += rng.normal(0.0, 18.0, size=(h, w, 3))
    # dark elliptical blob roughly centred, like a lesion against skin
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = h / 2 + rng.uniform(-40, 40), w / 2 + rng.uniform(-60, 60)
    ry, rx = rng.uniform(60, 110), rng.uniform(80, 150)
    mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 < 1.0
    arr[mask] *= 0.55
    return Image.fromarray(np.clip(arr, 0, 255).astype(np.uint8))


def make_flat_images(
    out_dir: Path, records, seed: int = 0, size: tuple[int, int] = (600, 450)
) -> Path:
    """<image_id>.jpg files in one directory, as an ingest source."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for row in records:
        class_image(row["dx"], rng, size=size).save(out_dir / f"{row['image_id']}.jpg", quality=88)
    return out_dir


def make_class_corpus(
    out_dir: Path,
    counts: dict[str, int],
    seed: int = 0,
    size: tuple[int, int] = (600, 450),
) -> dict[str, str]:
    """Folder-per-label corpus; returns image_id -> label."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    labels: dict[str, str] = {}
    serial = 0
    for label in LABEL_ORDER:
        (out_dir / label).mkdir(parents=True, exist_ok=True)
        for _ in range(counts.get(label, 0)):
            image_id = f"ISIC_{serial:07d}"
            class_image(label, rng, size=size).save(out_dir / label / f"{image_id}.jpg", quality=88)
            labels[image_id] = label
            serial += 1
    return labels


def balanced_counts(total: int) -> dict[str, int]:
    """Spread `total` images over the 7 labels as evenly as possible."""
    base, extra = divmod(total, len(LABEL_ORDER))
    return {label: base + (1 if i < extra else 0) for i, label in enumerate(LABEL_ORDER)}
