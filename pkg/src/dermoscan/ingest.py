"""HAM10000 metadata parsing, folder-per-class materialization and splitting."""
from __future__ import annotations

import csv
import io
import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyDataset, MissingColumn, OutputNotWritable, UnknownLabel
from .labels import LABEL_INDEX, LABEL_ORDER

REQUIRED_COLUMNS = ("image_id", "dx")
CSV_COLUMNS = ("lesion_id", "image_id", "dx", "dx_type", "age", "sex", "localization")


@dataclass(frozen=True)
class LesionRecord:
    lesion_id: str
    image_id: str
    label: str
    dx_type: str = ""
    age: float | None = None
    sex: str | None = None
    localization: str | None = None


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    valid_fraction: float
    train_ids: tuple[str, ...]
    valid_ids: tuple[str, ...]


@dataclass(frozen=True)
class FolderReport:
    copied: int
    missing: tuple[str, ...]


def _parse_age(raw: str | None) -> float | None:
    # malformed or negative ages become absent rather than errors
    if raw is None or raw.strip() == "":
        return None
    try:
        age = float(raw)
    except ValueError:
        return None
    return age if age >= 0 else None


def parse_metadata(csv_text: str) -> list[LesionRecord]:
    """Parse metadata CSV text into one LesionRecord per data row."""
    reader = csv.DictReader(io.StringIO(csv_text))
    header = reader.fieldnames or []
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise MissingColumn(f"metadata CSV is missing required column {col!r}")
    records = []
    for i, row in enumerate(reader, start=2):  # row 1 is the header
        dx = (row.get("dx") or "").strip()
        if dx not in LABEL_INDEX:
            raise UnknownLabel(f"row {i}: dx {dx!r} is not one of {LABEL_ORDER}")
        image_id = (row.get("image_id") or "").strip()
        if not image_id:
            raise UnknownLabel(f"row {i}: empty image_id")
        records.append(
            LesionRecord(
                lesion_id=(row.get("lesion_id") or "").strip(),
                image_id=image_id,
                label=dx,
                dx_type=(row.get("dx_type") or "").strip(),
                age=_parse_age(row.get("age")),
                sex=(row.get("sex") or "").strip() or None,
                localization=(row.get("localization") or "").strip() or None,
            )
        )
    return records


def serialize_metadata(records: list[LesionRecord]) -> str:
    """Inverse of parse_metadata; writes the standard column layout."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.lesion_id,
                r.image_id,
                r.label,
                r.dx_type,
                "" if r.age is None else repr(float(r.age)),
                r.sex or "",
                r.localization or "",
            ]
        )
    return out.getvalue()


def class_counts(records: list[LesionRecord]) -> dict[str, int]:
    """Count records per label; absent labels report 0."""
    counts = {label: 0 for label in LABEL_ORDER}
    for r in records:
        counts[r.label] += 1
    return counts


def build_class_folders(
    records: list[LesionRecord],
    image_dirs: list[str | Path],
    out_dir: str | Path,
) -> FolderReport:
    """Copy <image_id>.jpg files into out_dir/<label>/, reporting missing sources."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for label in LABEL_ORDER:
            (out_dir / label).mkdir(exist_ok=True)
    except OSError as e:
        raise OutputNotWritable(f"cannot create class folders under {out_dir}: {e}") from e

    dirs = [Path(d) for d in image_dirs]
    copied = 0
    missing = []
    for r in records:
        src = next((d / f"{r.image_id}.jpg" for d in dirs if (d / f"{r.image_id}.jpg").is_file()), None)
        if src is None:
            missing.append(r.image_id)
            continue
        try:
            shutil.copyfile(src, out_dir / r.label / f"{r.image_id}.jpg")
        except OSError as e:
            raise OutputNotWritable(f"cannot write into {out_dir / r.label}: {e}") from e
        copied += 1
    return FolderReport(copied=copied, missing=tuple(missing))


def split_dataset(records: list[LesionRecord], valid_fraction: float, seed: int) -> SplitManifest:
    """Seeded uniform train/validation split over image_ids.

    Records are sorted by image_id before shuffling, so the manifest is a pure
    function of (set of records, valid_fraction, seed) and does not depend on
    input order.
    """
    if not records:
        raise EmptyDataset("cannot split an empty record list")
    if not 0.0 < valid_fraction < 1.0:
        raise ValueError(f"valid_fraction must be in (0, 1), got {valid_fraction}")
    ids = sorted(r.image_id for r in records)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate image_ids in records; split would not partition")
    perm = np.random.default_rng(seed).permutation(len(ids))
    n_valid = int(round(valid_fraction * len(ids)))
    valid = tuple(ids[i] for i in perm[:n_valid])
    train = tuple(ids[i] for i in perm[n_valid:])
    return SplitManifest(seed=seed, valid_fraction=valid_fraction, train_ids=train, valid_ids=valid)


def manifest_to_json(manifest: SplitManifest) -> str:
    return json.dumps(
        {
            "seed": manifest.seed,
            "valid_fraction": manifest.valid_fraction,
            "train": list(manifest.train_ids),
            "valid": list(manifest.valid_ids),
        },
        indent=2,
    )


def manifest_from_json(text: str) -> SplitManifest:
    raw = json.loads(text)
    return SplitManifest(
        seed=int(raw["seed"]),
        valid_fraction=float(raw["valid_fraction"]),
        train_ids=tuple(raw["train"]),
        valid_ids=tuple(raw["valid"]),
    )


def save_manifest(manifest: SplitManifest, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(manifest_to_json(manifest))
    return path


def load_manifest(path: str | Path) -> SplitManifest:
    return manifest_from_json(Path(path).read_text())
