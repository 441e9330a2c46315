"""The seven-class lesion taxonomy and its benign/malignant regrouping.

Every probability vector in this codebase is indexed by ``LABEL_ORDER``,
the alphabetical tuple of the seven diagnosis codes. The order is recorded
explicitly in every serialized artifact so nothing depends on it implicitly.
"""
from __future__ import annotations

import json
from pathlib import Path

LABEL_ORDER: tuple[str, ...] = ("akiec", "bcc", "bkl", "df", "mel", "nv", "vasc")

LABEL_INDEX: dict[str, int] = {c: i for i, c in enumerate(LABEL_ORDER)}

LABEL_DESCRIPTIONS: dict[str, str] = {
    "nv": "melanocytic nevi",
    "mel": "melanoma",
    "bkl": "benign keratosis-like lesions",
    "bcc": "basal cell carcinoma",
    "akiec": "actinic keratoses and intraepithelial carcinoma",
    "vasc": "vascular lesions",
    "df": "dermatofibroma",
}

# The cancerous diagnoses. Everything else is grouped as benign.
MALIGNANT_LABELS: frozenset[str] = frozenset({"mel", "bcc", "akiec"})
BENIGN_LABELS: frozenset[str] = frozenset(LABEL_ORDER) - MALIGNANT_LABELS

MALIGNANT = "malignant"
BENIGN = "benign"


def is_malignant(code: str, malignant: frozenset[str] = MALIGNANT_LABELS) -> bool:
    if code not in LABEL_INDEX:
        raise KeyError(f"unknown lesion label {code!r}")
    return code in malignant


def malignancy_class(code: str, malignant: frozenset[str] = MALIGNANT_LABELS) -> str:
    return MALIGNANT if is_malignant(code, malignant) else BENIGN


def load_taxonomy(path: str | Path) -> frozenset[str]:
    """Read an alternative malignant/benign grouping from a JSON file.

    Expected shape: {"malignant": [codes...], "benign": [codes...]}. The two
    lists must partition the seven labels exactly.
    """
    raw = json.loads(Path(path).read_text())
    malignant = frozenset(raw["malignant"])
    benign = frozenset(raw.get("benign", set(LABEL_ORDER) - malignant))
    unknown = (malignant | benign) - set(LABEL_ORDER)
    if unknown:
        raise ValueError(f"taxonomy file names unknown labels: {sorted(unknown)}")
    if malignant & benign or (malignant | benign) != set(LABEL_ORDER):
        raise ValueError("taxonomy must split the seven labels into two disjoint groups")
    return malignant
