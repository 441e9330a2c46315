"""Dermoscopic skin-lesion classification: ingest, augment, train, evaluate, serve."""

from .labels import LABEL_ORDER, MALIGNANT_LABELS, is_malignant, malignancy_class
from .errors import DermoscanError

__version__ = "0.1.0"

__all__ = [
    "LABEL_ORDER",
    "MALIGNANT_LABELS",
    "DermoscanError",
    "is_malignant",
    "malignancy_class",
    "__version__",
]
