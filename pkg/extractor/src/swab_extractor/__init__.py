"""Adapter package: extract encoder outputs into swab bundle directories."""

from .spec import ExtractionError, ExtractionSpec
from .extract import (
    compute_class_accuracies,
    compute_gap_table,
    extract_image_statistics,
    extract_text_assets,
)

__version__ = "0.1.0"
