"""Standalone writer for the swab bundle contract.

Re-implements the interchange format from its documented layout rather than
importing the engine: a manifest.json plus SWAB-MAT v1 matrix files (one-line
JSON header, then rows*cols little-endian float32). Interoperability is
proven by `swab validate` on the output.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .spec import ExtractionError

MAGIC = "SWAB-MAT"
VERSION = 1
MANIFEST = "manifest.json"


def write_mat(
    path: Path,
    values: np.ndarray,
    role: str,
    dataset_id: str,
    model_id: str | None = None,
    class_index: int | None = None,
) -> None:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    header: dict = {
        "magic": MAGIC,
        "version": VERSION,
        "rows": int(values.shape[0]),
        "cols": int(values.shape[1]),
        "dtype": "f32",
        "role": role,
        "dataset_id": dataset_id,
    }
    if model_id is not None:
        header["model_id"] = model_id
    if class_index is not None:
        header["class_index"] = int(class_index)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_mat(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    rows, cols = int(header["rows"]), int(header["cols"])
    if len(payload) != rows * cols * 4:
        raise ExtractionError(f"{path}: payload size does not match header")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)


def load_manifest(bundle_dir: Path) -> dict | None:
    path = bundle_dir / MANIFEST
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def save_manifest(bundle_dir: Path, manifest: dict) -> None:
    bundle_dir.mkdir(parents=True, exist_ok=True)
    with open(bundle_dir / MANIFEST, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def empty_manifest(dataset_id: str, classes: list[str]) -> dict:
    return {
        "format": "swab-bundle",
        "version": VERSION,
        "matrix_format": "swab-mat",
        "dataset_id": dataset_id,
        "classes": list(classes),
        "models": {},
        "files": {},
    }


def check_alignment(manifest: dict, dataset_id: str, classes: list[str]) -> None:
    """Refuse to mix assets produced under different class orders or datasets."""
    if manifest["dataset_id"] != dataset_id:
        raise ExtractionError(
            f"bundle belongs to dataset {manifest['dataset_id']!r}, spec says {dataset_id!r}"
        )
    if manifest["classes"] != list(classes):
        raise ExtractionError(
            "class list/order differs from the one this bundle was written with; "
            "alignment would be silently broken"
        )
