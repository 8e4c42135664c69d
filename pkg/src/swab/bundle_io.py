"""Bundle and matrix IO.

Asset file format "SWAB-MAT v1": a one-line JSON header
{magic:"SWAB-MAT", version:1, rows, cols, dtype:"f32", role, dataset_id,
model_id?, class_index?} terminated by a newline, followed by rows*cols
little-endian 32-bit floats. A bundle is a directory holding manifest.json
(vocabulary, model list, file registry) plus SWAB-MAT files. Any matrix may
instead be a UTF-8 CSV with a header row.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .core import (
    AssetBundle,
    ClassVocabulary,
    DenseMatrix,
    ModelAssets,
    ModelZoo,
    ValidationError,
)

logger = logging.getLogger("swab.io")

MAGIC = "SWAB-MAT"
VERSION = 1
MANIFEST_NAME = "manifest.json"


def write_matrix(
    path: str | Path,
    m: DenseMatrix | np.ndarray,
    role: str,
    dataset_id: str,
    model_id: str | None = None,
    class_index: int | None = None,
) -> None:
    """Write one matrix as SWAB-MAT v1 (or CSV when path ends in .csv)."""
    path = Path(path)
    data = m.data if isinstance(m, DenseMatrix) else np.asarray(m, dtype=np.float64)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if path.suffix == ".csv":
        _write_csv(path, data)
        return
    header: dict = {
        "magic": MAGIC,
        "version": VERSION,
        "rows": int(data.shape[0]),
        "cols": int(data.shape[1]),
        "dtype": "f32",
        "role": role,
        "dataset_id": dataset_id,
    }
    if model_id is not None:
        header["model_id"] = model_id
    if class_index is not None:
        header["class_index"] = int(class_index)
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def read_matrix(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read a SWAB-MAT v1 (or .csv) matrix; returns (float64 array, header)."""
    path = Path(path)
    if path.suffix == ".csv":
        return _read_csv(path), {"role": "csv", "format": "csv"}
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"{path}: unreadable SWAB-MAT header ({exc})") from exc
        if header.get("magic") != MAGIC:
            raise ValidationError(f"{path}: bad magic {header.get('magic')!r}")
        if header.get("version") != VERSION:
            raise ValidationError(f"{path}: unsupported version {header.get('version')!r}")
        if header.get("dtype") != "f32":
            raise ValidationError(f"{path}: unsupported dtype {header.get('dtype')!r}")
        rows, cols = int(header["rows"]), int(header["cols"])
        payload = fh.read()
    expected = rows * cols * 4
    if len(payload) < expected:
        raise ValidationError(f"{path}: payload shorter than header rows·cols")
    if len(payload) > expected:
        raise ValidationError(f"{path}: payload longer than header rows·cols")
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return values.astype(np.float64), header


def _write_csv(path: Path, data: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"c{j}" for j in range(data.shape[1])])
        for row in np.asarray(data, dtype="<f4"):  # keep the on-disk f32 convention
            writer.writerow([repr(float(v)) for v in row])


def _read_csv(path: Path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise ValidationError(f"{path}: empty CSV")
    body = [[float(v) for v in row] for row in rows[1:]]  # first line is the header
    if not body:
        raise ValidationError(f"{path}: CSV has a header but no data rows")
    widths = {len(r) for r in body}
    if len(widths) != 1:
        raise ValidationError(f"{path}: ragged CSV rows")
    return np.asarray(body, dtype=np.float64)


def save_bundle(bundle: AssetBundle, out_dir: str | Path, fmt: str = "swab-mat") -> Path:
    """Write a bundle directory (manifest.json + one file per matrix role)."""
    if fmt not in ("swab-mat", "csv"):
        raise ValidationError(f"unknown bundle format {fmt!r}")
    ext = ".mat" if fmt == "swab-mat" else ".csv"
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = bundle.dataset_id

    files: dict = {"classname_embeddings": f"classname_embeddings{ext}"}
    write_matrix(out / files["classname_embeddings"], bundle.classname_embeddings,
                 role="classname_embeddings", dataset_id=ds)

    models: dict = {}
    for mid, assets in bundle.models.items():
        mdir = f"models/{mid}"
        entry: dict = {
            "dim": assets.dim,
            "imagenet_accuracy": assets.imagenet_accuracy,
            "files": {},
        }
        p = f"{mdir}/classifiers{ext}"
        write_matrix(out / p, assets.classifier_embeddings,
                     role="classifier_embeddings", dataset_id=ds, model_id=mid)
        entry["files"]["classifier_embeddings"] = p

        caps = []
        for j, block in enumerate(assets.caption_embeddings):
            p = f"{mdir}/captions/class_{j:03d}{ext}"
            write_matrix(out / p, block, role="caption_embeddings",
                         dataset_id=ds, model_id=mid, class_index=j)
            caps.append(p)
        entry["files"]["caption_embeddings"] = caps

        if assets.synonym_embeddings is not None:
            syns = []
            for j, block in enumerate(assets.synonym_embeddings):
                p = f"{mdir}/synonyms/class_{j:03d}{ext}"
                write_matrix(out / p, block, role="synonym_embeddings",
                             dataset_id=ds, model_id=mid, class_index=j)
                syns.append(p)
            entry["files"]["synonym_embeddings"] = syns

        if assets.class_gap_vectors is not None:
            p = f"{mdir}/gap_table{ext}"
            write_matrix(out / p, assets.class_gap_vectors, role="gap_table",
                         dataset_id=ds, model_id=mid)
            entry["files"]["class_gap_vectors"] = p

        if assets.class_accuracies is not None:
            p = f"{mdir}/class_accuracies{ext}"
            write_matrix(out / p, assets.class_accuracies.reshape(-1, 1),
                         role="class_accuracies", dataset_id=ds, model_id=mid)
            entry["files"]["class_accuracies"] = p

        models[mid] = entry

    manifest = {
        "format": "swab-bundle",
        "version": VERSION,
        "matrix_format": fmt,
        "dataset_id": ds,
        "classes": list(bundle.vocabulary.names),
        "models": models,
        "files": files,
    }
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return out


def load_bundle(bundle_dir: str | Path) -> AssetBundle:
    """Load a bundle directory written by save_bundle (or the extractor)."""
    bundle_dir = Path(bundle_dir)
    manifest_path = bundle_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise ValidationError(f"{bundle_dir}: no {MANIFEST_NAME}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "swab-bundle":
        raise ValidationError(f"{manifest_path}: not a swab-bundle manifest")

    ds = manifest["dataset_id"]
    vocab = ClassVocabulary(tuple(manifest["classes"]), dataset_id=ds)

    def _mat(rel: str) -> DenseMatrix:
        values, _ = read_matrix(bundle_dir / rel)
        return DenseMatrix(values)

    classname = _mat(manifest["files"]["classname_embeddings"])

    models: dict[str, ModelAssets] = {}
    for mid, entry in manifest["models"].items():
        f = entry["files"]
        captions = tuple(_mat(p) for p in f["caption_embeddings"])
        synonyms = None
        if f.get("synonym_embeddings"):
            synonyms = tuple(_mat(p) for p in f["synonym_embeddings"])
        gaps = _mat(f["class_gap_vectors"]) if f.get("class_gap_vectors") else None
        accs = None
        if f.get("class_accuracies"):
            accs = _mat(f["class_accuracies"]).data.ravel()
        models[mid] = ModelAssets(
            classifier_embeddings=_mat(f["classifier_embeddings"]),
            caption_embeddings=captions,
            synonym_embeddings=synonyms,
            class_gap_vectors=gaps,
            class_accuracies=accs,
            imagenet_accuracy=entry.get("imagenet_accuracy"),
        )
    return AssetBundle(dataset_id=ds, vocabulary=vocab,
                       classname_embeddings=classname, models=models)


def find_bundle_dirs(root: str | Path) -> list[Path]:
    """A directory with a manifest is one bundle; otherwise scan child dirs."""
    root = Path(root)
    if (root / MANIFEST_NAME).exists():
        return [root]
    found = sorted(p.parent for p in root.glob(f"*/{MANIFEST_NAME}"))
    return found


def load_universe(root: str | Path) -> list[AssetBundle]:
    dirs = find_bundle_dirs(root)
    if not dirs:
        raise ValidationError(f"{root}: no bundle manifests found")
    return [load_bundle(d) for d in dirs]


def zoo_from_bundles(bundles: list[AssetBundle]) -> ModelZoo:
    """Derive the zoo (intersection must be total: same ids in every bundle)."""
    ids = sorted(bundles[0].models.keys())
    for b in bundles[1:]:
        if sorted(b.models.keys()) != ids:
            raise ValidationError(
                f"bundle {b.dataset_id}: model set differs from {bundles[0].dataset_id}"
            )
    dims: dict[str, int] = {}
    for mid in ids:
        dims[mid] = bundles[0].models[mid].dim
        for b in bundles:
            if b.models[mid].dim != dims[mid]:
                raise ValidationError(f"model {mid}: dim differs across bundles")
    return ModelZoo(tuple(ids), dims)
