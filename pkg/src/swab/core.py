"""Core domain types and normalization primitives shared by every stage.

All containers are immutable after construction (arrays are frozen via the
writeable flag) and every operation is a pure function, so values can be
shared freely across threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger("swab.core")

EPS_STD = 1e-12  # floor for zero-variance columns


class SwabError(Exception):
    """Base class for engine errors."""


class ValidationError(SwabError):
    """Malformed inputs: shape/alignment/range/finiteness violations."""


class AssetMissingError(SwabError):
    """A required bundle asset (role) is absent."""


class SolverError(SwabError):
    """An optimization routine failed to produce a usable solution."""


def _as2d(m) -> np.ndarray:
    """Coerce a DenseMatrix or array-like to a float64 2-D ndarray."""
    if isinstance(m, DenseMatrix):
        return m.data
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


@dataclass(frozen=True)
class DenseMatrix:
    """Row-major matrix of finite reals.

    Stored as float32 on disk, held as float64 in memory so accumulations
    (means over thousands of rows) keep full precision. `normalized` tracks
    which normalization has been applied: "raw", "l2" or "zscore". `tag`
    carries free-form provenance such as "modified" for gap-corrected text.
    """

    data: np.ndarray
    normalized: str = "raw"
    tag: str = ""

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2:
            raise ValidationError(f"DenseMatrix must be 2-D, got ndim={a.ndim}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("DenseMatrix values must be finite (no NaN/Inf)")
        if self.normalized not in ("raw", "l2", "zscore"):
            raise ValidationError(f"unknown normalized flag {self.normalized!r}")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered class names of one dataset."""

    names: tuple[str, ...]
    dataset_id: str

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) < 1:
            raise ValidationError("vocabulary needs at least one class")
        if len(set(self.names)) != len(self.names):
            raise ValidationError(f"duplicate class names in dataset {self.dataset_id!r}")

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class ModelAssets:
    """Per-model assets of one dataset, all aligned with the vocabulary order.

    caption_embeddings / synonym_embeddings hold one matrix per class
    (rows = texts of that class). class_gap_vectors, class_accuracies and
    imagenet_accuracy are optional class-level statistics.
    """

    classifier_embeddings: DenseMatrix
    caption_embeddings: tuple[DenseMatrix, ...]
    synonym_embeddings: tuple[DenseMatrix, ...] | None = None
    class_gap_vectors: DenseMatrix | None = None
    class_accuracies: np.ndarray | None = None
    imagenet_accuracy: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "caption_embeddings", tuple(self.caption_embeddings))
        if self.synonym_embeddings is not None:
            object.__setattr__(self, "synonym_embeddings", tuple(self.synonym_embeddings))
        if self.class_accuracies is not None:
            acc = np.asarray(self.class_accuracies, dtype=np.float64)
            acc.setflags(write=False)
            object.__setattr__(self, "class_accuracies", acc)

    @property
    def dim(self) -> int:
        return self.classifier_embeddings.cols


@dataclass(frozen=True)
class AssetBundle:
    """Everything known about one dataset: vocabulary, name embeddings from the
    auxiliary sentence encoder, and per-model assets."""

    dataset_id: str
    vocabulary: ClassVocabulary
    classname_embeddings: DenseMatrix
    models: dict[str, ModelAssets] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.vocabulary)


@dataclass(frozen=True)
class ModelZoo:
    """The candidate models and their feature dimensions."""

    model_ids: tuple[str, ...]
    dims: dict[str, int]

    def __post_init__(self):
        object.__setattr__(self, "model_ids", tuple(self.model_ids))
        if len(set(self.model_ids)) != len(self.model_ids):
            raise ValidationError("duplicate model ids in zoo")
        if len(self.model_ids) < 2:
            raise ValidationError("a zoo needs at least two models")

    @property
    def size(self) -> int:
        return len(self.model_ids)


@dataclass
class ValidationReport:
    """Accumulated violations; empty iff the bundle is usable."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str) -> None:
        self.violations.append(msg)

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(self.violations)


def l2_normalize(m: DenseMatrix | np.ndarray) -> DenseMatrix:
    """Scale each row to unit Euclidean norm.

    All-zero rows are returned unchanged and reported via a warning log;
    idempotent within float precision.
    """
    a = _as2d(m)
    norms = np.linalg.norm(a, axis=1)
    zero = norms == 0.0
    if np.any(zero):
        logger.warning("l2_normalize: %d all-zero row(s) left unchanged", int(zero.sum()))
    safe = np.where(zero, 1.0, norms)
    return DenseMatrix(a / safe[:, None], normalized="l2")


def zscore_normalize(
    m: DenseMatrix | np.ndarray, eps: float = EPS_STD
) -> tuple[DenseMatrix, np.ndarray, np.ndarray]:
    """Center and scale each column to mean 0 / std 1 (population convention).

    Constant columns are divided by the eps-floored std, which maps them to
    zero. Returns (matrix, mean, floored std) so the same transform can be
    replayed on held-out rows.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    a = _as2d(m)
    if a.shape[0] < 1:
        raise ValidationError("cannot z-score an empty matrix")
    mean = a.mean(axis=0)
    std = a.std(axis=0)  # ddof=0: statistics are over full finite sets
    std = np.maximum(std, eps)
    return DenseMatrix((a - mean) / std, normalized="zscore"), mean, std


def validate_bundle(bundle: AssetBundle, zoo: ModelZoo) -> ValidationReport:
    """Check alignment, dimensions and value ranges of a bundle against a zoo.

    Never raises: every violation becomes one report line.
    """
    rep = ValidationReport()
    k = bundle.k
    ds = bundle.dataset_id

    if bundle.vocabulary.dataset_id != ds:
        rep.add(f"{ds}: vocabulary belongs to {bundle.vocabulary.dataset_id!r}")
    if bundle.classname_embeddings.rows != k:
        rep.add(
            f"{ds}: classname_embeddings has {bundle.classname_embeddings.rows} rows, expected {k}"
        )

    for mid in zoo.model_ids:
        if mid not in bundle.models:
            rep.add(f"{ds}: model {mid!r} missing from bundle")
    for mid, assets in bundle.models.items():
        prefix = f"{ds}/{mid}"
        d = assets.dim
        if mid in zoo.dims and zoo.dims[mid] != d:
            rep.add(f"{prefix}: dim {d} != zoo dim {zoo.dims[mid]}")
        if assets.classifier_embeddings.rows != k:
            rep.add(
                f"{prefix}: classifier_embeddings has {assets.classifier_embeddings.rows} rows, expected {k}"
            )
        if len(assets.caption_embeddings) != k:
            rep.add(
                f"{prefix}: {len(assets.caption_embeddings)} caption blocks, expected {k}"
            )
        for j, block in enumerate(assets.caption_embeddings):
            if block.cols != d:
                rep.add(f"{prefix}: caption block {j} has dim {block.cols}, expected {d}")
        if assets.synonym_embeddings is not None:
            if len(assets.synonym_embeddings) != k:
                rep.add(
                    f"{prefix}: {len(assets.synonym_embeddings)} synonym blocks, expected {k}"
                )
            for j, block in enumerate(assets.synonym_embeddings):
                if block.cols != d:
                    rep.add(f"{prefix}: synonym block {j} has dim {block.cols}, expected {d}")
        if assets.class_gap_vectors is not None:
            g = assets.class_gap_vectors
            if g.rows != k or g.cols != d:
                rep.add(
                    f"{prefix}: class_gap_vectors is {g.rows}x{g.cols}, expected {k}x{d}"
                )
        if assets.class_accuracies is not None:
            acc = assets.class_accuracies
            if acc.shape != (k,):
                rep.add(f"{prefix}: class_accuracies has shape {acc.shape}, expected ({k},)")
            elif not np.all(np.isfinite(acc)):
                rep.add(f"{prefix}: class_accuracies contains non-finite values")
            elif np.any(acc < 0.0) or np.any(acc > 1.0):
                rep.add(f"{prefix}: class_accuracies outside [0, 1]")
        if assets.imagenet_accuracy is not None and not (
            0.0 <= assets.imagenet_accuracy <= 1.0
        ):
            rep.add(f"{prefix}: imagenet_accuracy {assets.imagenet_accuracy} outside [0, 1]")
    return rep
