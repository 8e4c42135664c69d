"""Modality-gap tables: computation, transport-weighted transfer, application.

A gap row is the mean difference between normalized image embeddings of a
class and its normalized text prototype; both modalities are z-scored with
their own dataset statistics before the normalization. Target-side rows are
estimated as transport-weighted sums of source rows (scaled by the target
class count so each column's weights sum to one) and added to the raw target
text embeddings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import DenseMatrix, ValidationError, _as2d, l2_normalize, zscore_normalize
from .transport import TransportPlan

logger = logging.getLogger("swab.gap")

MISSING_WEIGHT_TOL = 1e-12

CLASS_MEAN = "class_mean"
DATASET_MEAN = "dataset_mean"


@dataclass(frozen=True)
class GapTable:
    """Per-class gap vectors of one model (k x d). Rows flagged in `missing`
    had no image evidence and may not be used as transfer sources."""

    model_id: str
    matrix: np.ndarray
    level: str = CLASS_MEAN
    missing: np.ndarray | None = None

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.float64))
        if a.ndim != 2:
            raise ValidationError("gap matrix must be 2-D")
        if not np.all(np.isfinite(a)):
            raise ValidationError("gap matrix must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        if self.level not in (CLASS_MEAN, DATASET_MEAN):
            raise ValidationError(f"unknown gap level {self.level!r}")
        miss = self.missing
        miss = np.zeros(a.shape[0], dtype=bool) if miss is None else np.asarray(miss, dtype=bool)
        if miss.shape != (a.shape[0],):
            raise ValidationError("missing mask length must equal the class count")
        miss = np.ascontiguousarray(miss)
        miss.setflags(write=False)
        object.__setattr__(self, "missing", miss)

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def compute_class_gap_vectors(
    image_emb_per_class: list[DenseMatrix | np.ndarray],
    text_prototypes: DenseMatrix | np.ndarray,
    model_id: str = "",
    level: str = CLASS_MEAN,
    zscore_inputs: bool = True,
) -> GapTable:
    """Row k = mean over class-k images of (image/|image| - prototype_k/|prototype_k|).

    With zscore_inputs (the default) images are first z-scored with pooled
    dataset statistics and prototypes with their own; pass False for the bare
    unit-vector formula (z-scoring a single point is degenerate). Classes
    without images get a zero row flagged missing. level=dataset_mean replaces
    every row by the image-count-weighted dataset mean.
    """
    protos = _as2d(text_prototypes)
    k = protos.shape[0]
    if len(image_emb_per_class) != k:
        raise ValidationError(
            f"{len(image_emb_per_class)} image blocks for {k} prototypes"
        )
    blocks = [_as2d(b) if (b is not None and np.size(b) > 0) else None
              for b in image_emb_per_class]
    counts = np.array([0 if b is None else b.shape[0] for b in blocks])
    missing = counts == 0
    if missing.all():
        raise ValidationError("every class is missing image embeddings")
    for b in blocks:
        if b is not None and b.shape[1] != protos.shape[1]:
            raise ValidationError("image/prototype dims differ")

    if zscore_inputs:
        pooled = np.vstack([b for b in blocks if b is not None])
        _, img_mean, img_std = zscore_normalize(pooled)
        _, txt_mean, txt_std = zscore_normalize(protos)
    else:
        dim = protos.shape[1]
        img_mean = txt_mean = np.zeros(dim)
        img_std = txt_std = np.ones(dim)
    protos_n = l2_normalize((protos - txt_mean) / txt_std).data

    gap = np.zeros((k, protos.shape[1]))
    for j, b in enumerate(blocks):
        if b is None:
            logger.warning("gap: class %d has no images; row flagged missing", j)
            continue
        imgs_n = l2_normalize((b - img_mean) / img_std).data
        gap[j] = imgs_n.mean(axis=0) - protos_n[j]

    if level == DATASET_MEAN:
        total = counts.sum()
        mean_gap = (gap * counts[:, None]).sum(axis=0) / total
        gap = np.tile(mean_gap, (k, 1))
        missing = np.zeros(k, dtype=bool)
    return GapTable(model_id=model_id, matrix=gap, level=level, missing=missing)


def to_dataset_mean(table: GapTable) -> GapTable:
    """Collapse a class-level table to one shared dataset-mean row.

    Bundled tables carry no image counts, so rows are weighted equally
    (missing rows excluded).
    """
    rows = table.matrix[~table.missing]
    if rows.shape[0] == 0:
        raise ValidationError("cannot average an all-missing gap table")
    mean_gap = rows.mean(axis=0)
    return GapTable(
        model_id=table.model_id,
        matrix=np.tile(mean_gap, (table.k, 1)),
        level=DATASET_MEAN,
    )


def transfer_gap_vectors(plan: TransportPlan, source: GapTable, k_t: int) -> GapTable:
    """Target row j = k_T * sum_i plan_ij * source_i.

    With a uniform column marginal the per-column weights then sum to one.
    Any measurable weight on a missing source row is an error.
    """
    if plan.gamma.shape[1] != k_t:
        raise ValidationError(f"plan has {plan.gamma.shape[1]} columns, expected {k_t}")
    if plan.gamma.shape[0] != source.k:
        raise ValidationError(
            f"plan has {plan.gamma.shape[0]} rows but source table has {source.k}"
        )
    if source.missing.any():
        bad_weight = plan.gamma[source.missing].sum(axis=1)
        if np.any(bad_weight > MISSING_WEIGHT_TOL):
            rows = np.flatnonzero(source.missing)[bad_weight > MISSING_WEIGHT_TOL]
            raise ValidationError(
                f"transport references missing source gap rows {rows.tolist()}"
            )
    target = k_t * (plan.gamma.T @ source.matrix)
    return GapTable(model_id=source.model_id, matrix=target, level=source.level)


def apply_gap_to_texts(
    text_emb_per_class: list[DenseMatrix | np.ndarray], target_gaps: GapTable
) -> list[DenseMatrix]:
    """Add the class gap vector to every text embedding of that class.

    The addition is performed directly on the raw embeddings (the gap rows
    already live in the normalized space they were computed in); a zero table
    therefore returns the input unchanged. Outputs are tagged "modified".
    """
    if len(text_emb_per_class) != target_gaps.k:
        raise ValidationError(
            f"{len(text_emb_per_class)} text blocks for {target_gaps.k} gap rows"
        )
    out = []
    for j, block in enumerate(text_emb_per_class):
        a = _as2d(block)
        if a.shape[1] != target_gaps.dim:
            raise ValidationError(
                f"class {j}: text dim {a.shape[1]} != gap dim {target_gaps.dim}"
            )
        out.append(DenseMatrix(a + target_gaps.matrix[j], tag="modified"))
    return out
