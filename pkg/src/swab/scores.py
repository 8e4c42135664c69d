"""Text-derived model scores: proxy classification plus granularity metrics.

Generated captions stand in for test images; each model is scored by how its
text encoder separates them, by four cosine-geometry statistics of its class
space, and by its general-ability accuracy. The 7-feature vector feeds the
linear ranker.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import AssetBundle, DenseMatrix, ValidationError, _as2d

logger = logging.getLogger("swab.scores")

FEATURE_NAMES = (
    "text_top1",
    "text_macro_f1",
    "fisher",
    "silhouette",
    "dispersion",
    "synonym_consistency",
    "imagenet_acc",
)


@dataclass(frozen=True)
class ScoreVector:
    """The 7-feature representation of one model on one dataset.

    `missing` names features that could not be computed (no synonym sets, no
    general-ability accuracy); such features are stored as 0 and must be
    missing uniformly across models before they reach the ranker.
    """

    model_id: str
    dataset_id: str
    features: dict[str, float]
    missing: tuple[str, ...] = ()
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if tuple(self.features.keys()) != FEATURE_NAMES:
            raise ValidationError(f"features must be exactly {FEATURE_NAMES}")
        for name in ("text_top1", "text_macro_f1", "imagenet_acc"):
            v = self.features[name]
            if name not in self.missing and not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0, 1]")
        for name in ("fisher", "silhouette", "dispersion", "synonym_consistency"):
            v = self.features[name]
            if name not in self.missing and not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise ValidationError(f"{name}={v} outside [-1, 1]")

    def as_array(self, names: tuple[str, ...] = FEATURE_NAMES) -> np.ndarray:
        return np.array([self.features[n] for n in names])


def _unit_rows(a: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1)
    if np.any(norms == 0):
        raise ValidationError(f"zero-norm {what} row")
    return a / norms[:, None]


def zero_shot_classify(
    items: DenseMatrix | np.ndarray, classifiers: DenseMatrix | np.ndarray
) -> np.ndarray:
    """argmax-cosine label per item; ties break toward the lowest class index."""
    x = _as2d(items)
    t = _as2d(classifiers)
    if x.shape[1] != t.shape[1]:
        raise ValidationError(f"item dim {x.shape[1]} != classifier dim {t.shape[1]}")
    if t.shape[0] < 1:
        raise ValidationError("need at least one classifier")
    sims = _unit_rows(x, "item") @ _unit_rows(t, "classifier").T
    return np.argmax(sims, axis=1)


def classification_scores(
    caption_emb_per_class: list[DenseMatrix | np.ndarray],
    classifiers: DenseMatrix | np.ndarray,
) -> tuple[float, float]:
    """(top-1 accuracy, macro-averaged F1) of captions against their own classes."""
    blocks = [_as2d(b) for b in caption_emb_per_class]
    if any(b.shape[0] == 0 for b in blocks) or not blocks:
        raise ValidationError("every class needs at least one caption")
    k = len(blocks)
    labels = np.concatenate([np.full(b.shape[0], j) for j, b in enumerate(blocks)])
    preds = zero_shot_classify(np.vstack(blocks), classifiers)

    top1 = float(np.mean(preds == labels))
    f1s = []
    for j in range(k):
        tp = np.sum((preds == j) & (labels == j))
        fp = np.sum((preds == j) & (labels != j))
        fn = np.sum((preds != j) & (labels == j))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0  # no predictions -> 0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0)
    return top1, float(np.mean(f1s))


def granularity_scores(
    caption_emb_per_class: list[DenseMatrix | np.ndarray],
    synonym_emb_per_class: list[DenseMatrix | np.ndarray] | None,
    classifiers: DenseMatrix | np.ndarray,
) -> tuple[float, float, float, float | None]:
    """(fisher, silhouette, dispersion, synonym_consistency).

    fisher: mean over classes of the highest cosine to another classifier.
    silhouette: mean over classes of the highest mean caption-to-other-class
    cosine. dispersion: mean cosine of every caption to its own classifier.
    synonym_consistency: same over synonyms, or None when no synonym sets.
    """
    t = _unit_rows(_as2d(classifiers), "classifier")
    k = t.shape[0]
    if k < 2:
        raise ValidationError("fisher/silhouette need at least two classes")
    blocks = [_unit_rows(_as2d(b), "caption") for b in caption_emb_per_class]
    if len(blocks) != k:
        raise ValidationError(f"{len(blocks)} caption blocks for {k} classifiers")

    cross = t @ t.T
    off = cross - 3.0 * np.eye(k)  # push the diagonal below any cosine
    fisher = float(np.mean(off.max(axis=1)))

    sil_terms = []
    own_terms = []
    for j, b in enumerate(blocks):
        sims = b @ t.T  # captions of class j vs all classifiers
        mean_per_class = sims.mean(axis=0)
        other = np.delete(mean_per_class, j)
        sil_terms.append(other.max())
        own_terms.append(sims[:, j])
    silhouette = float(np.mean(sil_terms))
    dispersion = float(np.mean(np.concatenate(own_terms)))

    synonym = None
    if synonym_emb_per_class is not None:
        syn_terms = []
        for j, b in enumerate(synonym_emb_per_class):
            a = _as2d(b)
            if a.shape[0] == 0:
                continue
            syn_terms.append(_unit_rows(a, "synonym") @ t[j])
        if syn_terms:
            synonym = float(np.mean(np.concatenate(syn_terms)))
    return fisher, silhouette, dispersion, synonym


def inject_noise(
    emb: DenseMatrix | np.ndarray, sigma: float, seed: int
) -> DenseMatrix:
    """Add i.i.d. zero-mean Gaussian noise, std sigma, from a seeded generator."""
    if sigma < 0:
        raise ValidationError("sigma must be nonnegative")
    a = _as2d(emb)
    if sigma == 0.0:
        return emb if isinstance(emb, DenseMatrix) else DenseMatrix(a)
    rng = np.random.default_rng(seed)
    return DenseMatrix(a + rng.normal(0.0, sigma, size=a.shape))


def inject_noise_per_class(
    blocks: list[DenseMatrix | np.ndarray], sigma: float, seed: int
) -> list[DenseMatrix]:
    """Noise a per-class caption list with a single seeded draw."""
    if sigma == 0.0:
        return [b if isinstance(b, DenseMatrix) else DenseMatrix(_as2d(b)) for b in blocks]
    arrays = [_as2d(b) for b in blocks]
    noised = inject_noise(np.vstack(arrays), sigma, seed).data
    out = []
    start = 0
    for a in arrays:
        out.append(DenseMatrix(noised[start : start + a.shape[0]]))
        start += a.shape[0]
    return out


@dataclass(frozen=True)
class ScoreConfig:
    noise_sigma: float = 0.1
    seed: int = 1
    gap_corrected: bool = False


def assemble_score_vector(
    bundle: AssetBundle,
    model_id: str,
    modified_texts: list[DenseMatrix | np.ndarray],
    config: ScoreConfig = ScoreConfig(),
) -> ScoreVector:
    """Compute all 7 features on the given (gap-corrected and noised) captions.

    Synonyms and classifiers come raw from the bundle. Missing synonym sets or
    general-ability accuracy yield 0-valued features flagged in `missing`.
    """
    if model_id not in bundle.models:
        raise ValidationError(f"model {model_id!r} not in bundle {bundle.dataset_id!r}")
    assets = bundle.models[model_id]
    if len(modified_texts) != bundle.k:
        raise ValidationError("modified texts are not aligned with the vocabulary")

    classifiers = assets.classifier_embeddings
    top1, macro_f1 = classification_scores(modified_texts, classifiers)
    fisher, silhouette, dispersion, synonym = granularity_scores(
        modified_texts, assets.synonym_embeddings, classifiers
    )

    missing = []
    if synonym is None:
        missing.append("synonym_consistency")
        synonym = 0.0
    inb = assets.imagenet_accuracy
    if inb is None:
        logger.warning("%s/%s: imagenet_acc missing, filled with 0",
                       bundle.dataset_id, model_id)
        missing.append("imagenet_acc")
        inb = 0.0

    features = {
        "text_top1": top1,
        "text_macro_f1": macro_f1,
        "fisher": fisher,
        "silhouette": silhouette,
        "dispersion": dispersion,
        "synonym_consistency": synonym,
        "imagenet_acc": float(inb),
    }
    provenance = {
        "noise_sigma": config.noise_sigma,
        "seed": config.seed,
        "gap_corrected": config.gap_corrected,
    }
    return ScoreVector(
        model_id=model_id,
        dataset_id=bundle.dataset_id,
        features=features,
        missing=tuple(missing),
        provenance=provenance,
    )
