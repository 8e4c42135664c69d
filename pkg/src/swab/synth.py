"""Deterministic synthetic universes for desk-scale verification.

Class-name embeddings live in a handful of well-separated semantic clusters;
each dataset leans on one dominant cluster. Every model gets a per-cluster
skill and a per-cluster embedding-offset magnitude; class accuracies follow a
logistic law in skill minus an offset penalty, so model rankings are exactly
consistent inside a cluster and differ across clusters. Captions tighten with
skill, which ties the text-derived scores to the accuracies the ranker must
learn. All randomness flows from the one generator seed.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.stats import rankdata

from .core import (
    AssetBundle,
    ClassVocabulary,
    DenseMatrix,
    ModelAssets,
    ModelZoo,
    ValidationError,
)

DOMINANT_SHARE = 0.6  # fraction of each dataset's classes in its home cluster

# accuracy / geometry law constants, balanced so the transfer branch and the
# learning branch land at comparable strength with independent errors
SKILL_SPREAD = 0.8  # per-cluster deviation around a model's base ability
RHO_MEAN, RHO_SD = 0.55, 0.25  # offset magnitude distribution (x gap_scale)
ACC_SKILL_COEF = 1.3
ACC_GAP_PENALTY = 2.5
CAPTION_SIGMA_FLOOR = 0.3
CAPTION_SKILL_LINK = 0.8  # steepness of the skill -> caption-tightness map


@dataclass(frozen=True)
class SynthConfig:
    n_datasets: int = 6
    classes_per_dataset: int = 8
    n_models: int = 10
    dim: int = 16
    semantic_clusters: int = 3
    gap_scale: float = 1.0
    noise: float = 0.35  # base within-class caption spread
    captions_per_class: int = 12
    synonyms_per_class: int = 4

    def __post_init__(self):
        if self.n_models < 5:
            raise ValidationError("need n_models >= 5 for top-5 metrics")
        if self.n_datasets < 2:
            raise ValidationError("need at least two datasets for leave-one-out")
        if self.classes_per_dataset < 2:
            raise ValidationError("need at least two classes per dataset")
        if not 1 <= self.semantic_clusters <= self.dim:
            raise ValidationError("semantic_clusters must be in [1, dim]")
        if self.gap_scale < 0 or self.noise < 0:
            raise ValidationError("gap_scale and noise must be nonnegative")
        if self.captions_per_class < 1:
            raise ValidationError("need at least one caption per class")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SyntheticUniverse:
    bundles: list[AssetBundle]
    zoo: ModelZoo
    true_mean_acc: dict[str, np.ndarray]  # dataset -> per-model mean accuracy
    truth_ranking: dict[str, np.ndarray]  # dataset -> rank values (1 = best)
    clusters: dict[str, np.ndarray]  # dataset -> per-class cluster id
    config: SynthConfig
    seed: int


def _logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _orthonormal_directions(rng: np.random.Generator, dim: int, k: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, max(k, 1))))
    q = q * np.sign(np.diag(r))[None, :]
    return q[:, :k].T


def _random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))[None, :]


def generate_synthetic_universe(config: SynthConfig, seed: int) -> SyntheticUniverse:
    """Build valid bundles plus ground truth for the given generator seed."""
    rng = np.random.default_rng(seed)
    K, dim, M = config.semantic_clusters, config.dim, config.n_models
    k = config.classes_per_dataset

    cluster_dirs = _orthonormal_directions(rng, dim, K)

    model_ids = tuple(f"m{idx:02d}" for idx in range(M))
    base = rng.uniform(-1.0, 1.0, M)
    skill = base[:, None] + rng.normal(0.0, SKILL_SPREAD, (M, K))
    rho = config.gap_scale * np.abs(rng.normal(RHO_MEAN, RHO_SD, (M, K)))
    gap_dirs = np.stack([
        [_unit(rng.standard_normal(dim)) for _ in range(K)] for _ in range(M)
    ])
    rotations = [_random_rotation(rng, dim) for _ in range(M)]
    inb = 0.05 + 0.9 * _logistic(1.2 * skill.mean(axis=1))

    bundles: list[AssetBundle] = []
    true_mean_acc: dict[str, np.ndarray] = {}
    truth_ranking: dict[str, np.ndarray] = {}
    clusters: dict[str, np.ndarray] = {}

    for dsi in range(config.n_datasets):
        ds = f"synth{dsi:02d}"
        dominant = dsi % K
        n_dom = max(1, int(round(DOMINANT_SHARE * k)))
        cluster_of = np.full(k, dominant)
        if K > 1:
            others = [c for c in range(K) if c != dominant]
            cluster_of[n_dom:] = rng.choice(others, size=k - n_dom)
        clusters[ds] = cluster_of

        difficulty = rng.normal(0.0, 0.4, k)
        names = tuple(f"{ds}_cls{c:02d}" for c in range(k))
        psi = np.vstack([
            _unit(cluster_dirs[cluster_of[c]] + 0.08 * rng.standard_normal(dim))
            for c in range(k)
        ])

        acc = np.empty((M, k))
        for mi in range(M):
            s = skill[mi, cluster_of]
            penalty = ACC_GAP_PENALTY * rho[mi, cluster_of] ** 2
            acc[mi] = np.clip(_logistic(ACC_SKILL_COEF * s - penalty - difficulty), 0.02, 0.98)

        models: dict[str, ModelAssets] = {}
        for mi, mid in enumerate(model_ids):
            classifiers = np.vstack([
                _unit(psi[c] @ rotations[mi] + 0.02 * rng.standard_normal(dim))
                for c in range(k)
            ])
            sigma_cap = CAPTION_SIGMA_FLOOR + config.noise * (1.0 - _logistic(CAPTION_SKILL_LINK * skill[mi, cluster_of]))
            sigma_syn = 0.25 + 0.7 * config.noise * (1.0 - _logistic(CAPTION_SKILL_LINK * skill[mi, cluster_of]))
            captions = tuple(
                DenseMatrix(classifiers[c]
                            + sigma_cap[c] * rng.standard_normal(
                                (config.captions_per_class, dim)))
                for c in range(k)
            )
            synonyms = tuple(
                DenseMatrix(classifiers[c]
                            + sigma_syn[c] * rng.standard_normal(
                                (config.synonyms_per_class, dim)))
                for c in range(k)
            )
            gaps = np.vstack([
                rho[mi, cluster_of[c]] * gap_dirs[mi, cluster_of[c]]
                + config.gap_scale * 0.03 * rng.standard_normal(dim)
                for c in range(k)
            ])
            models[mid] = ModelAssets(
                classifier_embeddings=DenseMatrix(classifiers),
                caption_embeddings=captions,
                synonym_embeddings=synonyms,
                class_gap_vectors=DenseMatrix(gaps),
                class_accuracies=acc[mi],
                imagenet_accuracy=float(inb[mi]),
            )

        bundles.append(AssetBundle(
            dataset_id=ds,
            vocabulary=ClassVocabulary(names, dataset_id=ds),
            classname_embeddings=DenseMatrix(psi),
            models=models,
        ))
        mean_acc = acc.mean(axis=1)
        true_mean_acc[ds] = mean_acc
        truth_ranking[ds] = rankdata(-mean_acc, method="average")

    zoo = ModelZoo(model_ids, {mid: dim for mid in model_ids})
    return SyntheticUniverse(
        bundles=bundles,
        zoo=zoo,
        true_mean_acc=true_mean_acc,
        truth_ranking=truth_ranking,
        clusters=clusters,
        config=config,
        seed=seed,
    )
