"""Extraction passes: text assets and image-derived class statistics.

The image pass also exports the raw per-class image embeddings next to the
derived statistics so the consuming engine can recompute and cross-check them
(trust-but-verify boundary).
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import bundle_writer as bw
from .encoders import make_image_encoder, make_text_encoder
from .spec import ExtractionError, ExtractionSpec

logger = logging.getLogger("swab_extractor")

EPS_STD = 1e-12


def extract_text_assets(spec: ExtractionSpec) -> Path:
    """Emit classname, classifier, caption and synonym embeddings."""
    classes = spec.load_classes()
    captions = spec.load_texts(spec.captions, classes)
    synonyms = spec.load_texts(spec.synonyms, classes) if spec.synonyms else None

    out = spec.output_dir
    manifest = bw.load_manifest(out)
    if manifest is None:
        manifest = bw.empty_manifest(spec.dataset, classes)
    else:
        bw.check_alignment(manifest, spec.dataset, classes)

    phi = make_text_encoder(spec.phi_encoder, spec.batch_size)
    classname_emb = phi.encode(classes)
    rel = "classname_embeddings.mat"
    bw.write_mat(out / rel, classname_emb, "classname_embeddings", spec.dataset)
    manifest["files"]["classname_embeddings"] = rel

    for model_id, enc_id in sorted(spec.vlm_encoders.items()):
        encoder = make_text_encoder(enc_id, spec.batch_size)
        entry = manifest["models"].setdefault(
            model_id, {"dim": encoder.dim, "imagenet_accuracy": None, "files": {}}
        )
        if entry["dim"] != encoder.dim:
            raise ExtractionError(
                f"{model_id}: encoder dim drifted "
                f"({entry['dim']} already on disk, {encoder.dim} now)"
            )
        mdir = f"models/{model_id}"

        prompts = [spec.template.replace("{class}", c) for c in classes]
        classifiers = encoder.encode(prompts)
        rel = f"{mdir}/classifiers.mat"
        bw.write_mat(out / rel, classifiers, "classifier_embeddings",
                     spec.dataset, model_id)
        entry["files"]["classifier_embeddings"] = rel

        cap_paths = []
        for j, cls in enumerate(classes):
            block = encoder.encode(captions[cls])
            rel = f"{mdir}/captions/class_{j:03d}.mat"
            bw.write_mat(out / rel, block, "caption_embeddings",
                         spec.dataset, model_id, class_index=j)
            cap_paths.append(rel)
        entry["files"]["caption_embeddings"] = cap_paths

        if synonyms is not None:
            syn_paths = []
            for j, cls in enumerate(classes):
                block = encoder.encode(synonyms[cls])
                rel = f"{mdir}/synonyms/class_{j:03d}.mat"
                bw.write_mat(out / rel, block, "synonym_embeddings",
                             spec.dataset, model_id, class_index=j)
                syn_paths.append(rel)
            entry["files"]["synonym_embeddings"] = syn_paths

    bw.save_manifest(out, manifest)
    logger.info("text assets written to %s", out)
    return out


def _zscore_stats(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = rows.mean(axis=0)
    std = np.maximum(rows.std(axis=0), EPS_STD)  # population convention
    return mean, std


def _l2_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    return rows / safe[:, None]


def compute_gap_table(
    images_per_class: list[np.ndarray], prototypes: np.ndarray
) -> np.ndarray:
    """Class-mean difference of normalized image rows and normalized prototypes,
    both z-scored with their own modality's dataset statistics first."""
    pooled = np.vstack(images_per_class)
    img_mean, img_std = _zscore_stats(pooled)
    txt_mean, txt_std = _zscore_stats(prototypes)
    protos_n = _l2_rows((prototypes - txt_mean) / txt_std)
    rows = []
    for j, block in enumerate(images_per_class):
        imgs_n = _l2_rows((block - img_mean) / img_std)
        rows.append(imgs_n.mean(axis=0) - protos_n[j])
    return np.vstack(rows)


def compute_class_accuracies(
    images_per_class: list[np.ndarray], classifiers: np.ndarray
) -> np.ndarray:
    """Per-class zero-shot accuracy: argmax cosine against the class set."""
    t = _l2_rows(classifiers)
    acc = np.empty(len(images_per_class))
    for j, block in enumerate(images_per_class):
        preds = np.argmax(_l2_rows(block) @ t.T, axis=1)
        acc[j] = float(np.mean(preds == j))
    return acc


def extract_image_statistics(spec: ExtractionSpec) -> Path:
    """Emit per-class accuracies and gap tables, plus the raw image embeddings
    they were derived from. Requires the text pass to have run (classifiers)."""
    classes = spec.load_classes()
    out = spec.output_dir
    manifest = bw.load_manifest(out)
    if manifest is None:
        raise ExtractionError(f"{out}: run the text pass first (no manifest)")
    bw.check_alignment(manifest, spec.dataset, classes)

    general_scores: dict[str, float] = {}
    for model_id, enc_id in sorted(spec.vlm_encoders.items()):
        entry = manifest["models"].get(model_id)
        if entry is None or "classifier_embeddings" not in entry["files"]:
            raise ExtractionError(f"{model_id}: no classifiers on disk; run the text pass")
        classifiers = bw.read_mat(out / entry["files"]["classifier_embeddings"])
        encoder = make_image_encoder(enc_id, spec.passthrough_images)
        if classifiers.shape[1] != encoder.dim:
            raise ExtractionError(
                f"{model_id}: encoder dim drifted "
                f"({classifiers.shape[1]} on disk, {encoder.dim} now)"
            )
        if spec.images_per_class < 1:
            raise ExtractionError("images_per_class must be at least 1")

        mdir = f"models/{model_id}"
        images = []
        img_paths = []
        for j, cls in enumerate(classes):
            block = encoder.encode_class_images(
                spec.dataset, cls, classifiers[j], spec.images_per_class
            )
            rel = f"{mdir}/images/class_{j:03d}.mat"
            bw.write_mat(out / rel, block, "image_embeddings",
                         spec.dataset, model_id, class_index=j)
            img_paths.append(rel)
            images.append(block)
        entry["files"]["image_embeddings"] = img_paths

        gaps = compute_gap_table(images, classifiers)
        rel = f"{mdir}/gap_table.mat"
        bw.write_mat(out / rel, gaps, "gap_table", spec.dataset, model_id)
        entry["files"]["class_gap_vectors"] = rel

        acc = compute_class_accuracies(images, classifiers)
        rel = f"{mdir}/class_accuracies.mat"
        bw.write_mat(out / rel, acc.reshape(-1, 1), "class_accuracies",
                     spec.dataset, model_id)
        entry["files"]["class_accuracies"] = rel
        general_scores[model_id] = float(acc.mean())

        entry["imagenet_accuracy"] = general_scores[model_id]

    bw.save_manifest(out, manifest)
    logger.info("image statistics written to %s", out)
    return out
