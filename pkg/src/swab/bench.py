"""Ranking metrics, branch ensembling and the leave-one-dataset-out benchmark.

Each dataset in turn is the target; the remaining bundles are the open-source
pool. The learning branch scores gap-corrected (and noise-corrupted) target
captions with a ranker fitted on the pool; the capability branch pushes
class-level model rankings through the partial transport plan. Both rankings
are combined with a weighted Borda count and scored against the ground-truth
ranking by top-5 recall and Kendall's tau on the top-5 intersection.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import capability as cap
from . import gap as gapmod
from . import ranker as rankermod
from . import scores as scoremod
from . import transport
from .config import RunConfig
from .core import (
    AssetBundle,
    AssetMissingError,
    DenseMatrix,
    ModelZoo,
    ValidationError,
)

logger = logging.getLogger("swab.bench")

METHODS = ("swab", "swab-m", "swab-c", "avg-rank", "inb", "modelgpt")
METRICS = ("R5", "tau", "r5_plus_tau")


@dataclass(frozen=True)
class RankVector:
    """Per-model rank values, 1 = best, ties averaged; sums to M(M+1)/2."""

    model_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model_ids", tuple(self.model_ids))
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        m = len(self.model_ids)
        if v.shape != (m,):
            raise ValidationError("rank vector length must match model count")
        if abs(v.sum() - m * (m + 1) / 2) > 1e-9:
            raise ValidationError("rank values must sum to M(M+1)/2")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return len(self.model_ids)


def rank_models(model_ids, scores, higher_is_better: bool) -> RankVector:
    """Tied-average rank vector from raw scores (1 = best)."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValidationError("scores contain NaN/Inf")
    values = rankdata(-s if higher_is_better else s, method="average")
    return RankVector(tuple(model_ids), values)


def borda_ensemble(r1: RankVector, r2: RankVector, alpha: float) -> RankVector:
    """score_m = alpha*r1 + (1-alpha)*r2; re-ranked ascending, ties averaged."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must be in [0, 1], got {alpha}")
    if r1.model_ids != r2.model_ids:
        raise ValidationError("rank vectors cover different model sets")
    score = alpha * r1.values + (1.0 - alpha) * r2.values
    return RankVector(r1.model_ids, rankdata(score, method="average"))


def _top5_indices(values: np.ndarray) -> tuple[set[int], bool]:
    """Indices of the five smallest rank values; ties cut by model index."""
    order = np.lexsort((np.arange(values.size), values))
    straddle = values.size > 5 and values[order[4]] == values[order[5]]
    return set(int(i) for i in order[:5]), straddle


def top5_recall(pred: RankVector, truth: RankVector) -> float:
    """|top5(pred) ∩ top5(truth)| / 5."""
    if pred.size < 5 or truth.size < 5:
        raise ValidationError("top-5 recall needs at least five models")
    if pred.model_ids != truth.model_ids:
        raise ValidationError("rank vectors cover different model sets")
    p, ps = _top5_indices(pred.values)
    t, ts = _top5_indices(truth.values)
    if ps or ts:
        logger.info("top5_recall: a rank tie straddles the top-5 boundary")
    return len(p & t) / 5.0


def kendall_tau_b(x: np.ndarray, y: np.ndarray) -> float:
    """Tie-corrected Kendall correlation via the O(n^2) pairwise definition."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 2:
        return 0.0
    conc = disc = ties_x = ties_y = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                ties_x += 1
                ties_y += 1
            elif dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                conc += 1
            else:
                disc += 1
    n0 = n * (n - 1) // 2
    d1, d2 = n0 - ties_x, n0 - ties_y
    if d1 <= 0 or d2 <= 0:
        logger.info("kendall_tau_b: a ranking is constant; tau defined as 0")
        return 0.0
    return (conc - disc) / math.sqrt(d1 * d2)


def kendall_tau_top5(pred: RankVector, truth: RankVector) -> float:
    """Kendall's tau-b restricted to the intersection of both top-5 sets.

    An intersection of one or zero models yields 0 (logged); the raw value is
    kept for two-model intersections.
    """
    if pred.size < 5 or truth.size < 5:
        raise ValidationError("top-5 tau needs at least five models")
    if pred.model_ids != truth.model_ids:
        raise ValidationError("rank vectors cover different model sets")
    p, _ = _top5_indices(pred.values)
    t, _ = _top5_indices(truth.values)
    inter = sorted(p & t)
    if len(inter) <= 1:
        logger.info("kendall_tau_top5: |F|=%d, tau defined as 0", len(inter))
        return 0.0
    return kendall_tau_b(pred.values[inter], truth.values[inter])


# ---------------------------------------------------------------------------
# LODO benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkReport:
    """Per-dataset, per-seed metric values with config snapshot."""

    payload: dict

    def to_json(self) -> str:
        return json.dumps(self.payload, sort_keys=True, indent=2) + "\n"

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        lines = ["dataset_id,method,R5_mean,R5_std,tau_mean,tau_std,r5_plus_tau_mean,r5_plus_tau_std"]
        for ds in self.payload["datasets"]:
            per = self.payload["per_dataset"][ds]
            for method in self.payload["methods"]:
                cells = [ds, method]
                for metric in METRICS:
                    cells.append(repr(per[method][metric]["mean"]))
                    cells.append(repr(per[method][metric]["std"]))
                lines.append(",".join(cells))
        (out / "per_dataset.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        return out / "report.json"

    def overall(self, method: str, metric: str) -> float:
        return self.payload["overall"][method][metric]["mean"]


def _require(condition: bool, missing: list[str], message: str) -> None:
    if not condition:
        missing.append(message)


def check_assets(bundles: list[AssetBundle], zoo: ModelZoo) -> None:
    """Fail fast with every missing role enumerated before any solve."""
    missing: list[str] = []
    syn_presence = set()
    inb_presence = set()
    for b in bundles:
        for mid in zoo.model_ids:
            if mid not in b.models:
                missing.append(f"{b.dataset_id}/{mid}: model assets")
                continue
            a = b.models[mid]
            _require(len(a.caption_embeddings) == b.k and all(
                blk.rows >= 1 for blk in a.caption_embeddings),
                missing, f"{b.dataset_id}/{mid}: caption_embeddings")
            _require(a.class_accuracies is not None, missing,
                     f"{b.dataset_id}/{mid}: class_accuracies")
            _require(a.class_gap_vectors is not None, missing,
                     f"{b.dataset_id}/{mid}: class_gap_vectors")
            syn_presence.add(a.synonym_embeddings is not None)
            inb_presence.add(a.imagenet_accuracy is not None)
    if len(syn_presence) > 1:
        missing.append("synonym_embeddings present for some models/datasets but not all")
    if len(inb_presence) > 1:
        missing.append("imagenet_accuracy present for some models/datasets but not all")
    if missing:
        raise AssetMissingError("missing assets:\n" + "\n".join(sorted(missing)))


@dataclass
class _SourcePool:
    """Classes of several bundles stacked in a fixed order."""

    classname_emb: np.ndarray
    accuracies: np.ndarray  # M x k_pool
    gap_rows: dict[str, np.ndarray]  # model -> k_pool x d


def _pool_sources(sources: list[AssetBundle], zoo: ModelZoo, gap_level: str) -> _SourcePool:
    emb = np.vstack([b.classname_embeddings.data for b in sources])
    acc = np.hstack([
        np.vstack([b.models[mid].class_accuracies for mid in zoo.model_ids])
        for b in sources
    ])
    gap_rows: dict[str, np.ndarray] = {}
    for mid in zoo.model_ids:
        per_ds = []
        for b in sources:
            table = gapmod.GapTable(mid, b.models[mid].class_gap_vectors.data)
            if gap_level == gapmod.DATASET_MEAN:
                table = gapmod.to_dataset_mean(table)
            per_ds.append(table.matrix)
        gap_rows[mid] = np.vstack(per_ds)
    return _SourcePool(classname_emb=emb, accuracies=acc, gap_rows=gap_rows)


def _filtered_indices(pool_emb, target_emb, lam, notes: list[str], label: str) -> list[int]:
    try:
        return transport.filter_source_classes(pool_emb, target_emb, lam)
    except transport.NoRelevantClassesError:
        notes.append(f"{label}: class filter removed every source class; using all")
        logger.warning("%s: class filter emptied the source set, falling back", label)
        return list(range(pool_emb.shape[0]))


def _corrected_captions(
    target: AssetBundle,
    sources: list[AssetBundle],
    zoo: ModelZoo,
    config: RunConfig,
    notes: list[str],
) -> dict[str, list[DenseMatrix]]:
    """Gap-corrected captions per model for `target`, transferring from `sources`."""
    if not sources:
        notes.append(f"{target.dataset_id}: no source datasets; captions left unmodified")
        return {mid: list(target.models[mid].caption_embeddings) for mid in zoo.model_ids}
    pool = _pool_sources(sources, zoo, config.gap_level)
    idx = _filtered_indices(pool.classname_emb, target.classname_embeddings.data,
                            config.lambda_filter, notes, target.dataset_id)
    cost = transport.build_cost_matrix(pool.classname_emb[idx],
                                       target.classname_embeddings.data,
                                       exponentiate=config.exponentiate_cost)
    u, v = transport.uniform_marginals(len(idx), target.k)
    if config.partial_for_modality:
        plan = transport.solve_partial_ot(cost, u, v, config.mass_fraction)
    else:
        plan = transport.solve_ot(cost, u, v, method=config.ot_method)
    corrected = {}
    for mid in zoo.model_ids:
        source_table = gapmod.GapTable(mid, pool.gap_rows[mid][idx])
        target_table = gapmod.transfer_gap_vectors(plan, source_table, target.k)
        corrected[mid] = gapmod.apply_gap_to_texts(
            list(target.models[mid].caption_embeddings), target_table
        )
    return corrected


def _noise_seed(seed: int, model_index: int) -> int:
    return seed * 1_000_003 + model_index


def _score_rows(
    bundle: AssetBundle,
    zoo: ModelZoo,
    captions_per_model: dict[str, list[DenseMatrix]],
    gap_corrected: bool,
) -> list[scoremod.ScoreVector]:
    cfg = scoremod.ScoreConfig(noise_sigma=0.0, seed=0, gap_corrected=gap_corrected)
    return [
        scoremod.assemble_score_vector(bundle, mid, captions_per_model[mid], cfg)
        for mid in zoo.model_ids
    ]


def _uniform_missing(rows: list[scoremod.ScoreVector]) -> tuple[str, ...]:
    missing_sets = {sv.missing for sv in rows}
    if len(missing_sets) > 1:
        raise AssetMissingError(
            f"feature availability differs across models: {sorted(missing_sets)}"
        )
    return next(iter(missing_sets))


def _active_features(missing: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(n for n in scoremod.FEATURE_NAMES if n not in missing)


def run_fold(
    bundles: list[AssetBundle],
    zoo: ModelZoo,
    target_index: int,
    config: RunConfig,
) -> dict:
    """One LODO fold: returns per-seed rank vectors for every method."""
    notes: list[str] = []
    target = bundles[target_index]
    sources = [b for i, b in enumerate(bundles) if i != target_index]
    model_ids = zoo.model_ids
    m_count = len(model_ids)

    # ground truth: mean per-class accuracy of the target
    true_acc = np.array([
        float(np.mean(target.models[mid].class_accuracies)) for mid in model_ids
    ])
    truth = rank_models(model_ids, true_acc, higher_is_better=True)

    # capability branch on the filtered pooled source classes
    pool = _pool_sources(sources, zoo, config.gap_level)
    idx = _filtered_indices(pool.classname_emb, target.classname_embeddings.data,
                            config.lambda_filter, notes, target.dataset_id)
    cost = transport.build_cost_matrix(pool.classname_emb[idx],
                                       target.classname_embeddings.data,
                                       exponentiate=config.exponentiate_cost)
    u, v = transport.uniform_marginals(len(idx), target.k)
    if config.partial_for_capability:
        plan_cap = transport.solve_partial_ot(cost, u, v, config.mass_fraction)
    else:
        plan_cap = transport.solve_ot(cost, u, v, method=config.ot_method)
    rank_table = cap.class_rankings(pool.accuracies[:, idx], model_ids)
    transferred = cap.transfer_rankings(rank_table, plan_cap)
    r2_values = cap.aggregate_target_rank(transferred, column_mass=plan_cap.column_mass)
    r2 = rank_models(model_ids, r2_values, higher_is_better=False)

    # average-rank baseline: uniform plan over all (unfiltered) source classes
    all_ranks = cap.class_rankings(pool.accuracies, model_ids)
    uni = cap.uniform_plan(pool.accuracies.shape[1], target.k)
    avg_values = cap.aggregate_target_rank(cap.transfer_rankings(all_ranks, uni))
    avg_rank = rank_models(model_ids, avg_values, higher_is_better=False)

    # general-ability baseline
    inb_vals = np.array([
        -np.inf if target.models[mid].imagenet_accuracy is None
        else float(target.models[mid].imagenet_accuracy)
        for mid in model_ids
    ])
    has_inb = np.all(np.isfinite(inb_vals))
    inb_rank = rank_models(model_ids, inb_vals, True) if has_inb else None

    # learning branch: train rows over source datasets (corrected and plain)
    train_corrected: list[tuple[scoremod.ScoreVector, float]] = []
    train_plain: list[tuple[scoremod.ScoreVector, float]] = []
    for i, src in enumerate(sources):
        others = [b for j, b in enumerate(sources) if j != i]
        corrected = _corrected_captions(src, others, zoo, config, notes)
        plain = {mid: list(src.models[mid].caption_embeddings) for mid in model_ids}
        acc = {mid: float(np.mean(src.models[mid].class_accuracies)) for mid in model_ids}
        for sv in _score_rows(src, zoo, corrected, gap_corrected=True):
            train_corrected.append((sv, acc[sv.model_id]))
        for sv in _score_rows(src, zoo, plain, gap_corrected=False):
            train_plain.append((sv, acc[sv.model_id]))

    missing = _uniform_missing([sv for sv, _ in train_corrected])
    features = _active_features(missing)
    ranker_swab = rankermod.fit(train_corrected, config.ridge_lambda, features)
    ranker_plain = rankermod.fit(train_plain, config.ridge_lambda, features)

    # target-side captions, corrected once; noise varies per seed
    corrected_target = _corrected_captions(target, sources, zoo, config, notes)
    plain_target = {mid: list(target.models[mid].caption_embeddings) for mid in model_ids}

    per_seed: dict[int, dict[str, RankVector]] = {}
    for seed in config.seeds:
        preds_swab = np.empty(m_count)
        preds_plain = np.empty(m_count)
        for mi, mid in enumerate(model_ids):
            noise_seed = _noise_seed(seed, mi)
            cfg = scoremod.ScoreConfig(config.noise_sigma, seed, gap_corrected=True)
            noised = scoremod.inject_noise_per_class(
                corrected_target[mid], config.noise_sigma, noise_seed)
            sv = scoremod.assemble_score_vector(target, mid, noised, cfg)
            preds_swab[mi] = rankermod.predict(ranker_swab, sv)

            cfg_p = scoremod.ScoreConfig(config.noise_sigma, seed, gap_corrected=False)
            noised_p = scoremod.inject_noise_per_class(
                plain_target[mid], config.noise_sigma, noise_seed)
            sv_p = scoremod.assemble_score_vector(target, mid, noised_p, cfg_p)
            preds_plain[mi] = rankermod.predict(ranker_plain, sv_p)

        r1 = RankVector(model_ids, rankermod.rank_from_predictions(preds_swab))
        mgpt = RankVector(model_ids, rankermod.rank_from_predictions(preds_plain))
        methods = {
            "swab": borda_ensemble(r1, r2, config.alpha),
            "swab-m": r1,
            "swab-c": r2,
            "avg-rank": avg_rank,
            "modelgpt": mgpt,
        }
        if inb_rank is not None:
            methods["inb"] = inb_rank
        per_seed[seed] = methods

    return {
        "dataset_id": target.dataset_id,
        "truth": truth,
        "per_seed": per_seed,
        "notes": sorted(notes),
    }


def _mean_std(values: list[float]) -> dict:
    a = np.asarray(values, dtype=np.float64)
    return {"mean": float(a.mean()), "std": float(a.std())}


def run_lodo_benchmark(
    bundles: list[AssetBundle], zoo: ModelZoo, config: RunConfig
) -> BenchmarkReport:
    """Score every method on every fold and seed; aggregate like the report
    layout: per-dataset mean/std over seeds, overall mean over datasets with
    std over seeds of the per-seed dataset means."""
    if len(bundles) < 2:
        raise ValidationError("the benchmark needs at least two bundles")
    check_assets(bundles, zoo)
    bundles = sorted(bundles, key=lambda b: b.dataset_id)

    threads = int(os.environ.get("SWAB_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            folds = list(pool.map(
                lambda i: run_fold(bundles, zoo, i, config), range(len(bundles))
            ))
    else:
        folds = [run_fold(bundles, zoo, i, config) for i in range(len(bundles))]
    folds.sort(key=lambda f: f["dataset_id"])

    methods = [m for m in METHODS if all(
        m in f["per_seed"][config.seeds[0]] for f in folds)]
    per_dataset: dict = {}
    notes: list[str] = []
    raw: dict[str, dict[str, dict[int, float]]] = {}
    for fold in folds:
        ds = fold["dataset_id"]
        notes.extend(fold["notes"])
        per_dataset[ds] = {}
        raw[ds] = {}
        for method in methods:
            metric_seed_values = {metric: {} for metric in METRICS}
            for seed in config.seeds:
                pred = fold["per_seed"][seed][method]
                r5 = top5_recall(pred, fold["truth"])
                tau = kendall_tau_top5(pred, fold["truth"])
                metric_seed_values["R5"][seed] = r5
                metric_seed_values["tau"][seed] = tau
                metric_seed_values["r5_plus_tau"][seed] = r5 + tau
            per_dataset[ds][method] = {
                metric: {
                    "per_seed": {str(s): v for s, v in vals.items()},
                    **_mean_std(list(vals.values())),
                }
                for metric, vals in metric_seed_values.items()
            }
            raw[ds][method] = metric_seed_values

    overall: dict = {}
    for method in methods:
        overall[method] = {}
        for metric in METRICS:
            seed_means = [
                float(np.mean([raw[ds][method][metric][seed] for ds in raw]))
                for seed in config.seeds
            ]
            overall[method][metric] = {
                "per_seed_mean": {str(s): v for s, v in zip(config.seeds, seed_means)},
                **_mean_std(seed_means),
            }

    payload = {
        "config": config.to_dict(),
        "datasets": [b.dataset_id for b in bundles],
        "models": list(zoo.model_ids),
        "methods": methods,
        "per_dataset": per_dataset,
        "overall": overall,
        "notes": sorted(set(notes)),
    }
    return BenchmarkReport(payload)
