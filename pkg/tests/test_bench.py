import dataclasses

import numpy as np
import pytest
from scipy.stats import kendalltau

from swab.bench import (
    RankVector,
    borda_ensemble,
    check_assets,
    kendall_tau_b,
    kendall_tau_top5,
    rank_models,
    run_fold,
    run_lodo_benchmark,
    top5_recall,
)
from swab.config import RunConfig
from swab.core import (
    AssetBundle,
    AssetMissingError,
    ClassVocabulary,
    DenseMatrix,
    ModelAssets,
    ModelZoo,
    ValidationError,
)
from swab.synth import SynthConfig, generate_synthetic_universe


def rv(values, ids=None):
    values = np.asarray(values, dtype=float)
    ids = tuple(f"m{i}" for i in range(values.size)) if ids is None else ids
    return RankVector(ids, values)


# --- rank vectors and borda -----------------------------------------------------


def test_rank_vector_sum_invariant():
    with pytest.raises(ValidationError):
        rv([1, 1, 1])


def test_borda_identical_inputs():
    r = rv([2, 1, 3])
    out = borda_ensemble(r, r, 0.3)
    assert np.array_equal(out.values, r.values)


def test_borda_alpha_one_is_identity():
    r1 = rv([1, 2.5, 2.5, 4])
    r2 = rv([4, 3, 2, 1])
    out = borda_ensemble(r1, r2, 1.0)
    assert np.array_equal(out.values, r1.values)


def test_borda_full_tie():
    out = borda_ensemble(rv([1, 2, 3]), rv([3, 2, 1]), 0.5)
    assert np.array_equal(out.values, [2, 2, 2])


def test_borda_model_set_mismatch():
    with pytest.raises(ValidationError):
        borda_ensemble(rv([1, 2]), rv([1, 2], ids=("x", "y")), 0.5)


def test_borda_alpha_range():
    with pytest.raises(ValidationError):
        borda_ensemble(rv([1, 2]), rv([1, 2]), 1.5)


# --- top-5 recall -----------------------------------------------------------------


def test_r5_identical():
    r = rv(np.arange(1, 8, dtype=float))
    assert top5_recall(r, r) == 1.0


def test_r5_disjoint():
    pred = rv(np.arange(1, 11, dtype=float))
    truth = rv(np.arange(10, 0, -1, dtype=float))
    assert top5_recall(pred, truth) == 0.0


def test_r5_three_of_five():
    pred = rv([1, 2, 3, 4, 5, 6, 7, 8], ids=tuple("abcdefgh"))
    truth = rv([1, 2, 3, 8, 7, 6, 5, 4], ids=tuple("abcdefgh"))
    p = {"a", "b", "c", "d", "e"}
    t = {"a", "b", "c", "h", "g"}
    assert top5_recall(pred, truth) == len(p & t) / 5 == 0.6


def test_r5_needs_five_models():
    with pytest.raises(ValidationError):
        top5_recall(rv([1, 2, 3, 4]), rv([1, 2, 3, 4]))


def test_r5_tie_straddle_logged(caplog):
    pred = rv([1, 2, 3, 4, 5.5, 5.5, 7], ids=tuple("abcdefg"))
    truth = rv(np.arange(1, 8, dtype=float), ids=tuple("abcdefg"))
    with caplog.at_level("INFO", logger="swab.bench"):
        top5_recall(pred, truth)
    assert "straddles" in caplog.text


def test_r5_values_on_grid(rng):
    grid = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}
    ids = tuple(f"m{i}" for i in range(9))
    for _ in range(100):
        pred = rank_models(ids, rng.normal(size=9), True)
        truth = rank_models(ids, rng.normal(size=9), True)
        assert top5_recall(pred, truth) in grid


# --- kendall tau -------------------------------------------------------------------


def test_tau_identical():
    r = rv(np.arange(1, 7, dtype=float))
    assert kendall_tau_top5(r, r) == 1.0


def test_tau_reversed_full_intersection():
    pred = rv([1, 2, 3, 4, 5], ids=tuple("abcde"))
    truth = rv([5, 4, 3, 2, 1], ids=tuple("abcde"))
    assert kendall_tau_top5(pred, truth) == -1.0


def test_tau_three_with_one_discordant_pair():
    # F = {a, b, c}; pred: a<b<c, truth: a<c<b -> one discordant pair of three
    pred = rv([1, 2, 3, 4, 5, 6, 7], ids=tuple("abcdefg"))
    truth = rv([1, 3, 2, 6, 7, 4.5, 4.5], ids=tuple("abcdefg"))
    f = {"a", "b", "c"}  # top5(pred) = abcde, top5(truth) = abcfg -> F = abc
    assert kendall_tau_top5(pred, truth) == pytest.approx(1 / 3)


def test_tau_small_intersection_zero(caplog):
    pred = rv([1, 2, 3, 4, 5, 6, 7, 8, 9, 10])
    truth = rv([10, 9, 8, 7, 6, 5, 4, 3, 2, 1])
    with caplog.at_level("INFO", logger="swab.bench"):
        assert kendall_tau_top5(pred, truth) == 0.0
    assert "|F|=0" in caplog.text


def test_tau_two_element_intersection_keeps_raw_value():
    pred = rv([1, 2, 3, 4, 5, 6, 7, 8], ids=tuple("abcdefgh"))
    truth = rv([1, 2, 7, 8, 6, 5, 3.5, 3.5], ids=tuple("abcdefgh"))
    # F = {a, b}: concordant pair -> +1
    assert kendall_tau_top5(pred, truth) == 1.0


def test_tau_matches_pairwise_oracle_and_scipy(rng):
    for _ in range(300):
        n = int(rng.integers(2, 9))
        x = rng.integers(0, 5, n).astype(float)
        y = rng.integers(0, 5, n).astype(float)
        mine = kendall_tau_b(x, y)
        conc = disc = tx = ty = 0
        for i in range(n - 1):
            for j in range(i + 1, n):
                dx, dy = x[i] - x[j], y[i] - y[j]
                if dx == 0 and dy == 0:
                    tx += 1
                    ty += 1
                elif dx == 0:
                    tx += 1
                elif dy == 0:
                    ty += 1
                elif dx * dy > 0:
                    conc += 1
                else:
                    disc += 1
        n0 = n * (n - 1) // 2
        if n0 - tx <= 0 or n0 - ty <= 0:
            assert mine == 0.0
            continue
        import math

        oracle = (conc - disc) / math.sqrt((n0 - tx) * (n0 - ty))
        assert mine == oracle
        sp = kendalltau(x, y, variant="b").statistic
        assert mine == pytest.approx(sp, abs=1e-12)


def test_metrics_invariant_to_rank_convention(rng):
    ids = tuple(f"m{i}" for i in range(8))
    scores_p = rng.normal(size=8)
    scores_t = rng.normal(size=8)
    pred_a = rank_models(ids, scores_p, higher_is_better=True)
    pred_b = rank_models(ids, -scores_p, higher_is_better=False)
    truth = rank_models(ids, scores_t, higher_is_better=True)
    assert np.array_equal(pred_a.values, pred_b.values)
    assert top5_recall(pred_a, truth) == top5_recall(pred_b, truth)
    assert kendall_tau_top5(pred_a, truth) == kendall_tau_top5(pred_b, truth)


# --- synthetic universe -----------------------------------------------------------


def test_generator_is_deterministic():
    cfg = SynthConfig(n_datasets=2, classes_per_dataset=4, n_models=5, dim=8,
                      semantic_clusters=2, captions_per_class=3, synonyms_per_class=2)
    a = generate_synthetic_universe(cfg, 11)
    b = generate_synthetic_universe(cfg, 11)
    for ba, bb in zip(a.bundles, b.bundles):
        assert np.array_equal(ba.classname_embeddings.data, bb.classname_embeddings.data)
        for mid in ba.models:
            assert np.array_equal(
                ba.models[mid].caption_embeddings[0].data,
                bb.models[mid].caption_embeddings[0].data,
            )
    c = generate_synthetic_universe(cfg, 12)
    assert not np.array_equal(
        a.bundles[0].classname_embeddings.data, c.bundles[0].classname_embeddings.data
    )


def test_truth_ranking_matches_mean_accuracy(small_universe):
    for ds, ranking in small_universe.truth_ranking.items():
        acc = small_universe.true_mean_acc[ds]
        assert np.array_equal(np.argsort(ranking), np.argsort(-acc))


def test_single_cluster_makes_plans_equivalent():
    cfg = SynthConfig(n_datasets=3, classes_per_dataset=5, n_models=6, dim=8,
                      semantic_clusters=1, captions_per_class=4, synonyms_per_class=2)
    u = generate_synthetic_universe(cfg, 3)
    fold = run_fold(u.bundles, u.zoo, 0, RunConfig(seeds=(1,)))
    m = fold["per_seed"][1]
    assert np.array_equal(m["swab-c"].values, m["avg-rank"].values)


def test_gap_scale_zero_makes_correction_noop():
    cfg = SynthConfig(n_datasets=3, classes_per_dataset=5, n_models=6, dim=8,
                      semantic_clusters=2, captions_per_class=4, synonyms_per_class=2,
                      gap_scale=0.0)
    u = generate_synthetic_universe(cfg, 5)
    fold = run_fold(u.bundles, u.zoo, 0, RunConfig(seeds=(1,)))
    m = fold["per_seed"][1]
    assert np.array_equal(m["swab-m"].values, m["modelgpt"].values)


def test_infeasible_synth_config_rejected():
    with pytest.raises(ValidationError):
        SynthConfig(n_models=4)
    with pytest.raises(ValidationError):
        SynthConfig(semantic_clusters=40, dim=8)


# --- LODO benchmark ----------------------------------------------------------------


def _ladder_bundle(dataset_id, rng, k=5, m=9, d=8):
    """Accuracies follow a fixed quality ladder, identical orderings per class."""
    names = tuple(f"{dataset_id}_c{i}" for i in range(k))
    vocab = ClassVocabulary(names, dataset_id=dataset_id)
    classname = DenseMatrix(np.eye(k, d))
    models = {}
    for mi in range(m):
        classifiers = DenseMatrix(np.eye(k, d) + 0.01 * rng.normal(size=(k, d)))
        captions = tuple(
            DenseMatrix(classifiers.data[j] + 0.1 * rng.normal(size=(3, d)))
            for j in range(k)
        )
        acc = np.clip(0.9 - 0.12 * mi + 0.01 * np.arange(k), 0.0, 1.0)
        models[f"m{mi:02d}"] = ModelAssets(
            classifier_embeddings=classifiers,
            caption_embeddings=captions,
            synonym_embeddings=tuple(
                DenseMatrix(classifiers.data[j : j + 1]) for j in range(k)),
            class_gap_vectors=DenseMatrix(np.zeros((k, d))),
            class_accuracies=acc,
            imagenet_accuracy=float(np.clip(0.8 - 0.1 * mi, 0.0, 1.0)),
        )
    return AssetBundle(dataset_id, vocab, classname, models)


def test_perfect_transfer_recovers_truth(rng):
    target = _ladder_bundle("target", rng)
    source = _ladder_bundle("source", rng)
    zoo = ModelZoo(tuple(target.models), {mid: 8 for mid in target.models})
    fold = run_fold([source, target], zoo, 1, RunConfig(seeds=(1,), noise_sigma=0.0))
    truth = fold["truth"]
    swab_c = fold["per_seed"][1]["swab-c"]
    assert np.array_equal(swab_c.values, truth.values)
    assert top5_recall(swab_c, truth) == 1.0


def test_alpha_one_equals_learning_branch(small_universe):
    cfg = RunConfig(seeds=(1, 2), alpha=1.0)
    rep = run_lodo_benchmark(small_universe.bundles, small_universe.zoo, cfg)
    for ds in rep.payload["datasets"]:
        assert rep.payload["per_dataset"][ds]["swab"] == rep.payload["per_dataset"][ds]["swab-m"]


def test_report_determinism(small_universe):
    cfg = RunConfig(seeds=(1, 2))
    a = run_lodo_benchmark(small_universe.bundles, small_universe.zoo, cfg)
    b = run_lodo_benchmark(small_universe.bundles, small_universe.zoo, cfg)
    assert a.to_json() == b.to_json()


def test_report_shape(small_universe):
    cfg = RunConfig(seeds=(1, 2, 3))
    rep = run_lodo_benchmark(small_universe.bundles, small_universe.zoo, cfg)
    p = rep.payload
    assert p["methods"] == ["swab", "swab-m", "swab-c", "avg-rank", "inb", "modelgpt"]
    ds = p["datasets"][0]
    cell = p["per_dataset"][ds]["swab"]["R5"]
    assert set(cell["per_seed"]) == {"1", "2", "3"}
    assert 0.0 <= cell["mean"] <= 1.0
    overall = p["overall"]["swab"]["r5_plus_tau"]
    assert set(overall["per_seed_mean"]) == {"1", "2", "3"}
    assert p["config"]["alpha"] == 0.5


def test_uniformly_missing_synonyms_reduce_feature_set(small_universe):
    # drop synonyms everywhere: the ranker trains on the reduced feature set
    bundles = [
        AssetBundle(
            b.dataset_id, b.vocabulary, b.classname_embeddings,
            {mid: dataclasses.replace(a, synonym_embeddings=None)
             for mid, a in b.models.items()},
        )
        for b in small_universe.bundles
    ]
    rep = run_lodo_benchmark(bundles, small_universe.zoo, RunConfig(seeds=(1,)))
    assert "swab" in rep.payload["overall"]


def test_mixed_synonym_presence_rejected(small_universe):
    bundles = list(small_universe.bundles)
    b0 = bundles[0]
    models = dict(b0.models)
    first = next(iter(models))
    models[first] = dataclasses.replace(models[first], synonym_embeddings=None)
    bundles[0] = AssetBundle(b0.dataset_id, b0.vocabulary, b0.classname_embeddings, models)
    with pytest.raises(AssetMissingError, match="synonym"):
        check_assets(bundles, small_universe.zoo)


def test_missing_assets_fail_fast(small_universe):
    bundles = list(small_universe.bundles)
    b0 = bundles[0]
    stripped = {
        mid: dataclasses.replace(assets, class_accuracies=None)
        for mid, assets in b0.models.items()
    }
    bundles[0] = AssetBundle(b0.dataset_id, b0.vocabulary, b0.classname_embeddings, stripped)
    with pytest.raises(AssetMissingError, match="class_accuracies"):
        check_assets(bundles, small_universe.zoo)


def test_benchmark_needs_two_bundles(small_universe):
    with pytest.raises(ValidationError):
        run_lodo_benchmark(small_universe.bundles[:1], small_universe.zoo, RunConfig(seeds=(1,)))


def test_threaded_run_matches_sequential(small_universe, monkeypatch):
    cfg = RunConfig(seeds=(1,))
    seq = run_lodo_benchmark(small_universe.bundles, small_universe.zoo, cfg)
    monkeypatch.setenv("SWAB_THREADS", "4")
    par = run_lodo_benchmark(small_universe.bundles, small_universe.zoo, cfg)
    assert seq.to_json() == par.to_json()
