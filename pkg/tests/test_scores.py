import numpy as np
import pytest

from swab.core import ValidationError
from swab.scores import (
    FEATURE_NAMES,
    ScoreConfig,
    assemble_score_vector,
    classification_scores,
    granularity_scores,
    inject_noise,
    zero_shot_classify,
)


def brute_force_labels(items, classifiers):
    labels = []
    for x in items:
        best, best_sim = 0, -np.inf
        for j, t in enumerate(classifiers):
            sim = float(x @ t / (np.linalg.norm(x) * np.linalg.norm(t)))
            if sim > best_sim:  # strict: ties keep the lowest index
                best, best_sim = j, sim
        labels.append(best)
    return np.array(labels)


# --- zero-shot rule -----------------------------------------------------------


def test_classify_identity():
    t = np.eye(4)
    assert np.array_equal(zero_shot_classify(t, t), np.arange(4))


def test_classify_tie_breaks_low_index():
    item = np.array([[1.0, 1.0]])
    classifiers = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert zero_shot_classify(item, classifiers)[0] == 0


def test_classify_matches_brute_force(rng):
    items = rng.normal(size=(20, 6))
    classifiers = rng.normal(size=(4, 6))
    assert np.array_equal(
        zero_shot_classify(items, classifiers), brute_force_labels(items, classifiers)
    )


def test_classify_scale_invariance(rng):
    items = rng.normal(size=(10, 5))
    classifiers = rng.normal(size=(3, 5))
    scaled = items * rng.uniform(0.1, 10.0, size=(10, 1))
    assert np.array_equal(
        zero_shot_classify(items, classifiers), zero_shot_classify(scaled, classifiers)
    )


def test_classify_invariant_under_joint_permutation(rng):
    items = rng.normal(size=(15, 5))
    classifiers = rng.normal(size=(4, 5))
    perm = rng.permutation(4)
    labels = zero_shot_classify(items, classifiers)
    labels_p = zero_shot_classify(items, classifiers[perm])
    # relabeling the permuted outcome recovers the original labels
    assert np.array_equal(perm[labels_p], labels)


def test_classify_rejects_zero_rows():
    with pytest.raises(ValidationError):
        zero_shot_classify(np.zeros((1, 3)), np.eye(3))
    with pytest.raises(ValidationError):
        zero_shot_classify(np.ones((1, 3)), np.zeros((2, 3)))


# --- classification scores ------------------------------------------------------


def test_perfect_captions():
    t = np.eye(3)
    captions = [t[j : j + 1] for j in range(3)]
    assert classification_scores(captions, t) == (1.0, 1.0)


def test_all_predicted_into_class_zero():
    # two balanced classes, every caption lands in class 0
    classifiers = np.array([[1.0, 0.0], [0.0, 1.0]])
    captions = [
        np.array([[1.0, 0.0], [1.0, 0.1]]),
        np.array([[1.0, 0.2], [1.0, 0.3]]),  # class-1 captions also nearest class 0
    ]
    top1, macro = classification_scores(captions, classifiers)
    assert top1 == pytest.approx(0.5)
    assert macro == pytest.approx((2 / 3 + 0.0) / 2)


def test_classification_matches_confusion_oracle(rng):
    classifiers = rng.normal(size=(4, 5))
    captions = [rng.normal(size=(rng.integers(2, 6), 5)) for _ in range(4)]
    top1, macro = classification_scores(captions, classifiers)

    labels = np.concatenate([np.full(len(c), j) for j, c in enumerate(captions)])
    preds = brute_force_labels(np.vstack(captions), classifiers)
    assert top1 == pytest.approx(np.mean(preds == labels))
    f1 = []
    for j in range(4):
        tp = np.sum((preds == j) & (labels == j))
        fp = np.sum((preds == j) & (labels != j))
        fn = np.sum((preds != j) & (labels == j))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1.append(2 * p * r / (p + r) if p + r else 0.0)
    assert macro == pytest.approx(np.mean(f1))


# --- granularity ----------------------------------------------------------------


def test_fisher_orthogonal_classifiers(rng):
    t = np.eye(4)
    captions = [rng.normal(size=(3, 4)) for _ in range(4)]
    fisher, _, _, _ = granularity_scores(captions, None, t)
    assert fisher == pytest.approx(0.0, abs=1e-12)


def test_dispersion_one_when_captions_equal_classifiers():
    t = np.eye(3)
    captions = [t[j : j + 1] for j in range(3)]
    _, _, dispersion, _ = granularity_scores(captions, None, t)
    assert dispersion == pytest.approx(1.0)


def test_granularity_matches_double_loop_oracle(rng):
    k, n = 3, 5
    t = rng.normal(size=(k, 6))
    captions = [rng.normal(size=(n, 6)) for _ in range(k)]
    synonyms = [rng.normal(size=(2, 6)) for _ in range(k)]
    fisher, sil, disp, syn = granularity_scores(captions, synonyms, t)

    def cos(a, b):
        return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

    fisher_o = np.mean([
        max(cos(t[i], t[j]) for i in range(k) if i != j) for j in range(k)
    ])
    sil_o = np.mean([
        max(np.mean([cos(c, t[i]) for c in captions[j]]) for i in range(k) if i != j)
        for j in range(k)
    ])
    disp_o = np.mean([cos(c, t[j]) for j in range(k) for c in captions[j]])
    syn_o = np.mean([cos(s, t[j]) for j in range(k) for s in synonyms[j]])
    assert fisher == pytest.approx(fisher_o, abs=1e-9)
    assert sil == pytest.approx(sil_o, abs=1e-9)
    assert disp == pytest.approx(disp_o, abs=1e-9)
    assert syn == pytest.approx(syn_o, abs=1e-9)


def test_granularity_single_class_rejected(rng):
    with pytest.raises(ValidationError):
        granularity_scores([rng.normal(size=(2, 3))], None, rng.normal(size=(1, 3)))


def test_granularity_empty_synonyms_reported_missing(rng):
    t = rng.normal(size=(3, 4))
    captions = [rng.normal(size=(2, 4)) for _ in range(3)]
    _, _, _, syn = granularity_scores(captions, [np.empty((0, 4))] * 3, t)
    assert syn is None


# --- noise -----------------------------------------------------------------------


def test_noise_sigma_zero_identity(rng):
    m = rng.normal(size=(4, 4))
    assert np.array_equal(inject_noise(m, 0.0, 7).data, m)


def test_noise_deterministic(rng):
    m = rng.normal(size=(5, 5))
    a = inject_noise(m, 0.2, 42).data
    b = inject_noise(m, 0.2, 42).data
    assert np.array_equal(a, b)
    c = inject_noise(m, 0.2, 43).data
    assert not np.array_equal(a, c)


def test_noise_moments(rng):
    m = np.zeros((100, 100))
    noised = inject_noise(m, 0.1, 3).data
    assert abs(noised.std() - 0.1) < 0.005  # within 5%


# --- assembly ---------------------------------------------------------------------


def test_assemble_composes_individual_ops(small_universe):
    bundle = small_universe.bundles[0]
    mid = "m01"
    captions = list(bundle.models[mid].caption_embeddings)
    sv = assemble_score_vector(bundle, mid, captions, ScoreConfig(0.0, 0, False))
    top1, macro = classification_scores(captions, bundle.models[mid].classifier_embeddings)
    fisher, sil, disp, syn = granularity_scores(
        captions, bundle.models[mid].synonym_embeddings,
        bundle.models[mid].classifier_embeddings)
    assert sv.features["text_top1"] == top1
    assert sv.features["text_macro_f1"] == macro
    assert sv.features["fisher"] == fisher
    assert sv.features["silhouette"] == sil
    assert sv.features["dispersion"] == disp
    assert sv.features["synonym_consistency"] == syn
    assert sv.features["imagenet_acc"] == bundle.models[mid].imagenet_accuracy
    assert sv.missing == ()


def test_assemble_two_seeds_differ_only_in_noise_sensitive_features(small_universe):
    from swab.scores import inject_noise_per_class

    bundle = small_universe.bundles[0]
    mid = "m02"
    captions = list(bundle.models[mid].caption_embeddings)
    svs = []
    for seed in (1, 2):
        noised = inject_noise_per_class(captions, 0.1, seed)
        svs.append(assemble_score_vector(bundle, mid, noised, ScoreConfig(0.1, seed, False)))
    a, b = svs
    # caption-derived features move with the seed
    assert a.features["text_top1"] != b.features["text_top1"] or \
        a.features["dispersion"] != b.features["dispersion"]
    # classifier/synonym/general features cannot depend on caption noise
    for name in ("fisher", "synonym_consistency", "imagenet_acc"):
        assert a.features[name] == b.features[name]


def test_assemble_perfect_separation():
    from swab.core import AssetBundle, ClassVocabulary, DenseMatrix, ModelAssets

    t = np.eye(4)
    vocab = ClassVocabulary(tuple("abcd"), dataset_id="sep")
    assets = ModelAssets(
        classifier_embeddings=DenseMatrix(t),
        caption_embeddings=tuple(DenseMatrix(np.tile(t[j], (3, 1))) for j in range(4)),
        synonym_embeddings=tuple(DenseMatrix(t[j : j + 1]) for j in range(4)),
        imagenet_accuracy=0.5,
    )
    bundle = AssetBundle("sep", vocab, DenseMatrix(np.eye(4)), {"m": assets})
    sv = assemble_score_vector(bundle, "m", list(assets.caption_embeddings))
    assert sv.features["text_top1"] == 1.0
    assert sv.features["dispersion"] == pytest.approx(1.0)
    assert sv.features["fisher"] == pytest.approx(0.0, abs=1e-12)


def test_assemble_missing_inb_flagged(small_universe, caplog):
    from dataclasses import replace
    from swab.core import AssetBundle

    bundle = small_universe.bundles[0]
    mid = "m00"
    assets = replace(bundle.models[mid], imagenet_accuracy=None)
    patched = AssetBundle(bundle.dataset_id, bundle.vocabulary,
                          bundle.classname_embeddings, {**bundle.models, mid: assets})
    with caplog.at_level("WARNING", logger="swab.scores"):
        sv = assemble_score_vector(patched, mid, list(assets.caption_embeddings))
    assert "imagenet_acc" in sv.missing
    assert sv.features["imagenet_acc"] == 0.0


def test_feature_order_is_stable():
    assert FEATURE_NAMES == (
        "text_top1", "text_macro_f1", "fisher", "silhouette",
        "dispersion", "synonym_consistency", "imagenet_acc",
    )
