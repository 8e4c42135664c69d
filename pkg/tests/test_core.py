import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from swab.core import (
    AssetBundle,
    ClassVocabulary,
    DenseMatrix,
    ModelAssets,
    ModelZoo,
    ValidationError,
    l2_normalize,
    validate_bundle,
    zscore_normalize,
)


def test_l2_three_four_five():
    out = l2_normalize(np.array([[3.0, 4.0]]))
    assert np.allclose(out.data, [[0.6, 0.8]])
    assert out.normalized == "l2"


def test_l2_zero_row_unchanged_and_reported(caplog):
    with caplog.at_level("WARNING", logger="swab.core"):
        out = l2_normalize(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert np.array_equal(out.data[0], [0.0, 0.0])
    assert "all-zero" in caplog.text


def test_l2_random_rows_unit_norm(rng):
    m = rng.normal(size=(5, 8))
    out = l2_normalize(m)
    norms = np.sqrt((out.data**2).sum(axis=1))  # direct recomputation
    assert np.max(np.abs(norms - 1.0)) < 1e-6


@settings(max_examples=40)
@given(arrays(np.float64, (4, 3), elements=st.floats(-50, 50)))
def test_l2_idempotent(m):
    once = l2_normalize(m)
    twice = l2_normalize(once)
    assert np.max(np.abs(twice.data - once.data)) <= 1e-7


def test_l2_rejects_nonfinite():
    with pytest.raises(ValidationError):
        l2_normalize(np.array([[np.nan, 1.0]]))


def test_zscore_two_point_column():
    out, mean, std = zscore_normalize(np.array([[1.0], [3.0]]))
    assert np.allclose(out.data.ravel(), [-1.0, 1.0])
    assert mean[0] == 2.0 and std[0] == 1.0  # population convention


def test_zscore_constant_column_eps_floor():
    out, _, std = zscore_normalize(np.array([[5.0], [5.0], [5.0]]))
    assert np.array_equal(out.data.ravel(), [0.0, 0.0, 0.0])
    assert std[0] == 1e-12


def test_zscore_random_moments(rng):
    m = rng.normal(3.0, 2.5, size=(100, 4))
    out, _, _ = zscore_normalize(m)
    assert np.max(np.abs(out.data.mean(axis=0))) < 1e-6
    assert np.max(np.abs(out.data.std(axis=0) - 1.0)) < 1e-6


def test_zscore_empty_matrix_rejected():
    with pytest.raises(ValidationError):
        zscore_normalize(np.empty((0, 3)))


@settings(max_examples=40)
@given(arrays(np.float64, (6, 2), elements=st.floats(-1e3, 1e3)))
def test_zscore_round_trip(m):
    out, mean, std = zscore_normalize(m)
    back = out.data * std + mean
    assert np.max(np.abs(back - m)) < 1e-5


def _tiny_bundle(k=3, d=4, accuracies=None):
    rng = np.random.default_rng(0)
    vocab = ClassVocabulary(tuple(f"c{i}" for i in range(k)), dataset_id="toy")
    mk = lambda r: DenseMatrix(rng.normal(size=(r, d)))
    assets = ModelAssets(
        classifier_embeddings=mk(k),
        caption_embeddings=tuple(mk(2) for _ in range(k)),
        synonym_embeddings=tuple(mk(1) for _ in range(k)),
        class_gap_vectors=mk(k),
        class_accuracies=np.full(k, 0.5) if accuracies is None else accuracies,
        imagenet_accuracy=0.6,
    )
    bundle = AssetBundle("toy", vocab, DenseMatrix(rng.normal(size=(k, 6))), {"m0": assets, "m1": assets})
    zoo = ModelZoo(("m0", "m1"), {"m0": d, "m1": d})
    return bundle, zoo


def test_validate_bundle_clean():
    bundle, zoo = _tiny_bundle()
    assert validate_bundle(bundle, zoo).ok


def test_validate_bundle_accuracy_count_mismatch():
    bundle, zoo = _tiny_bundle(accuracies=np.array([0.5, 0.5]))
    report = validate_bundle(bundle, zoo)
    assert any("class_accuracies" in v for v in report.violations)


def test_validate_bundle_accuracy_range():
    bundle, zoo = _tiny_bundle(accuracies=np.array([0.5, 1.2, 0.1]))
    report = validate_bundle(bundle, zoo)
    assert any("outside [0, 1]" in v for v in report.violations)


def test_validate_bundle_accepts_generator_output(small_universe):
    for bundle in small_universe.bundles:
        assert validate_bundle(bundle, small_universe.zoo).ok


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValidationError):
        ClassVocabulary(("a", "a"), dataset_id="x")


def test_zoo_needs_two_models():
    with pytest.raises(ValidationError):
        ModelZoo(("only",), {"only": 4})


def test_dense_matrix_is_immutable():
    m = DenseMatrix(np.ones((2, 2)))
    with pytest.raises(ValueError):
        m.data[0, 0] = 2.0
