import numpy as np
import pytest

from swab.synth import SynthConfig, generate_synthetic_universe


SMALL = SynthConfig(
    n_datasets=3,
    classes_per_dataset=5,
    n_models=6,
    dim=10,
    semantic_clusters=2,
    captions_per_class=6,
    synonyms_per_class=3,
)


@pytest.fixture(scope="session")
def small_universe():
    return generate_synthetic_universe(SMALL, seed=7)


@pytest.fixture()
def rng():
    return np.random.default_rng(123)
