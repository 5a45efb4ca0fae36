import numpy as np
import pytest

from whittle.dataset import SynthConfig, synthesize_dataset
from whittle.indexing import build_context, train_models
from whittle.ranker import TrainConfig


@pytest.fixture(scope="session")
def small_manifest():
    """Tiny noiseless dataset for fast unit tests."""
    return synthesize_dataset(
        SynthConfig(
            n_images=120, dim=6, n_attributes=3, n_classes=4,
            pairs_per_attribute=150, noise_sd=0.0, seed=7,
        )
    )


@pytest.fixture(scope="session")
def small_ctx(small_manifest):
    return build_context(small_manifest, train_models(small_manifest, TrainConfig(seed=7)))


@pytest.fixture(scope="session")
def bench_manifest():
    """The standard desk-scale benchmark: N=2000, d=10, M=6, 500 pairs/attr."""
    return synthesize_dataset(
        SynthConfig(
            n_images=2000, dim=10, n_attributes=6, n_classes=10,
            pairs_per_attribute=500, noise_sd=0.0, seed=11,
        )
    )


@pytest.fixture(scope="session")
def bench_ctx(bench_manifest):
    return build_context(bench_manifest, train_models(bench_manifest, TrainConfig(seed=11)))


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
