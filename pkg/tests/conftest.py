import numpy as np
import pytest

from micropred.features import FeatureSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_feature_set(rng, n=8, d=5, extractor_id="test/rand"):
    ids = [f"s{i:03d}" for i in range(n)]
    return FeatureSet(ids, rng.standard_normal((n, d)), extractor_id)
