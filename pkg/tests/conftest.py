import numpy as np
import pytest

from asa.features import FeatureStore, extract_corpus, rule_backends
from asa.synthetic import generate_synthetic_corpus


@pytest.fixture(scope="session")
def backends():
    return rule_backends()


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """2 question sets x 6 responses, fixed seed. Returns the manifest path."""
    root = tmp_path_factory.mktemp("small-corpus")
    return generate_synthetic_corpus(root, n_sets=2, n_per_set=6, seed=3)


@pytest.fixture(scope="session")
def small_store(small_corpus, tmp_path_factory):
    """Extracted features for the small corpus."""
    out = tmp_path_factory.mktemp("small-features")
    report = extract_corpus(small_corpus, out)
    assert not report.errors, report.errors
    return FeatureStore(out)


@pytest.fixture(scope="session")
def full_corpus(tmp_path_factory):
    """The default 4 x 10 generator corpus used by the pipeline-level tests."""
    root = tmp_path_factory.mktemp("full-corpus")
    return generate_synthetic_corpus(root, n_sets=4, n_per_set=10, seed=0)


@pytest.fixture(scope="session")
def full_store(full_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("full-features")
    report = extract_corpus(full_corpus, out)
    assert not report.errors, report.errors
    return FeatureStore(out)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
