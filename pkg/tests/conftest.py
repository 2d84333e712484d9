import numpy as np
import pytest

from apps.corpus.synthetic import generate_synthetic_corpus
from apps.corpus.vocabulary import build_vocabulary
from apps.training.model import PlanGenModel
from factories import make_toy_sample, tiny_config


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic_corpus():
    return generate_synthetic_corpus(seed=11, n_samples=12)


@pytest.fixture(scope="session")
def vocab(synthetic_corpus):
    return build_vocabulary(list(synthetic_corpus) + [make_toy_sample()])


@pytest.fixture
def model(vocab):
    return PlanGenModel(tiny_config(), vocab)


@pytest.fixture
def toy_sample():
    return make_toy_sample()


@pytest.fixture
def toy_model(toy_sample):
    return PlanGenModel(tiny_config(hidden=4, embed=3), build_vocabulary([toy_sample]))
