import pytest

from llambert.corpus import Corpus, Document
from llambert.synth import make_synthetic_corpus


@pytest.fixture
def tiny_corpus():
    docs = [
        Document("d1", "an absolutely wonderful film", "train", "positive"),
        Document("d2", "a dreadful waste of time", "train", "negative"),
        Document("d3", "glorious and moving", "test", "positive"),
        Document("d4", "tedious and flat", "test", "negative"),
        Document("d5", "unlabeled extra review", "extra"),
    ]
    return Corpus("imdb", ("negative", "positive"), docs)


@pytest.fixture(scope="session")
def desk_corpus():
    # 5000 extra + 2000 gold train + 2000 test, the desk-scale experiment corpus
    return make_synthetic_corpus(n_train=2000, n_test=2000, n_extra=5000, seed=20240301)


@pytest.fixture(scope="session")
def small_synth():
    return make_synthetic_corpus(n_train=200, n_test=200, n_extra=200, seed=11)
