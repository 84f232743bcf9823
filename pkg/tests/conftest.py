"""Shared builders for small end-to-end test setups."""

import numpy as np
import pytest

from convaffect.embed import FeatureStore, build_vocab, load_word_vectors
from convaffect.model import ModelParams
from convaffect.seeding import INIT, derive_rng
from convaffect.synthetic import generate_corpus


def make_setup(
    seed=4,
    n_train=4,
    n_val=2,
    n_utterances=3,
    hidden=6,
    embed_dim=8,
    word_feature_dim=4,
    utterance_feature_dim=5,
):
    """Tiny corpus + degraded-mode store + freshly initialized model."""
    splits = generate_corpus(seed, n_train=n_train, n_val=n_val, n_utterances=n_utterances)
    vocab = build_vocab(splits["train"])
    table = load_word_vectors(None, vocab, dim=embed_dim, seed=seed)
    store = FeatureStore(word_dim=word_feature_dim, utt_dim=utterance_feature_dim)
    params = ModelParams.init(
        embedding=table,
        word_feature_dim=word_feature_dim,
        utterance_feature_dim=utterance_feature_dim,
        hidden=hidden,
        rng=derive_rng(seed, INIT),
    )
    return splits, store, params


@pytest.fixture
def tiny_setup():
    return make_setup()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
