"""Session-scoped desk-scale pipeline shared by the acceptance suite.

Training the twenty-intent model takes about half a minute; everything
downstream (pool, ranking task) reuses it.  Hyperparameters here are the
desk-scale calibration: same pipeline shape as production defaults, with
learning rate and batch size sized for a corpus four orders of magnitude
smaller.
"""

import time

import numpy as np
import pytest

from replyrank.corpus import build_dataset
from replyrank.kmeans import KMeansConfig
from replyrank.model import ModelConfig
from replyrank.synthetic import generate_synthetic_corpus
from replyrank.templates import build_pool
from replyrank.training import TrainConfig, train

DESK_INTENTS = 20
DESK_TRANSCRIPTS = 2000

DESK_TRAIN = TrainConfig(learning_rate=0.0025, epochs=4, batch_size=16, seed=9)
DESK_MODEL = ModelConfig(
    embedding_dim=48,
    lstm_dim=48,
    mlp_layers=3,
    mlp_hidden=48,
    vocab_size=2000,
    seed=9,
)


@pytest.fixture(scope="session")
def desk_corpus():
    return generate_synthetic_corpus(DESK_INTENTS, DESK_TRANSCRIPTS, seed=7)


@pytest.fixture(scope="session")
def desk_split(desk_corpus):
    return build_dataset(desk_corpus, neg_ratio=2.0, dev_fraction=0.1, seed=8)


@pytest.fixture(scope="session")
def desk_trained(desk_split):
    start = time.perf_counter()
    model, metrics = train(desk_split, DESK_TRAIN, DESK_MODEL)
    seconds = time.perf_counter() - start
    return model, metrics, seconds


@pytest.fixture(scope="session")
def desk_model(desk_trained):
    return desk_trained[0]


@pytest.fixture(scope="session")
def desk_pool_200(desk_split, desk_model):
    """A 200-template pool over the training answers (the 400k/500 analog)."""
    answers = [p.answer for p in desk_split.train if p.label == 1]
    pool, result = build_pool(
        answers, desk_model,
        KMeansConfig(k=200, batch_size=1024, max_iters=200, seed=12),
    )
    return pool


@pytest.fixture(scope="session")
def heldout_positives(desk_model):
    """Fresh transcripts, never seen in training, for the ranking task."""
    corpus = generate_synthetic_corpus(DESK_INTENTS, 1300, seed=77)
    from replyrank.corpus import extract_positive_pairs

    positives = []
    for t in corpus:
        positives.extend(extract_positive_pairs(t))
    return positives
