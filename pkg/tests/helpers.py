"""Shared builders for desk-scale models and datasets in tests."""

from __future__ import annotations

import numpy as np

from replyrank.corpus import DatasetSplit, build_dataset
from replyrank.model import DualEncoderModel, ModelConfig, Vocabulary
from replyrank.synthetic import generate_synthetic_corpus
from replyrank.training import TrainConfig, train


def make_split(n_intents=8, n_transcripts=120, seed=0, ratio=2.0,
               dev_fraction=0.15) -> DatasetSplit:
    corpus = generate_synthetic_corpus(n_intents, n_transcripts, seed)
    return build_dataset(corpus, neg_ratio=ratio, dev_fraction=dev_fraction,
                         seed=seed + 1)


def tiny_config(dim=8, vocab_size=2000, seed=0, mlp_hidden=None,
                mlp_layers=3) -> ModelConfig:
    return ModelConfig(
        embedding_dim=dim,
        lstm_dim=dim,
        mlp_layers=mlp_layers,
        mlp_hidden=mlp_hidden if mlp_hidden is not None else dim,
        vocab_size=vocab_size,
        seq_cap=60,
        seed=seed,
    )


def tiny_vocab(n_tokens=18) -> Vocabulary:
    # n_tokens real words; ids 0/1 stay reserved.
    words = [f"w{i}" for i in range(n_tokens)]
    return Vocabulary.build([tuple(words)], max_size=n_tokens)


def tiny_model(dim=8, n_tokens=18, seed=0, dtype=np.float32) -> DualEncoderModel:
    return DualEncoderModel(tiny_vocab(n_tokens), tiny_config(dim=dim, seed=seed),
                            dtype=dtype)


def quick_train(split: DatasetSplit, dim=24, epochs=2, seed=0,
                batch_size=64, lr=0.003):
    cfg = TrainConfig(learning_rate=lr, epochs=epochs, batch_size=batch_size,
                      seed=seed)
    return train(split, cfg, tiny_config(dim=dim, seed=seed))
