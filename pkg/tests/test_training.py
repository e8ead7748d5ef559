import numpy as np
import pytest

from helpers import make_split, quick_train, tiny_config
from replyrank.corpus import DatasetSplit
from replyrank.errors import EmptyDataset
from replyrank.checkpoint import model_to_bytes
from replyrank.training import TrainConfig, dev_accuracy, score_pairs, train


def test_smoke_train_reduces_loss():
    split = make_split(n_intents=4, n_transcripts=40, seed=1)
    model, metrics = quick_train(split, dim=12, epochs=2, seed=2)
    assert metrics[-1].train_loss < metrics[0].train_loss
    assert metrics[-1].dev_accuracy is not None


def test_fixed_batch_loss_decreases_monotonically():
    # Optimizer wiring sanity: full-batch steps on one fixed 50-sample
    # batch at the default learning rate must make steady progress.
    split = make_split(n_intents=5, n_transcripts=60, seed=3)
    fixed = DatasetSplit(
        train=split.train[:50], dev=(), seed=0, neg_ratio=split.neg_ratio
    )
    cfg = TrainConfig(learning_rate=0.0002, epochs=14, batch_size=50, seed=4)
    with pytest.warns(UserWarning):
        _, metrics = train(fixed, cfg, tiny_config(dim=16, seed=4))
    losses = [m.train_loss for m in metrics]
    streak = best = 0
    for prev, cur in zip(losses, losses[1:]):
        streak = streak + 1 if cur < prev else 0
        best = max(best, streak)
    assert best >= 10, losses


def test_training_is_deterministic_under_seed():
    split = make_split(n_intents=4, n_transcripts=40, seed=5)
    m1, k1 = quick_train(split, dim=12, epochs=1, seed=6)
    m2, k2 = quick_train(split, dim=12, epochs=1, seed=6)
    assert model_to_bytes(m1) == model_to_bytes(m2)
    assert k1 == k2


def test_warns_when_ratio_is_not_one_to_two():
    split = make_split(n_intents=4, n_transcripts=40, seed=7, ratio=1.0)
    with pytest.warns(UserWarning, match="ratio"):
        quick_train(split, dim=8, epochs=1, seed=8)


def test_untrained_tied_model_scores_one_third_on_one_to_two():
    split = make_split(n_intents=4, n_transcripts=60, seed=9)
    model, _ = quick_train(split, dim=8, epochs=1, seed=10)
    w, b = model.mlp[-1]
    w.data[...] = 0.0
    b.data[...] = 0.0  # every probability is exactly 0.5; ties predict 1
    pairs = split.dev
    acc = dev_accuracy(model, pairs)
    positives = sum(1 for p in pairs if p.label == 1)
    assert acc == pytest.approx(positives / len(pairs))
    assert acc == pytest.approx(1 / 3, abs=0.05)


def test_perfect_scorer_reaches_one(monkeypatch):
    split = make_split(n_intents=4, n_transcripts=40, seed=11)
    model, _ = quick_train(split, dim=8, epochs=1, seed=12)
    import replyrank.training as train_mod

    def oracle(model_, pairs, batch_size=512):
        return np.array([float(p.label) for p in pairs])

    monkeypatch.setattr(train_mod, "score_pairs", oracle)
    assert dev_accuracy(model, split.dev) == 1.0


def test_empty_dataset_rejected():
    empty = DatasetSplit(train=(), dev=(), seed=0, neg_ratio=2.0)
    with pytest.raises(EmptyDataset):
        train(empty, TrainConfig(epochs=1), tiny_config())
    with pytest.raises(EmptyDataset):
        dev_accuracy(None, [])


def test_score_pairs_matches_forward():
    from replyrank.model import forward

    split = make_split(n_intents=4, n_transcripts=40, seed=13)
    model, _ = quick_train(split, dim=12, epochs=1, seed=14)
    pairs = split.dev[:7]
    probs = score_pairs(model, pairs)
    for pair, prob in zip(pairs, probs):
        assert abs(prob - forward(pair.question, pair.answer, model)) < 1e-5
