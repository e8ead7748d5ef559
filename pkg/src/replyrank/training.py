"""Mini-batch training of the dual encoder on labeled question/answer pairs."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .corpus import DatasetSplit, QAPair, label_ratio
from .errors import EmptyDataset, NonFiniteValue
from .model import DualEncoderModel, ModelConfig, Vocabulary, match_probabilities
from .optim import adam_step, clip_global_norm, init_adam

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0002
    epochs: int = 4
    batch_size: int = 256
    seed: int = 0
    clip_norm: float = 5.0
    dev_eval_every: int = 0  # batches; 0 = evaluate at epoch end only

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    dev_accuracy: float | None


def _to_ids(model: DualEncoderModel, pairs: Sequence[QAPair]):
    qs = [model.ids(p.question) for p in pairs]
    ans = [model.ids(p.answer) for p in pairs]
    labels = np.array([p.label for p in pairs], dtype=model.dtype)
    return qs, ans, labels


def score_pairs(model: DualEncoderModel, pairs: Sequence[QAPair],
                batch_size: int = 512) -> np.ndarray:
    """Match probabilities for labeled pairs, batched; shape (n,)."""
    if not pairs:
        raise EmptyDataset("no pairs to score")
    qs, ans, _ = _to_ids(model, pairs)
    out = np.empty(len(pairs), dtype=np.float64)
    with T.no_grad():
        for start in range(0, len(pairs), batch_size):
            p = match_probabilities(
                model, qs[start : start + batch_size], ans[start : start + batch_size]
            )
            out[start : start + p.shape[0]] = p.data[:, 0]
    return out


def dev_accuracy(model: DualEncoderModel, pairs: Sequence[QAPair]) -> float:
    """Fraction of pairs classified correctly at threshold 0.5 (ties -> 1)."""
    if not pairs:
        raise EmptyDataset("no dev pairs")
    probs = score_pairs(model, pairs)
    labels = np.array([p.label for p in pairs])
    preds = (probs >= 0.5).astype(int)
    return float((preds == labels).mean())


def train(
    data: DatasetSplit,
    cfg: TrainConfig = TrainConfig(),
    model_cfg: ModelConfig = ModelConfig(),
) -> tuple[DualEncoderModel, list[EpochMetrics]]:
    """Train a fresh model; returns it with per-epoch loss/dev-accuracy."""
    cfg.validate()
    pairs = list(data.train)
    if not pairs:
        raise EmptyDataset("training split is empty")
    ratio = label_ratio(pairs)
    if not np.isfinite(ratio) or abs(ratio - 2.0) > 0.1:
        warnings.warn(
            f"training negative:positive ratio is {ratio:.2f}; expected about 2",
            stacklevel=2,
        )

    vocab = Vocabulary.build(
        [p.question for p in pairs] + [p.answer for p in pairs],
        max_size=model_cfg.vocab_size,
    )
    model = DualEncoderModel(vocab, model_cfg)
    params = model.parameters()
    state = init_adam(params, learning_rate=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)

    qs, ans, labels = _to_ids(model, pairs)
    metrics: list[EpochMetrics] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        total_loss = 0.0
        batches = 0
        for start in range(0, len(pairs), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            bq = [qs[i] for i in idx]
            ba = [ans[i] for i in idx]
            by = labels[idx].reshape(-1, 1)
            probs = match_probabilities(model, bq, ba)
            loss = T.bce_loss(probs, by)
            if T.has_nonfinite(loss):
                raise NonFiniteValue(f"loss became non-finite in epoch {epoch}")
            model.zero_grads()
            T.backward(loss)
            grads = [
                p.grad if p.grad is not None else np.zeros_like(p.data)
                for p in params
            ]
            if any(T.has_nonfinite(g) for g in grads):
                raise NonFiniteValue(f"gradient became non-finite in epoch {epoch}")
            clip_global_norm(grads, cfg.clip_norm)
            adam_step(params, grads, state)
            total_loss += loss.item() * len(idx)
            batches += 1
            if cfg.dev_eval_every and batches % cfg.dev_eval_every == 0 and data.dev:
                log.info(
                    "epoch %d batch %d dev_accuracy=%.4f",
                    epoch, batches, dev_accuracy(model, data.dev),
                )
        if any(T.has_nonfinite(p.data) for p in params):
            raise NonFiniteValue(f"parameters became non-finite in epoch {epoch}")
        acc = dev_accuracy(model, data.dev) if data.dev else None
        metrics.append(
            EpochMetrics(
                epoch=epoch,
                train_loss=total_loss / len(pairs),
                dev_accuracy=acc,
            )
        )
        log.info(
            "epoch %d train_loss=%.4f dev_accuracy=%s",
            epoch, metrics[-1].train_loss,
            "n/a" if acc is None else f"{acc:.4f}",
        )
    return model, metrics
