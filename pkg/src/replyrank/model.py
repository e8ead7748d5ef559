"""Dual LSTM encoder with an MLP match-probability head.

Question and answer sides have independent embedding tables and LSTM
parameters; the two sentence embeddings are concatenated and passed
through a small ReLU MLP ending in a scalar sigmoid.  All parameters are
autodiff tensors so the training loop can backpropagate through the full
recurrence.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import tensor as T
from .corpus import Tokens
from .errors import EmptySequence, ShapeMismatch
from .tensor import Tensor

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"


@dataclass(frozen=True)
class Vocabulary:
    """Token ids built from the training split; 0 and 1 are reserved."""

    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(repr=False, hash=False, compare=False)

    @classmethod
    def build(cls, sequences: Iterable[Tokens], max_size: int) -> "Vocabulary":
        counts: Counter[str] = Counter()
        for seq in sequences:
            counts.update(seq)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        kept = [tok for tok, _ in ranked[:max_size]]
        id_to_token = (PAD_TOKEN, UNK_TOKEN, *kept)
        return cls.from_tokens(id_to_token)

    @classmethod
    def from_tokens(cls, id_to_token: Sequence[str]) -> "Vocabulary":
        id_to_token = tuple(id_to_token)
        if id_to_token[:2] != (PAD_TOKEN, UNK_TOKEN):
            raise ValueError("vocabulary must reserve ids 0/1 for pad/unk")
        return cls(
            id_to_token=id_to_token,
            token_to_id={tok: i for i, tok in enumerate(id_to_token)},
        )

    def __len__(self) -> int:
        return len(self.id_to_token)

    def ids(self, tokens: Sequence[str], cap: int | None = None) -> np.ndarray:
        """Map tokens to ids (unknowns -> UNK), keeping the trailing ``cap``."""
        out = np.array(
            [self.token_to_id.get(t, UNK_ID) for t in tokens], dtype=np.int64
        )
        if cap is not None and out.size > cap:
            out = out[-cap:]
        return out


@dataclass
class LstmParams:
    """Gate weights: input-to-hidden (H x I), hidden-to-hidden (H x H), bias (H)."""

    w_input: Tensor
    u_input: Tensor
    b_input: Tensor
    w_forget: Tensor
    u_forget: Tensor
    b_forget: Tensor
    w_output: Tensor
    u_output: Tensor
    b_output: Tensor
    w_cand: Tensor
    u_cand: Tensor
    b_cand: Tensor
    hidden_dim: int

    def parameters(self) -> list[Tensor]:
        return [
            self.w_input, self.u_input, self.b_input,
            self.w_forget, self.u_forget, self.b_forget,
            self.w_output, self.u_output, self.b_output,
            self.w_cand, self.u_cand, self.b_cand,
        ]

    FIELD_NAMES = (
        "w_input", "u_input", "b_input",
        "w_forget", "u_forget", "b_forget",
        "w_output", "u_output", "b_output",
        "w_cand", "u_cand", "b_cand",
    )


@dataclass(frozen=True)
class ModelConfig:
    embedding_dim: int = 512
    lstm_dim: int = 512
    mlp_layers: int = 3
    mlp_hidden: int = 512
    vocab_size: int = 20000
    share_embeddings: bool = False
    seq_cap: int = 60
    seed: int = 0

    def validate(self) -> None:
        if min(self.embedding_dim, self.lstm_dim, self.mlp_hidden) < 1:
            raise ValueError("model dimensions must be positive")
        if self.mlp_layers < 1:
            raise ValueError("need at least one MLP layer")
        if self.seq_cap < 1:
            raise ValueError("sequence cap must be positive")


def _init_lstm(rng: np.random.Generator, input_dim: int, hidden_dim: int,
               dtype) -> LstmParams:
    def mat(rows, cols):
        return Tensor(rng.uniform(-0.08, 0.08, size=(rows, cols)).astype(dtype))

    def bias(fill=0.0):
        return Tensor(np.full(hidden_dim, fill, dtype=dtype))

    return LstmParams(
        w_input=mat(hidden_dim, input_dim), u_input=mat(hidden_dim, hidden_dim),
        b_input=bias(),
        w_forget=mat(hidden_dim, input_dim), u_forget=mat(hidden_dim, hidden_dim),
        # +1 forget bias keeps early cell-state gradients alive.
        b_forget=bias(1.0),
        w_output=mat(hidden_dim, input_dim), u_output=mat(hidden_dim, hidden_dim),
        b_output=bias(),
        w_cand=mat(hidden_dim, input_dim), u_cand=mat(hidden_dim, hidden_dim),
        b_cand=bias(),
        hidden_dim=hidden_dim,
    )


class DualEncoderModel:
    """Trained scorer: p(question, answer match)."""

    def __init__(self, vocab: Vocabulary, config: ModelConfig,
                 dtype=np.float32, _init: bool = True):
        config.validate()
        self.vocab = vocab
        self.config = config
        self.dtype = np.dtype(dtype)
        if not _init:
            return
        rng = np.random.default_rng(config.seed)
        v, d, h = len(vocab), config.embedding_dim, config.lstm_dim
        self.q_emb = Tensor(rng.uniform(-0.08, 0.08, size=(v, d)).astype(dtype))
        if config.share_embeddings:
            self.a_emb = self.q_emb
        else:
            self.a_emb = Tensor(rng.uniform(-0.08, 0.08, size=(v, d)).astype(dtype))
        self.q_lstm = _init_lstm(rng, d, h, dtype)
        self.a_lstm = _init_lstm(rng, d, h, dtype)
        self.mlp: list[tuple[Tensor, Tensor]] = []
        in_dim = 2 * h
        for layer in range(config.mlp_layers):
            out_dim = 1 if layer == config.mlp_layers - 1 else config.mlp_hidden
            # He init, matching the ReLU hidden layers.
            std = np.sqrt(2.0 / in_dim)
            w = Tensor((rng.standard_normal((in_dim, out_dim)) * std).astype(dtype))
            b = Tensor(np.zeros(out_dim, dtype=dtype))
            self.mlp.append((w, b))
            in_dim = out_dim

    # -- parameter bookkeeping ------------------------------------------------

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        named: list[tuple[str, Tensor]] = [("q_emb", self.q_emb)]
        if not self.config.share_embeddings:
            named.append(("a_emb", self.a_emb))
        for prefix, lstm in (("q_lstm", self.q_lstm), ("a_lstm", self.a_lstm)):
            for fname in LstmParams.FIELD_NAMES:
                named.append((f"{prefix}.{fname}", getattr(lstm, fname)))
        for i, (w, b) in enumerate(self.mlp):
            named.append((f"mlp.{i}.w", w))
            named.append((f"mlp.{i}.b", b))
        return named

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grads(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        return self.vocab.ids(tokens, cap=self.config.seq_cap)

    def digest(self) -> str:
        """Content digest; cached, as models are immutable once trained."""
        cached = getattr(self, "_digest", None)
        if cached is None:
            from .checkpoint import model_digest

            cached = self._digest = model_digest(self)
        return cached


# -- sequence batching --------------------------------------------------------


def pad_batch(seqs: Sequence[np.ndarray], dtype=np.float32) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad id sequences to a (B, T) matrix plus a real-token mask."""
    if not seqs:
        raise EmptySequence("no sequences in batch")
    if any(len(s) == 0 for s in seqs):
        raise EmptySequence("empty token sequence")
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=dtype)
    for row, seq in enumerate(seqs):
        ids[row, : len(seq)] = seq
        mask[row, : len(seq)] = 1
    return ids, mask


def lstm_step(x: Tensor, h: Tensor, c: Tensor, p: LstmParams,
              trans: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
    """One LSTM cell update for a (B, D) input slice."""
    def gate(w_name, u_name, b):
        return T.add(T.add(T.matmul(x, trans[w_name]), T.matmul(h, trans[u_name])), b)

    i_g = T.sigmoid(gate("w_input", "u_input", p.b_input))
    f_g = T.sigmoid(gate("w_forget", "u_forget", p.b_forget))
    o_g = T.sigmoid(gate("w_output", "u_output", p.b_output))
    cand = T.tanh(gate("w_cand", "u_cand", p.b_cand))
    c_new = T.add(T.mul(f_g, c), T.mul(i_g, cand))
    h_new = T.mul(o_g, T.tanh(c_new))
    return h_new, c_new


def _transposed_weights(p: LstmParams) -> dict[str, Tensor]:
    # One transpose node per weight, shared by every timestep.
    return {
        name: T.transpose(getattr(p, name))
        for name in LstmParams.FIELD_NAMES
        if name.startswith(("w_", "u_"))
    }


def encode_ids(ids: np.ndarray, mask: np.ndarray, emb: Tensor,
               p: LstmParams) -> Tensor:
    """Run the recurrence over a padded (B, T) id matrix; returns h_T (B, H).

    Padded positions freeze both the hidden and cell state, so each row's
    output is the hidden state at its last real token.
    """
    if ids.ndim != 2:
        raise ShapeMismatch(f"expected (batch, time) ids, got {ids.shape}")
    batch, width = ids.shape
    if width == 0:
        raise EmptySequence("zero-length batch")
    dtype = emb.dtype
    h = Tensor(np.zeros((batch, p.hidden_dim), dtype=dtype))
    c = Tensor(np.zeros((batch, p.hidden_dim), dtype=dtype))
    trans = _transposed_weights(p)
    full = bool(mask.all())
    for t in range(width):
        x = T.gather(emb, ids[:, t])
        h_new, c_new = lstm_step(x, h, c, p, trans)
        if full:
            h, c = h_new, c_new
            continue
        m = Tensor(mask[:, t : t + 1].astype(dtype))
        keep = Tensor(1.0 - mask[:, t : t + 1].astype(dtype))
        h = T.add(T.mul(m, h_new), T.mul(keep, h))
        c = T.add(T.mul(m, c_new), T.mul(keep, c))
    return h


def lstm_encode(token_ids: np.ndarray, emb: Tensor, p: LstmParams) -> Tensor:
    """Encode one id sequence; returns the final hidden state as (1, H)."""
    token_ids = np.asarray(token_ids, dtype=np.int64)
    if token_ids.size == 0:
        raise EmptySequence("cannot encode an empty sequence")
    if token_ids.max(initial=0) >= emb.shape[0]:
        raise ShapeMismatch("token id outside embedding table")
    ids = token_ids.reshape(1, -1)
    mask = np.ones_like(ids, dtype=emb.dtype)
    return encode_ids(ids, mask, emb, p)


def mlp_head(features: Tensor, model: DualEncoderModel) -> Tensor:
    """ReLU MLP over (B, 2H) features; final layer is a scalar sigmoid."""
    x = features
    last = len(model.mlp) - 1
    for i, (w, b) in enumerate(model.mlp):
        x = T.add(T.matmul(x, w), b)
        if i != last:
            x = T.relu(x)
    return T.sigmoid(x)


def match_probabilities(model: DualEncoderModel, q_seqs: Sequence[np.ndarray],
                        a_seqs: Sequence[np.ndarray]) -> Tensor:
    """Batched match probabilities, differentiable; shape (B, 1)."""
    if len(q_seqs) != len(a_seqs):
        raise ShapeMismatch("question/answer batch size mismatch")
    q_ids, q_mask = pad_batch(q_seqs, dtype=model.dtype)
    a_ids, a_mask = pad_batch(a_seqs, dtype=model.dtype)
    q_h = encode_ids(q_ids, q_mask, model.q_emb, model.q_lstm)
    a_h = encode_ids(a_ids, a_mask, model.a_emb, model.a_lstm)
    return mlp_head(T.concat([q_h, a_h], axis=1), model)


def forward(q_tokens: Tokens, a_tokens: Tokens, model: DualEncoderModel) -> float:
    """Match probability for a single tokenized (question, answer) pair."""
    if not q_tokens or not a_tokens:
        raise EmptySequence("question and answer must be non-empty")
    with T.no_grad():
        p = match_probabilities(model, [model.ids(q_tokens)], [model.ids(a_tokens)])
    return float(p.data[0, 0])


def sentence_embedding(model: DualEncoderModel, side: str, tokens: Tokens) -> np.ndarray:
    """Encoder output for one sentence; side is "question" or "answer"."""
    emb, lstm = _side(model, side)
    if not tokens:
        raise EmptySequence("cannot embed an empty sentence")
    with T.no_grad():
        h = lstm_encode(model.ids(tokens), emb, lstm)
    return h.data[0].copy()


def embed_sentences(model: DualEncoderModel, side: str,
                    sentences: Sequence[Tokens], batch_size: int = 512) -> np.ndarray:
    """Encode many sentences (all non-empty); returns (n, H) float array."""
    emb, lstm = _side(model, side)
    rows: list[np.ndarray] = []
    with T.no_grad():
        for start in range(0, len(sentences), batch_size):
            chunk = sentences[start : start + batch_size]
            seqs = [model.ids(s) for s in chunk]
            ids, mask = pad_batch(seqs, dtype=model.dtype)
            rows.append(encode_ids(ids, mask, emb, lstm).data)
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, model.config.lstm_dim))


def head_probabilities(model: DualEncoderModel, q_vecs: np.ndarray,
                       a_vecs: np.ndarray) -> np.ndarray:
    """MLP head over precomputed sentence embeddings; shape (B,)."""
    if q_vecs.shape[0] != a_vecs.shape[0]:
        raise ShapeMismatch(f"head: {q_vecs.shape} vs {a_vecs.shape}")
    with T.no_grad():
        feats = np.concatenate(
            [q_vecs.astype(model.dtype), a_vecs.astype(model.dtype)], axis=1
        )
        p = mlp_head(Tensor(feats), model)
    return p.data[:, 0].copy()


def _side(model: DualEncoderModel, side: str) -> tuple[Tensor, LstmParams]:
    if side == "question":
        return model.q_emb, model.q_lstm
    if side == "answer":
        return model.a_emb, model.a_lstm
    raise ValueError(f"side must be 'question' or 'answer', got {side!r}")
