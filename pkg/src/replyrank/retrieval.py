"""Rank candidate answers for a question.

Two scorers: the dual encoder (encoding the question once and reusing the
pool's precomputed answer embeddings) and a tf-idf term-weight sum
baseline.  Ties always break toward the lower candidate id so rankings
are reproducible.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Tokens
from .errors import (
    EmptyBank,
    EmptyCandidates,
    EmptySequence,
    ModelPoolMismatch,
)
from .model import (
    DualEncoderModel,
    embed_sentences,
    head_probabilities,
    sentence_embedding,
)
from .templates import TemplatePool

DUAL_ENCODER = "dual_encoder"
TFIDF = "tfidf"


@dataclass(frozen=True)
class RankingResult:
    question: Tokens
    ranked: tuple[tuple[int, float], ...]  # (candidate id, score), best first
    scorer: str

    def ids(self) -> list[int]:
        return [i for i, _ in self.ranked]


def _rank(ids: list[int], scores: list[float], question: Tokens,
          scorer: str) -> RankingResult:
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return RankingResult(
        question=tuple(question),
        ranked=tuple((ids[i], float(scores[i])) for i in order),
        scorer=scorer,
    )


def score_against_pool(
    q_tokens: Tokens, pool: TemplatePool, model: DualEncoderModel
) -> RankingResult:
    """Score every active template against the question.

    Encodes the question once and evaluates only the MLP head on the
    stored template embeddings, which matches the full forward pass to
    float precision.
    """
    if not q_tokens:
        raise EmptySequence("empty question")
    if pool.model_hash != model.digest():
        raise ModelPoolMismatch(
            f"pool built from {pool.model_hash[:12]}..., "
            f"model is {model.digest()[:12]}..."
        )
    active = pool.active()
    if not active:
        raise EmptyCandidates("pool has no active templates")
    q_vec = sentence_embedding(model, "question", q_tokens)
    a_mat = np.stack([t.embedding for t in active])
    probs = head_probabilities(
        model, np.repeat(q_vec[None, :], len(active), axis=0), a_mat
    )
    return _rank([t.id for t in active], probs.tolist(), q_tokens, DUAL_ENCODER)


def top_k(result: RankingResult, k: int) -> RankingResult:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return RankingResult(
        question=result.question, ranked=result.ranked[:k], scorer=result.scorer
    )


# -- tf-idf baseline -----------------------------------------------------------


@dataclass(frozen=True)
class TfidfIndex:
    n_docs: int
    idf: dict[str, float]
    weights: tuple[dict[str, float], ...]  # per candidate: token -> tf*idf
    candidate_ids: tuple[int, ...]


def tfidf_fit(candidates: list[Tokens],
              ids: list[int] | None = None) -> TfidfIndex:
    """Smoothed idf: ln((1+n)/(1+df)) + 1; weights are raw count * idf."""
    if not candidates:
        raise EmptyCandidates("no candidates to index")
    if ids is None:
        ids = list(range(len(candidates)))
    n = len(candidates)
    df: Counter[str] = Counter()
    for cand in candidates:
        df.update(set(cand))
    idf = {t: math.log((1 + n) / (1 + d)) + 1.0 for t, d in df.items()}
    weights = tuple(
        {t: tf * idf[t] for t, tf in Counter(cand).items()} for cand in candidates
    )
    return TfidfIndex(n_docs=n, idf=idf, weights=weights, candidate_ids=tuple(ids))


def tfidf_rank(q_tokens: Tokens, index: TfidfIndex) -> RankingResult:
    """Score = sum over distinct question tokens of the candidate's weight."""
    q_terms = set(q_tokens)
    scores = [
        sum(w.get(t, 0.0) for t in q_terms) for w in index.weights
    ]
    return _rank(list(index.candidate_ids), scores, q_tokens, TFIDF)


# -- embedding exploration -------------------------------------------------------


def nearest_neighbors(
    item: Tokens,
    side: str,
    bank: list[Tokens],
    model: DualEncoderModel,
    k: int = 5,
) -> list[tuple[Tokens, float]]:
    """Top-k bank texts by cosine similarity, excluding exact-text matches."""
    if not bank:
        raise EmptyBank("no texts to search")
    item = tuple(item)
    keep = [i for i, b in enumerate(bank) if tuple(b) != item]
    if not keep:
        raise EmptyBank("bank contains only exact matches of the item")
    vec = sentence_embedding(model, side, item)
    mat = embed_sentences(model, side, [tuple(bank[i]) for i in keep])
    denom = np.linalg.norm(mat, axis=1) * np.linalg.norm(vec)
    denom = np.where(denom == 0, 1e-12, denom)
    sims = (mat @ vec) / denom
    order = sorted(range(len(keep)), key=lambda i: (-sims[i], keep[i]))[:k]
    return [(tuple(bank[keep[i]]), float(sims[i])) for i in order]


# -- serialization ----------------------------------------------------------------


def ranking_to_json(result: RankingResult,
                    texts: dict[int, Tokens]) -> dict:
    return {
        "question": list(result.question),
        "scorer": result.scorer,
        "ranked": [
            {"id": cid, "score": score, "text": " ".join(texts.get(cid, ()))}
            for cid, score in result.ranked
        ],
    }
