"""Answer template pool: embed, cluster, pick representatives, curate.

A pool stores the representative answer texts with their precomputed
answer-encoder embeddings and the digest of the model that produced them,
so scoring can verify it is paired with the right checkpoint.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
from dataclasses import dataclass, replace

import numpy as np

from .corpus import Tokens
from .errors import CurationSyntaxError, EmptySequence, UnknownTemplateId
from .kmeans import KMeansConfig, KMeansResult, minibatch_kmeans
from .model import DualEncoderModel, embed_sentences, sentence_embedding

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Template:
    id: int
    text: Tokens
    embedding: np.ndarray
    cluster_size: int
    active: bool = True

    def __post_init__(self):
        if self.active and not self.text:
            raise ValueError(f"active template {self.id} has empty text")


@dataclass(frozen=True)
class TemplatePool:
    templates: tuple[Template, ...]
    model_hash: str
    k: int
    created: str = ""  # runtime metadata; not part of the pool file

    def __post_init__(self):
        ids = [t.id for t in self.templates]
        if len(set(ids)) != len(ids):
            raise ValueError("template ids must be unique")
        if not self.created:
            object.__setattr__(self, "created", _now())

    def active(self) -> list[Template]:
        return [t for t in self.templates if t.active]

    def by_id(self) -> dict[int, Template]:
        return {t.id: t for t in self.templates}


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def embed_answers(
    answers: list[Tokens], model: DualEncoderModel
) -> tuple[np.ndarray, list[int]]:
    """Answer-encoder embeddings, one row per non-empty answer, order kept.

    Returns (matrix, kept original indices); empty rows are dropped and
    logged rather than failing the batch.
    """
    kept = [i for i, a in enumerate(answers) if len(a) > 0]
    dropped = len(answers) - len(kept)
    if dropped:
        log.warning("embed_answers: dropped %d empty answers", dropped)
    if not kept:
        raise EmptySequence("no non-empty answers to embed")
    matrix = embed_sentences(model, "answer", [answers[i] for i in kept])
    return matrix, kept


def select_representatives(
    points: np.ndarray,
    texts: list[Tokens],
    centers: np.ndarray,
    assignments: np.ndarray,
) -> list[Template]:
    """Per non-empty cluster, the member closest to the center (lowest
    original index on ties); skipped empty clusters are logged."""
    if len(texts) != points.shape[0] or len(assignments) != points.shape[0]:
        raise ValueError("points, texts and assignments must align")
    templates: list[Template] = []
    for c in range(centers.shape[0]):
        members = np.flatnonzero(assignments == c)
        if members.size == 0:
            log.warning("cluster %d is empty; skipped", c)
            continue
        d = ((points[members] - centers[c]) ** 2).sum(axis=1)
        # argmin returns the first (lowest original index) among ties.
        best = int(members[int(np.argmin(d))])
        templates.append(
            Template(
                id=c,
                text=tuple(texts[best]),
                embedding=np.asarray(points[best], dtype=np.float32).copy(),
                cluster_size=int(members.size),
            )
        )
    return templates


def build_pool(
    answers: list[Tokens],
    model: DualEncoderModel,
    cfg: KMeansConfig,
) -> tuple[TemplatePool, KMeansResult]:
    """Embed answers, cluster them, and pick one representative per cluster."""
    matrix, kept = embed_answers(answers, model)
    result = minibatch_kmeans(matrix, cfg)
    templates = select_representatives(
        matrix, [answers[i] for i in kept], result.centers, result.assignments
    )
    pool = TemplatePool(
        templates=tuple(templates),
        model_hash=model.digest(),
        k=cfg.k,
    )
    return pool, result


# -- curation -----------------------------------------------------------------


@dataclass(frozen=True)
class CurationDecision:
    action: str  # keep | drop | edit
    template_id: int
    new_text: str | None = None


def parse_curation_file(text: str) -> list[CurationDecision]:
    """Line format: ``keep <id>``, ``drop <id>``, ``edit <id>\\t<new text>``;
    ``#`` starts a comment."""
    decisions: list[CurationDecision] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        action, _, rest = line.partition(" ")
        if action in ("keep", "drop"):
            try:
                decisions.append(CurationDecision(action, int(rest.strip())))
            except ValueError as exc:
                raise CurationSyntaxError(f"line {lineno}: bad id {rest!r}") from exc
        elif action == "edit":
            ident, sep, new_text = rest.partition("\t")
            if not sep or not new_text.strip():
                raise CurationSyntaxError(
                    f"line {lineno}: edit needs '<id><TAB><new text>'"
                )
            try:
                decisions.append(
                    CurationDecision("edit", int(ident.strip()), new_text.strip())
                )
            except ValueError as exc:
                raise CurationSyntaxError(f"line {lineno}: bad id {ident!r}") from exc
        else:
            raise CurationSyntaxError(f"line {lineno}: unknown action {action!r}")
    return decisions


def curate(
    pool: TemplatePool,
    decisions: list[CurationDecision],
    model: DualEncoderModel | None = None,
) -> TemplatePool:
    """Apply keep/drop/edit decisions; edited texts are re-embedded.

    Templates not mentioned keep their state.  Edits require the pool's
    model so the stored embedding stays consistent with the text.
    """
    from .corpus import normalize_text

    by_id = {t.id: t for t in pool.templates}
    for d in decisions:
        if d.template_id not in by_id:
            raise UnknownTemplateId(f"no template with id {d.template_id}")
        t = by_id[d.template_id]
        if d.action == "keep":
            by_id[d.template_id] = replace(t, active=True)
        elif d.action == "drop":
            by_id[d.template_id] = replace(t, active=False)
        elif d.action == "edit":
            if model is None:
                raise ValueError("curate: edits require the pool's model")
            if model.digest() != pool.model_hash:
                raise ValueError("curate: model does not match pool.model_hash")
            tokens = tuple(normalize_text(d.new_text or ""))
            if not tokens:
                raise CurationSyntaxError(
                    f"edit of template {d.template_id} produced empty text"
                )
            embedding = sentence_embedding(model, "answer", tokens).astype(np.float32)
            by_id[d.template_id] = replace(
                t, text=tokens, embedding=embedding, active=True
            )
    new_pool = TemplatePool(
        templates=tuple(by_id[t.id] for t in pool.templates),
        model_hash=pool.model_hash,
        k=pool.k,
    )
    log.info("curation: %d active of %d templates",
             len(new_pool.active()), len(new_pool.templates))
    return new_pool


# -- pool file ------------------------------------------------------------------


def pool_to_json(pool: TemplatePool) -> str:
    record = {
        "model_hash": pool.model_hash,
        "k": pool.k,
        "templates": [
            {
                "id": t.id,
                "text": " ".join(t.text),
                "cluster_size": t.cluster_size,
                "active": t.active,
                "embedding": [float(x) for x in t.embedding],
            }
            for t in pool.templates
        ],
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def pool_from_json(text: str) -> TemplatePool:
    record = json.loads(text)
    templates = tuple(
        Template(
            id=int(t["id"]),
            text=tuple(t["text"].split()),
            embedding=np.asarray(t["embedding"], dtype=np.float32),
            cluster_size=int(t["cluster_size"]),
            active=bool(t["active"]),
        )
        for t in record["templates"]
    )
    return TemplatePool(
        templates=templates, model_hash=record["model_hash"], k=int(record["k"])
    )


def save_pool(pool: TemplatePool, path: str | os.PathLike) -> None:
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fp:
        fp.write(pool_to_json(pool))
        fp.flush()
        os.fsync(fp.fileno())
    os.replace(tmp, path)


def load_pool(path: str | os.PathLike) -> TemplatePool:
    with open(path, encoding="utf-8") as fp:
        return pool_from_json(fp.read())
