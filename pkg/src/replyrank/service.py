"""HTTP service: recommendations, template listing, annotations, reports.

File-backed and desk-scale: the model and pool are read-only after
startup, annotation writes are serialized through the append-only store,
and the report endpoint recomputes from the full store on demand.  In
evaluation mode the server alternates the ranking engine per request and
keeps the engine identity out of the response, so annotation sessions
are blinded.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import itertools
import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .checkpoint import load_checkpoint
from .corpus import normalize_text
from .errors import ReplyRankError
from .evaluation import RelevanceAnnotation, relevance_report, report_to_doc
from .retrieval import (
    DUAL_ENCODER,
    TFIDF,
    RankingResult,
    score_against_pool,
    tfidf_fit,
    tfidf_rank,
    top_k,
)
from .store import AnnotationStore, DuplicateAnnotation, Journal
from .templates import load_pool

log = logging.getLogger(__name__)

SCORERS = (DUAL_ENCODER, TFIDF)


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8743
    checkpoint_path: str = ""
    pool_path: str = ""
    store_path: str = "annotations.jsonl"
    session_log_path: str = ""  # defaults to sessions.jsonl next to the store
    top_k_default: int = 3
    max_k: int = 50
    max_question_chars: int = 2000
    eval_mode: bool = False
    console_dir: str = ""
    eval_questions_path: str = ""

    def resolved_session_log(self) -> str:
        if self.session_log_path:
            return self.session_log_path
        return os.path.join(os.path.dirname(os.path.abspath(self.store_path)),
                            "sessions.jsonl")


def load_service_config(path: str | os.PathLike, **overrides) -> ServiceConfig:
    with open(path, encoding="utf-8") as fp:
        doc = json.load(fp)
    known = {f.name for f in dataclasses.fields(ServiceConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ServiceConfig(**doc)


class RecommendRequest(BaseModel):
    question: str = ""
    k: int | None = None
    scorer: str | None = None


class AnnotationRequest(BaseModel):
    qid: str
    tid: int
    score: int
    annotator: str
    rank: int | None = None


class ServiceState:
    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.model = None
        self.pool = None
        self.tfidf_index = None
        self.template_text = {}
        if cfg.checkpoint_path and cfg.pool_path:
            if os.path.exists(cfg.checkpoint_path) and os.path.exists(cfg.pool_path):
                self.model = load_checkpoint(cfg.checkpoint_path)
                self.pool = load_pool(cfg.pool_path)
                if self.pool.model_hash != self.model.digest():
                    raise ReplyRankError(
                        "pool.model_hash does not match the checkpoint digest"
                    )
                active = self.pool.active()
                self.tfidf_index = tfidf_fit(
                    [t.text for t in active], ids=[t.id for t in active]
                )
                self.template_text = {t.id: t.text for t in active}
            else:
                log.warning("model/pool files missing; serving in degraded mode")
        self.store = AnnotationStore(cfg.store_path)
        self.sessions = Journal(cfg.resolved_session_log())
        self.session_index: dict[str, dict] = {
            r["qid"]: r for r in self.sessions.records()
        }
        self._scorer_cycle = itertools.cycle(SCORERS)
        self._lock = threading.Lock()

    def loaded(self) -> bool:
        return self.model is not None and self.pool is not None

    def rank(self, tokens, scorer: str) -> RankingResult:
        if scorer == DUAL_ENCODER:
            return score_against_pool(tokens, self.pool, self.model)
        return tfidf_rank(tokens, self.tfidf_index)

    def next_scorer(self) -> str:
        with self._lock:
            return next(self._scorer_cycle)

    def record_session(self, qid: str, question: str, tokens, scorer: str,
                       result: RankingResult) -> None:
        record = {
            "qid": qid,
            "question": question,
            "tokens": list(tokens),
            "scorer": scorer,
            "ranked_ids": result.ids(),
            "ts": _utcnow(),
        }
        self.sessions.append(record)
        self.session_index[qid] = record


def _utcnow() -> str:
    return dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def create_app(cfg: ServiceConfig) -> FastAPI:
    state = ServiceState(cfg)
    app = FastAPI(title="replyrank", version="0.1.0")
    app.state.service = state

    @app.post("/v1/recommend")
    def recommend(body: RecommendRequest):
        if not state.loaded():
            raise HTTPException(status_code=503, detail="model not loaded")
        if len(body.question) > cfg.max_question_chars:
            raise HTTPException(status_code=400, detail="question too long")
        tokens = tuple(normalize_text(body.question))
        if not tokens:
            raise HTTPException(status_code=400, detail="empty question")
        k = body.k if body.k is not None else cfg.top_k_default
        if k < 1 or k > cfg.max_k:
            raise HTTPException(status_code=400, detail=f"k must be 1..{cfg.max_k}")
        if cfg.eval_mode:
            scorer = state.next_scorer()
        else:
            scorer = body.scorer or DUAL_ENCODER
            if scorer not in SCORERS:
                raise HTTPException(status_code=400, detail=f"unknown scorer {scorer!r}")
        result = top_k(state.rank(tokens, scorer), k)
        qid = uuid.uuid4().hex
        state.record_session(qid, body.question, tokens, scorer, result)
        return {
            "qid": qid,
            "ranked": [
                {
                    "id": cid,
                    "text": " ".join(state.template_text.get(cid, ())),
                    "score": score,
                }
                for cid, score in result.ranked
            ],
        }

    @app.get("/v1/templates")
    def templates():
        if not state.loaded():
            raise HTTPException(status_code=503, detail="model not loaded")
        return {
            "templates": [
                {"id": t.id, "text": " ".join(t.text), "cluster_size": t.cluster_size}
                for t in state.pool.active()
            ]
        }

    @app.post("/v1/annotations", status_code=201)
    def annotate(body: AnnotationRequest):
        session = state.session_index.get(body.qid)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown qid {body.qid!r}")
        if state.pool is not None and body.tid not in {
            t.id for t in state.pool.templates
        }:
            raise HTTPException(status_code=404, detail=f"unknown tid {body.tid}")
        if body.tid not in session["ranked_ids"]:
            raise HTTPException(
                status_code=404,
                detail=f"tid {body.tid} was not recommended for qid {body.qid!r}",
            )
        if body.score not in (1, 2, 3):
            raise HTTPException(status_code=422, detail="score must be 1, 2 or 3")
        rank = session["ranked_ids"].index(body.tid) + 1
        if rank > 3:
            raise HTTPException(
                status_code=422, detail="only the top 3 positions can be scored"
            )
        if body.rank is not None and body.rank != rank:
            raise HTTPException(
                status_code=422,
                detail=f"rank {body.rank} does not match recommended position {rank}",
            )
        if not body.annotator.strip():
            raise HTTPException(status_code=422, detail="annotator required")
        annotation = RelevanceAnnotation(
            question_id=body.qid,
            template_id=body.tid,
            rank=rank,
            score=body.score,
            annotator=body.annotator,
            scorer=session["scorer"],
            timestamp=_utcnow(),
        )
        try:
            state.store.append(annotation)
        except DuplicateAnnotation:
            raise HTTPException(
                status_code=409,
                detail="this (qid, tid, annotator) was already scored",
            )
        return {"recorded": True, "rank": rank}

    @app.get("/v1/report")
    def report():
        annotations = state.store.annotations()
        if not annotations:
            return JSONResponse(
                {"ranking": {}, "mrr_p_value": None, "relevance": {}}
            )
        return JSONResponse(report_to_doc(relevance_report(annotations)))

    if cfg.eval_questions_path:
        @app.get("/eval-questions.json")
        def eval_questions():
            if not os.path.exists(cfg.eval_questions_path):
                raise HTTPException(status_code=404, detail="no evaluation questions")
            return FileResponse(cfg.eval_questions_path, media_type="application/json")

    if cfg.console_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=cfg.console_dir, html=True),
                  name="console")

    return app


def run(cfg: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level="info")
