"""Ranking-task evaluation and human relevance aggregation.

The ranking task pairs each sampled question with its true agent response
plus nine distractor answers; scorers are compared by mean reciprocal rank
and precision@3 with a paired bootstrap over per-item reciprocal ranks.
Human judgments (1=irrelevant, 2=somewhat, 3=very relevant) aggregate into
means with normal-approximation 95% confidence intervals.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import QAPair, Tokens
from .errors import EmptyInput, TooFewAnswers
from .model import DualEncoderModel
from .retrieval import DUAL_ENCODER, TFIDF, _rank, tfidf_fit, tfidf_rank

N_CANDIDATES = 10


@dataclass(frozen=True)
class RankingItem:
    question: Tokens
    candidates: tuple[Tokens, ...]
    correct_index: int


@dataclass(frozen=True)
class RankingTask:
    items: tuple[RankingItem, ...]
    seed: int


def build_ranking_task(
    positives: Sequence[QAPair], n: int, seed: int
) -> RankingTask:
    """n items of one correct answer plus nine text-distinct distractors."""
    positives = [p for p in positives if p.label == 1]
    distinct_answers = sorted({p.answer for p in positives})
    if len(distinct_answers) < N_CANDIDATES:
        raise TooFewAnswers(
            f"need >= {N_CANDIDATES} distinct answers, have {len(distinct_answers)}"
        )
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > len(positives):
        raise TooFewAnswers(f"asked for {n} items but only {len(positives)} questions")

    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(positives), size=n, replace=False)
    items: list[RankingItem] = []
    for qi in chosen:
        pair = positives[int(qi)]
        eligible = [a for a in distinct_answers if a != pair.answer]
        picks = rng.choice(len(eligible), size=N_CANDIDATES - 1, replace=False)
        candidates = [pair.answer] + [eligible[int(i)] for i in picks]
        order = rng.permutation(N_CANDIDATES)
        shuffled = tuple(candidates[int(i)] for i in order)
        correct_index = int(np.flatnonzero(order == 0)[0])
        items.append(
            RankingItem(
                question=pair.question,
                candidates=shuffled,
                correct_index=correct_index,
            )
        )
    return RankingTask(items=tuple(items), seed=seed)


# -- rank metrics ----------------------------------------------------------------


def mrr(ranks: Sequence[int]) -> float:
    """Mean of 1/rank over 1-based ranks of the correct answer."""
    if len(ranks) == 0:
        raise EmptyInput("no ranks")
    total = 0.0
    for r in ranks:
        if r < 1:
            raise ValueError("ranks are 1-based")
        total += 1.0 / r
    return total / len(ranks)


def precision_at_k(ranks: Sequence[int], k: int = 3) -> float:
    """Fraction of items whose correct answer sits within the top k."""
    if len(ranks) == 0:
        raise EmptyInput("no ranks")
    hits = 0
    for r in ranks:
        if r < 1:
            raise ValueError("ranks are 1-based")
        if r <= k:
            hits += 1
    return hits / len(ranks)


def paired_bootstrap_pvalue(
    better: Sequence[float],
    worse: Sequence[float],
    n_resamples: int = 10_000,
    seed: int = 0,
) -> float:
    """One-sided p-value that mean(better) > mean(worse), resampling items."""
    if len(better) != len(worse) or len(better) == 0:
        raise EmptyInput("need equal-length non-empty paired samples")
    diffs = np.asarray(better, dtype=np.float64) - np.asarray(worse, dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(len(diffs), size=(n_resamples, len(diffs)))
    means = diffs[idx].mean(axis=1)
    return float((np.count_nonzero(means <= 0) + 1) / (n_resamples + 1))


@dataclass(frozen=True)
class RankingMetrics:
    scorer: str
    mrr: float
    precision_at_3: float
    accuracy: float  # precision@1
    n_items: int
    ranks: tuple[int, ...]


def _dual_ranks(task: RankingTask, model: DualEncoderModel) -> list[int]:
    from .model import match_probabilities
    from . import tensor as T

    ranks: list[int] = []
    with T.no_grad():
        for item in task.items:
            q_ids = model.ids(item.question)
            probs = match_probabilities(
                model,
                [q_ids] * len(item.candidates),
                [model.ids(c) for c in item.candidates],
            ).data[:, 0]
            result = _rank(
                list(range(len(item.candidates))), probs.tolist(),
                item.question, DUAL_ENCODER,
            )
            ranks.append(result.ids().index(item.correct_index) + 1)
    return ranks


def _tfidf_ranks(task: RankingTask) -> list[int]:
    ranks: list[int] = []
    for item in task.items:
        index = tfidf_fit(list(item.candidates))
        result = tfidf_rank(item.question, index)
        ranks.append(result.ids().index(item.correct_index) + 1)
    return ranks


def run_ranking_eval(
    task: RankingTask,
    model: DualEncoderModel | None = None,
    scorers: Sequence[str] = (DUAL_ENCODER, TFIDF),
    bootstrap_resamples: int = 10_000,
    bootstrap_seed: int = 0,
) -> "EvalReport":
    """Per-scorer metrics plus a paired bootstrap p-value when both run."""
    per_scorer: dict[str, RankingMetrics] = {}
    for scorer in scorers:
        if scorer == DUAL_ENCODER:
            if model is None:
                raise ValueError("dual_encoder scorer needs a model")
            ranks = _dual_ranks(task, model)
        elif scorer == TFIDF:
            ranks = _tfidf_ranks(task)
        else:
            raise ValueError(f"unknown scorer {scorer!r}")
        per_scorer[scorer] = RankingMetrics(
            scorer=scorer,
            mrr=mrr(ranks),
            precision_at_3=precision_at_k(ranks, 3),
            accuracy=precision_at_k(ranks, 1),
            n_items=len(ranks),
            ranks=tuple(ranks),
        )
    p_value = None
    if DUAL_ENCODER in per_scorer and TFIDF in per_scorer:
        p_value = paired_bootstrap_pvalue(
            [1.0 / r for r in per_scorer[DUAL_ENCODER].ranks],
            [1.0 / r for r in per_scorer[TFIDF].ranks],
            n_resamples=bootstrap_resamples,
            seed=bootstrap_seed,
        )
    return EvalReport(ranking=per_scorer, relevance={}, mrr_p_value=p_value)


# -- human relevance ---------------------------------------------------------------


@dataclass(frozen=True)
class RelevanceAnnotation:
    question_id: str
    template_id: int
    rank: int  # 1..3 position in the shown list
    score: int  # 1..3 relevance judgment
    annotator: str
    scorer: str
    timestamp: str

    def __post_init__(self):
        if self.score not in (1, 2, 3):
            raise ValueError(f"score must be 1..3, got {self.score}")
        if self.rank not in (1, 2, 3):
            raise ValueError(f"rank must be 1..3, got {self.rank}")

    def key(self) -> tuple[str, int, str]:
        return (self.question_id, self.template_id, self.annotator)


def annotation_to_record(a: RelevanceAnnotation) -> dict:
    return {
        "qid": a.question_id,
        "tid": a.template_id,
        "rank": a.rank,
        "score": a.score,
        "annotator": a.annotator,
        "scorer": a.scorer,
        "ts": a.timestamp,
    }


def annotation_from_record(record: dict) -> RelevanceAnnotation:
    return RelevanceAnnotation(
        question_id=str(record["qid"]),
        template_id=int(record["tid"]),
        rank=int(record["rank"]),
        score=int(record["score"]),
        annotator=str(record["annotator"]),
        scorer=str(record["scorer"]),
        timestamp=str(record["ts"]),
    )


@dataclass(frozen=True)
class RelevanceStats:
    scorer: str
    n_annotations: int
    mean: float
    ci_half_width: float
    histogram: dict[int, int] = field(default_factory=dict)
    n_questions: int = 0
    n_with_very_relevant: int = 0


def aggregate_relevance(
    annotations: Sequence[RelevanceAnnotation], scorer: str = ""
) -> RelevanceStats:
    """Mean score with 1.96*s/sqrt(n) half-width, histogram, and the count
    of questions having a very-relevant (score 3) answer in their top 3."""
    if not annotations:
        raise EmptyInput("no annotations")
    scores = np.array([a.score for a in annotations], dtype=np.float64)
    histogram = {s: int((scores == s).sum()) for s in (1, 2, 3)}
    mean = float(scores.mean())
    if scores.size > 1:
        half = float(1.96 * scores.std(ddof=1) / np.sqrt(scores.size))
    else:
        half = 0.0
    questions = {a.question_id for a in annotations}
    very = {
        a.question_id
        for a in annotations
        if a.score == 3 and a.rank <= 3
    }
    return RelevanceStats(
        scorer=scorer,
        n_annotations=len(annotations),
        mean=mean,
        ci_half_width=half,
        histogram=histogram,
        n_questions=len(questions),
        n_with_very_relevant=len(very),
    )


def relevance_report(annotations: Sequence[RelevanceAnnotation]) -> "EvalReport":
    by_scorer: dict[str, list[RelevanceAnnotation]] = {}
    for a in annotations:
        by_scorer.setdefault(a.scorer, []).append(a)
    relevance = {
        scorer: aggregate_relevance(items, scorer)
        for scorer, items in sorted(by_scorer.items())
    }
    return EvalReport(ranking={}, relevance=relevance, mrr_p_value=None)


# -- report --------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    ranking: dict[str, RankingMetrics]
    relevance: dict[str, RelevanceStats]
    mrr_p_value: float | None

    def merge(self, other: "EvalReport") -> "EvalReport":
        return EvalReport(
            ranking={**self.ranking, **other.ranking},
            relevance={**self.relevance, **other.relevance},
            mrr_p_value=self.mrr_p_value if self.mrr_p_value is not None
            else other.mrr_p_value,
        )


def report_to_doc(report: EvalReport) -> dict:
    return {
        "ranking": {
            s: {
                "mrr": m.mrr,
                "precision_at_3": m.precision_at_3,
                "accuracy": m.accuracy,
                "n_items": m.n_items,
                "ranks": list(m.ranks),
            }
            for s, m in sorted(report.ranking.items())
        },
        "mrr_p_value": report.mrr_p_value,
        "relevance": {
            s: {
                "n_annotations": r.n_annotations,
                "mean": r.mean,
                "ci_half_width": r.ci_half_width,
                "histogram": {str(k): v for k, v in sorted(r.histogram.items())},
                "n_questions": r.n_questions,
                "n_with_very_relevant": r.n_with_very_relevant,
            }
            for s, r in sorted(report.relevance.items())
        },
    }


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_doc(report), indent=2, sort_keys=True,
                      ensure_ascii=False)


def report_from_json(text: str) -> EvalReport:
    doc = json.loads(text)
    ranking = {
        s: RankingMetrics(
            scorer=s,
            mrr=m["mrr"],
            precision_at_3=m["precision_at_3"],
            accuracy=m["accuracy"],
            n_items=m["n_items"],
            ranks=tuple(m["ranks"]),
        )
        for s, m in doc.get("ranking", {}).items()
    }
    relevance = {
        s: RelevanceStats(
            scorer=s,
            n_annotations=r["n_annotations"],
            mean=r["mean"],
            ci_half_width=r["ci_half_width"],
            histogram={int(k): v for k, v in r["histogram"].items()},
            n_questions=r["n_questions"],
            n_with_very_relevant=r["n_with_very_relevant"],
        )
        for s, r in doc.get("relevance", {}).items()
    }
    return EvalReport(
        ranking=ranking, relevance=relevance, mrr_p_value=doc.get("mrr_p_value")
    )


def report_to_text(report: EvalReport) -> str:
    lines: list[str] = []
    if report.ranking:
        lines.append("Answer ranking (1 correct + 9 distractors)")
        lines.append(f"{'scorer':<14} {'MRR':>8} {'P@3':>8} {'acc':>8} {'items':>7}")
        for s, m in sorted(report.ranking.items()):
            lines.append(
                f"{s:<14} {m.mrr:>8.4f} {m.precision_at_3:>8.4f} "
                f"{m.accuracy:>8.4f} {m.n_items:>7d}"
            )
        if report.mrr_p_value is not None:
            lines.append(f"paired bootstrap p (dual > tfidf MRR): {report.mrr_p_value:.5f}")
        lines.append("")
    if report.relevance:
        lines.append("Human relevance (1=irrelevant .. 3=very relevant)")
        lines.append(
            f"{'scorer':<14} {'n':>6} {'mean':>7} {'95% CI':>9} "
            f"{'hist 1/2/3':>14} {'>=1 very rel':>13}"
        )
        for s, r in sorted(report.relevance.items()):
            hist = "/".join(str(r.histogram.get(i, 0)) for i in (1, 2, 3))
            lines.append(
                f"{s:<14} {r.n_annotations:>6d} {r.mean:>7.3f} "
                f"{'+/-':>4}{r.ci_half_width:>5.3f} {hist:>14} "
                f"{r.n_with_very_relevant:>6d}/{r.n_questions:<6d}"
            )
        lines.append("")
    return "\n".join(lines)


def histogram_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scorer", "score", "count"])
    for s, r in sorted(report.relevance.items()):
        for score in (1, 2, 3):
            writer.writerow([s, score, r.histogram.get(score, 0)])
    return buf.getvalue()


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fp:
        fp.write(text)
        fp.flush()
        os.fsync(fp.fileno())
    os.replace(tmp, path)


def emit_report(report: EvalReport, out_dir: str | os.PathLike) -> dict[str, str]:
    """Write report.json, report.txt and relevance_hist.csv; returns paths."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "json": os.path.join(out_dir, "report.json"),
        "txt": os.path.join(out_dir, "report.txt"),
        "csv": os.path.join(out_dir, "relevance_hist.csv"),
    }
    _atomic_write(paths["json"], report_to_json(report))
    _atomic_write(paths["txt"], report_to_text(report))
    _atomic_write(paths["csv"], histogram_csv(report))
    return paths


def load_report(out_dir: str | os.PathLike) -> EvalReport:
    with open(os.path.join(os.fspath(out_dir), "report.json"), encoding="utf-8") as fp:
        return report_from_json(fp.read())
