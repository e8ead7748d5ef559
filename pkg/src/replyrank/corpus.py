"""Chat-transcript ingestion and weakly-labeled pair construction.

Transcripts are ordered customer/agent turns.  A customer turn whose final
token is "?" followed immediately by an agent turn yields a positive
question/answer pair; negatives re-pair the same questions with answers
sampled from the rest of the corpus.  Everything here is a pure function of
its inputs and seed.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import (
    BankTooSmall,
    DuplicateTranscriptId,
    EmptyCorpus,
    InvalidRatio,
)

Tokens = tuple[str, ...]

CUSTOMER = "customer"
AGENT = "agent"

#: Redaction placeholders survive tokenization as single uppercase tokens.
PLACEHOLDERS = ("NAME", "DATE", "NUMBER", "EMAIL")

_PLACEHOLDER_SPLIT = re.compile(r"\b(" + "|".join(PLACEHOLDERS) + r")\b")
# Words may carry internal hyphens ("1-2") or a trailing clitic to split off.
_TOKEN = re.compile(
    r"[a-z0-9]+(?:-[a-z0-9]+)*(?:'[a-z]+)?"
    r"|'[a-z]+"
    r"|[^\s]"
)
_CLITIC = re.compile(r"^([a-z0-9]+(?:-[a-z0-9]+)*)(n't|'(?:ve|ll|re|m|s|d))$")


def normalize_text(raw: str) -> list[str]:
    """Lowercase and tokenize, keeping redaction placeholders intact.

    Punctuation becomes separate tokens; contractions split before the
    apostrophe ("i've" -> "i", "'ve"); whitespace collapses.  Empty input
    yields an empty list.
    """
    tokens: list[str] = []
    for part in _PLACEHOLDER_SPLIT.split(raw):
        if part in PLACEHOLDERS:
            tokens.append(part)
            continue
        for tok in _TOKEN.findall(part.lower()):
            m = _CLITIC.match(tok)
            if m:
                tokens.append(m.group(1))
                tokens.append(m.group(2))
            else:
                tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class Turn:
    speaker: str
    tokens: Tokens
    index: int


@dataclass(frozen=True)
class Transcript:
    id: str
    turns: tuple[Turn, ...]


@dataclass(frozen=True)
class SourceRef:
    transcript_id: str
    question_index: int
    answer_origin: str


@dataclass(frozen=True)
class QAPair:
    question: Tokens
    answer: Tokens
    label: int
    source: SourceRef


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[QAPair, ...]
    dev: tuple[QAPair, ...]
    seed: int
    neg_ratio: float


def make_transcript(tid: str, raw_turns: Iterable[tuple[str, str]]) -> Transcript:
    """Normalize raw (speaker, text) turns; empty-after-normalization turns drop.

    Turn indices are ordinal positions among the kept turns, so adjacency
    checks downstream see a gap-free sequence.
    """
    turns: list[Turn] = []
    for speaker, text in raw_turns:
        if speaker not in (CUSTOMER, AGENT):
            raise ValueError(f"unknown speaker {speaker!r} in transcript {tid}")
        tokens = tuple(normalize_text(text))
        if not tokens:
            continue
        turns.append(Turn(speaker=speaker, tokens=tokens, index=len(turns)))
    return Transcript(id=tid, turns=tuple(turns))


def extract_positive_pairs(t: Transcript) -> list[QAPair]:
    """One pair per customer turn ending in "?" that an agent turn follows."""
    pairs: list[QAPair] = []
    for turn, nxt in zip(t.turns, t.turns[1:]):
        if (
            turn.speaker == CUSTOMER
            and turn.tokens
            and turn.tokens[-1] == "?"
            and nxt.speaker == AGENT
        ):
            pairs.append(
                QAPair(
                    question=turn.tokens,
                    answer=nxt.tokens,
                    label=1,
                    source=SourceRef(t.id, turn.index, f"turn:{nxt.index}"),
                )
            )
    return pairs


def sample_negatives(
    positives: Sequence[QAPair],
    answer_bank: Sequence[Tokens],
    ratio: float,
    seed: int,
) -> list[QAPair]:
    """Pair each question with answers drawn uniformly from the bank.

    Per question the count follows the ratio exactly for integer ratios
    and tracks it in aggregate otherwise; the question's own correct
    answer text is never drawn.  Sampling is without replacement per
    question while the bank allows.
    """
    if ratio <= 0:
        raise InvalidRatio(f"negative ratio must be positive, got {ratio}")
    bank = [tuple(a) for a in answer_bank]
    counts: dict[Tokens, int] = {}
    for a in bank:
        counts[a] = counts.get(a, 0) + 1
    if len(counts) < 2:
        raise BankTooSmall(f"answer bank has {len(counts)} distinct answers; need >= 2")

    rng = np.random.default_rng(seed)
    negatives: list[QAPair] = []
    carried = 0.0
    for pos in positives:
        carried += ratio
        want = int(math.floor(carried + 1e-9))
        carried -= want
        # Rejection sampling stays uniform over eligible entries; repeats are
        # rejected while unused eligible entries remain.
        n_eligible = len(bank) - counts.get(pos.answer, 0)
        used: set[int] = set()
        drawn = 0
        while drawn < want:
            idx = int(rng.integers(len(bank)))
            if bank[idx] == pos.answer:
                continue
            if idx in used and len(used) < n_eligible:
                continue
            used.add(idx)
            drawn += 1
            negatives.append(
                QAPair(
                    question=pos.question,
                    answer=bank[idx],
                    label=0,
                    source=SourceRef(
                        pos.source.transcript_id,
                        pos.source.question_index,
                        f"bank:{idx}",
                    ),
                )
            )
    return negatives


def _split_pairs(
    transcripts: Sequence[Transcript], neg_ratio: float, seed: int
) -> list[QAPair]:
    positives: list[QAPair] = []
    for t in transcripts:
        positives.extend(extract_positive_pairs(t))
    if not positives:
        return []
    bank = [p.answer for p in positives]
    negatives = sample_negatives(positives, bank, neg_ratio, seed)
    return positives + negatives


def build_dataset(
    corpus: Sequence[Transcript],
    neg_ratio: float = 2.0,
    dev_fraction: float = 0.1,
    seed: int = 0,
) -> DatasetSplit:
    """Transcript-level train/dev split with per-split negative sampling.

    Dev negatives draw only from dev answers and train negatives only from
    train answers, so no answer text leaks across the split.
    """
    if not corpus:
        raise EmptyCorpus("no transcripts")
    if not 0 < dev_fraction < 1:
        raise ValueError(f"dev_fraction must be in (0, 1), got {dev_fraction}")
    ids = [t.id for t in corpus]
    if len(set(ids)) != len(ids):
        raise DuplicateTranscriptId("transcript ids must be unique within a corpus")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(corpus))
    n_dev = int(round(len(corpus) * dev_fraction))
    n_dev = min(max(n_dev, 1), len(corpus) - 1) if len(corpus) > 1 else 0
    dev_ts = [corpus[i] for i in order[:n_dev]]
    train_ts = [corpus[i] for i in order[n_dev:]]

    train = _split_pairs(train_ts, neg_ratio, seed=seed + 1)
    dev = _split_pairs(dev_ts, neg_ratio, seed=seed + 2)
    return DatasetSplit(
        train=tuple(train), dev=tuple(dev), seed=seed, neg_ratio=neg_ratio
    )


# -- wire formats --------------------------------------------------------------


def write_transcripts(transcripts: Iterable[Transcript], fp: IO[str]) -> int:
    """JSON Lines, one transcript per line; returns line count."""
    n = 0
    for t in transcripts:
        record = {
            "id": t.id,
            "turns": [
                {"speaker": turn.speaker, "text": " ".join(turn.tokens)}
                for turn in t.turns
            ],
        }
        fp.write(json.dumps(record, ensure_ascii=False) + "\n")
        n += 1
    return n


def read_transcripts(fp: IO[str]) -> list[Transcript]:
    transcripts: list[Transcript] = []
    seen: set[str] = set()
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            tid = record["id"]
            raw_turns = [(turn["speaker"], turn["text"]) for turn in record["turns"]]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"bad transcript record on line {lineno}: {exc}") from exc
        if tid in seen:
            raise DuplicateTranscriptId(f"duplicate transcript id {tid!r} on line {lineno}")
        seen.add(tid)
        transcripts.append(make_transcript(tid, raw_turns))
    return transcripts


def write_pairs(pairs: Iterable[QAPair], fp: IO[str]) -> int:
    n = 0
    for p in pairs:
        fp.write(
            json.dumps(
                {"q": list(p.question), "a": list(p.answer), "label": p.label},
                ensure_ascii=False,
            )
            + "\n"
        )
        n += 1
    return n


def read_pairs(fp: IO[str]) -> list[QAPair]:
    pairs: list[QAPair] = []
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            q = tuple(record["q"])
            a = tuple(record["a"])
            label = int(record["label"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad pair record on line {lineno}: {exc}") from exc
        if label not in (0, 1):
            raise ValueError(f"bad label {label} on line {lineno}")
        pairs.append(
            QAPair(question=q, answer=a, label=label,
                   source=SourceRef("file", lineno - 1, "file"))
        )
    return pairs


def label_ratio(pairs: Sequence[QAPair]) -> float:
    """Negatives per positive; inf when there are no positives."""
    pos = sum(1 for p in pairs if p.label == 1)
    neg = len(pairs) - pos
    return neg / pos if pos else float("inf")
