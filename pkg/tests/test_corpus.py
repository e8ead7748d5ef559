import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replyrank.corpus import (
    AGENT,
    CUSTOMER,
    DatasetSplit,
    build_dataset,
    extract_positive_pairs,
    label_ratio,
    make_transcript,
    normalize_text,
    read_pairs,
    read_transcripts,
    sample_negatives,
    write_pairs,
    write_transcripts,
)
from replyrank.errors import BankTooSmall, DuplicateTranscriptId, EmptyCorpus, InvalidRatio
from replyrank.synthetic import generate_synthetic_corpus


# -- normalize_text -------------------------------------------------------------


def test_normalize_spaced_question():
    assert normalize_text("and will i be sent an email ?") == [
        "and", "will", "i", "be", "sent", "an", "email", "?",
    ]


def test_normalize_empty():
    assert normalize_text("") == []


def test_normalize_placeholder_and_punctuation():
    # Hand-applied rules: lowercase words, punctuation split off,
    # placeholder case preserved.
    assert normalize_text("Yes, NAME.") == ["yes", ",", "NAME", "."]


def test_normalize_contractions_and_clitics():
    assert normalize_text("I've already upgraded.") == [
        "i", "'ve", "already", "upgraded", ".",
    ]
    assert normalize_text("why hasn't it shipped?") == [
        "why", "has", "n't", "it", "shipped", "?",
    ]
    assert normalize_text("it 's a pleasure") == ["it", "'s", "a", "pleasure"]


def test_normalize_keeps_number_ranges_and_smileys():
    assert normalize_text("only 1-2 hours : )") == ["only", "1-2", "hours", ":", ")"]


def test_normalize_collapses_whitespace():
    assert normalize_text("  hello \t  world  ") == ["hello", "world"]


def test_normalize_does_not_protect_lookalike_words():
    # NAMES is not a placeholder; NAME inside a word is not protected.
    assert normalize_text("NAMES RENAMED") == ["names", "renamed"]


@given(st.text(max_size=80))
@settings(max_examples=200, deadline=None)
def test_normalize_idempotent(raw):
    once = normalize_text(raw)
    again = normalize_text(" ".join(once))
    assert once == again


# -- positive pair mining ---------------------------------------------------------


def test_minimal_matching_transcript():
    t = make_transcript("t0", [(CUSTOMER, "can i cancel ?"), (AGENT, "yes .")])
    pairs = extract_positive_pairs(t)
    assert len(pairs) == 1
    assert pairs[0].question == ("can", "i", "cancel", "?")
    assert pairs[0].answer == ("yes", ".")
    assert pairs[0].label == 1


def test_no_question_mark_yields_nothing():
    t = make_transcript("t0", [(CUSTOMER, "hello .")])
    assert extract_positive_pairs(t) == []


def test_question_must_be_followed_by_agent_turn():
    t = make_transcript(
        "t0",
        [(CUSTOMER, "ok ?"), (CUSTOMER, "still there ?"), (AGENT, "yes .")],
    )
    pairs = extract_positive_pairs(t)
    assert len(pairs) == 1
    assert pairs[0].question == ("still", "there", "?")


def test_answer_index_is_question_index_plus_one():
    corpus = generate_synthetic_corpus(6, 80, seed=11)
    for t in corpus:
        for p in extract_positive_pairs(t):
            q_idx = p.source.question_index
            assert p.source.answer_origin == f"turn:{q_idx + 1}"
            assert t.turns[q_idx].tokens == p.question
            assert t.turns[q_idx + 1].tokens == p.answer


def test_empty_turns_are_dropped_and_indices_renumbered():
    t = make_transcript(
        "t0", [(CUSTOMER, "  "), (CUSTOMER, "ok ?"), (AGENT, "yes .")]
    )
    assert [turn.index for turn in t.turns] == [0, 1]
    assert len(extract_positive_pairs(t)) == 1


# -- negative sampling --------------------------------------------------------------


def _positive(question, answer, tid="t0"):
    t = make_transcript(tid, [(CUSTOMER, question), (AGENT, answer)])
    return extract_positive_pairs(t)[0]


def test_negatives_exclude_own_answer():
    pos = _positive("will it ship ?", "yes tomorrow .")
    bank = [tuple(f"answer {i} .".split()) for i in range(9)] + [pos.answer]
    negatives = sample_negatives([pos], bank, ratio=2, seed=5)
    assert len(negatives) == 2
    for n in negatives:
        assert n.label == 0
        assert n.answer != pos.answer


def test_zero_ratio_is_invalid_not_bank_too_small():
    pos = _positive("will it ship ?", "yes tomorrow .")
    bank = [pos.answer, ("no", ".")]
    with pytest.raises(InvalidRatio):
        sample_negatives([pos], bank, ratio=0, seed=1)


def test_deterministic_under_fixed_seed():
    pos = _positive("will it ship ?", "yes tomorrow .")
    bank = [tuple(f"answer number {i} .".split()) for i in range(20)]
    a = sample_negatives([pos] * 5, bank, ratio=2, seed=9)
    b = sample_negatives([pos] * 5, bank, ratio=2, seed=9)
    assert a == b
    c = sample_negatives([pos] * 5, bank, ratio=2, seed=10)
    assert a != c


def test_bank_with_one_distinct_answer_rejected():
    pos = _positive("will it ship ?", "yes tomorrow .")
    with pytest.raises(BankTooSmall):
        sample_negatives([pos], [pos.answer, pos.answer], ratio=2, seed=0)


def test_without_replacement_when_bank_allows():
    pos = _positive("will it ship ?", "yes tomorrow .")
    bank = [tuple(f"a{i} .".split()) for i in range(10)]
    negatives = sample_negatives([pos], bank, ratio=5, seed=3)
    answers = [n.answer for n in negatives]
    assert len(set(answers)) == len(answers)


def test_fractional_ratio_tracks_target_in_aggregate():
    pos = [_positive("will it ship ?", f"answer {i} .", tid=f"t{i}") for i in range(40)]
    bank = [p.answer for p in pos]
    negatives = sample_negatives(pos, bank, ratio=1.5, seed=2)
    assert len(negatives) == 60


# -- dataset construction --------------------------------------------------------------


def test_build_dataset_ratio_and_split_sizes():
    corpus = generate_synthetic_corpus(10, 100, seed=3)
    split = build_dataset(corpus, neg_ratio=2, dev_fraction=0.1, seed=4)
    for part in (split.train, split.dev):
        assert part
        assert abs(label_ratio(part) - 2.0) <= 0.1
    dev_ids = {p.source.transcript_id for p in split.dev}
    assert len(dev_ids) == 10


def test_build_dataset_half_split_of_two():
    corpus = [
        make_transcript(
            f"t{i}",
            [
                (CUSTOMER, "where is it ?"),
                (AGENT, f"coming on day {i} ."),
                (CUSTOMER, "are you sure ?"),
                (AGENT, f"yes , certain times {i} ."),
            ],
        )
        for i in range(2)
    ]
    split = build_dataset(corpus, neg_ratio=2, dev_fraction=0.5, seed=1)
    train_ids = {p.source.transcript_id for p in split.train}
    dev_ids = {p.source.transcript_id for p in split.dev}
    assert len(train_ids) == 1 and len(dev_ids) == 1


def test_build_dataset_transcript_level_disjoint():
    corpus = generate_synthetic_corpus(8, 60, seed=5)
    split = build_dataset(corpus, neg_ratio=2, dev_fraction=0.2, seed=6)
    train_ids = {p.source.transcript_id for p in split.train}
    dev_ids = {p.source.transcript_id for p in split.dev}
    assert not train_ids & dev_ids


def test_build_dataset_no_answer_leakage_across_split():
    corpus = generate_synthetic_corpus(8, 60, seed=7)
    split = build_dataset(corpus, neg_ratio=2, dev_fraction=0.2, seed=8)
    train_answers = {p.answer for p in split.train if p.label == 1}
    for neg in split.dev:
        if neg.label == 0:
            dev_positive_answers = {p.answer for p in split.dev if p.label == 1}
            assert neg.answer in dev_positive_answers
            break
    # Dev negatives may coincide textually with train answers only if the
    # same text also occurs among dev positives.
    for neg in split.dev:
        if neg.label == 0 and neg.answer in train_answers:
            assert neg.answer in {p.answer for p in split.dev if p.label == 1}


def test_negative_never_equals_its_own_positive_answer():
    corpus = generate_synthetic_corpus(8, 120, seed=9)
    split = build_dataset(corpus, neg_ratio=2, dev_fraction=0.1, seed=10)
    positives = {
        (p.source.transcript_id, p.source.question_index): p.answer
        for p in split.train + split.dev
        if p.label == 1
    }
    for pair in split.train + split.dev:
        if pair.label == 0:
            key = (pair.source.transcript_id, pair.source.question_index)
            assert pair.answer != positives[key]


def test_seed_changes_split_membership_not_statistics():
    corpus = generate_synthetic_corpus(10, 100, seed=12)
    a = build_dataset(corpus, neg_ratio=2, dev_fraction=0.1, seed=1)
    b = build_dataset(corpus, neg_ratio=2, dev_fraction=0.1, seed=2)
    assert {p.source.transcript_id for p in a.dev} != {
        p.source.transcript_id for p in b.dev
    }
    assert len(a.train) + len(a.dev) == len(b.train) + len(b.dev)


def test_empty_corpus_rejected():
    with pytest.raises(EmptyCorpus):
        build_dataset([], neg_ratio=2, dev_fraction=0.1, seed=0)


def test_duplicate_transcript_ids_rejected():
    t = make_transcript("same", [(CUSTOMER, "ok ?"), (AGENT, "yes .")])
    with pytest.raises(DuplicateTranscriptId):
        build_dataset([t, t], neg_ratio=2, dev_fraction=0.5, seed=0)


# -- wire formats ---------------------------------------------------------------------


def test_transcript_jsonl_roundtrip():
    corpus = generate_synthetic_corpus(5, 12, seed=13)
    buf = io.StringIO()
    write_transcripts(corpus, buf)
    text = buf.getvalue()
    assert text.endswith("\n")
    record = json.loads(text.splitlines()[0])
    assert set(record) == {"id", "turns"}
    assert set(record["turns"][0]) == {"speaker", "text"}
    back = read_transcripts(io.StringIO(text))
    assert back == corpus


def test_pairs_jsonl_roundtrip():
    corpus = generate_synthetic_corpus(5, 20, seed=14)
    split = build_dataset(corpus, neg_ratio=2, dev_fraction=0.2, seed=15)
    buf = io.StringIO()
    write_pairs(split.train, buf)
    record = json.loads(buf.getvalue().splitlines()[0])
    assert set(record) == {"q", "a", "label"}
    back = read_pairs(io.StringIO(buf.getvalue()))
    assert [(p.question, p.answer, p.label) for p in back] == [
        (p.question, p.answer, p.label) for p in split.train
    ]


def test_read_transcripts_rejects_duplicates():
    line = json.dumps(
        {"id": "x", "turns": [{"speaker": "customer", "text": "hi ."}]}
    )
    with pytest.raises(DuplicateTranscriptId):
        read_transcripts(io.StringIO(line + "\n" + line + "\n"))
