import json

import pytest

from replyrank.evaluation import RelevanceAnnotation
from replyrank.store import (
    AnnotationStore,
    CorruptStore,
    DuplicateAnnotation,
    Journal,
    read_annotations,
)


def _ann(qid="q1", tid=1, rank=1, score=3, annotator="a1"):
    return RelevanceAnnotation(
        question_id=qid, template_id=tid, rank=rank, score=score,
        annotator=annotator, scorer="dual_encoder",
        timestamp="2024-01-01T00:00:00Z",
    )


def test_journal_append_and_reload(tmp_path):
    path = tmp_path / "j.jsonl"
    j = Journal(path)
    j.append({"n": 1})
    j.append({"n": 2})
    j.close()
    again = Journal(path)
    assert again.records() == [{"n": 1}, {"n": 2}]
    again.close()


def test_partial_trailing_line_is_quarantined(tmp_path):
    path = tmp_path / "j.jsonl"
    j = Journal(path)
    j.append({"n": 1})
    j.append({"n": 2})
    j.close()
    with open(path, "a", encoding="utf-8") as fp:
        fp.write('{"n": 3, "truncated')  # crash mid-write: no newline
    recovered = Journal(path)
    assert recovered.records() == [{"n": 1}, {"n": 2}]
    recovered.close()
    assert "truncated" in (tmp_path / "j.jsonl.quarantine").read_text()
    # The store file itself is clean again.
    lines = path.read_text().splitlines()
    assert [json.loads(x) for x in lines] == [{"n": 1}, {"n": 2}]


def test_unparseable_final_line_with_newline_is_quarantined(tmp_path):
    path = tmp_path / "j.jsonl"
    j = Journal(path)
    j.append({"n": 1})
    j.close()
    with open(path, "a", encoding="utf-8") as fp:
        fp.write("{bad json}\n")
    recovered = Journal(path)
    assert recovered.records() == [{"n": 1}]
    recovered.close()
    assert "{bad json}" in (tmp_path / "j.jsonl.quarantine").read_text()


def test_corruption_in_the_middle_is_loud(tmp_path):
    path = tmp_path / "j.jsonl"
    path.write_text('{"a": 1}\nnot json\n{"b": 2}\n')
    with pytest.raises(CorruptStore):
        Journal(path)


def test_append_after_recovery_continues_cleanly(tmp_path):
    path = tmp_path / "j.jsonl"
    j = Journal(path)
    j.append({"n": 1})
    j.close()
    with open(path, "a", encoding="utf-8") as fp:
        fp.write('{"n": 2')
    recovered = Journal(path)
    recovered.append({"n": 3})
    recovered.close()
    assert [json.loads(x) for x in path.read_text().splitlines()] == [
        {"n": 1}, {"n": 3}
    ]


def test_annotation_store_round_trip(tmp_path):
    store = AnnotationStore(tmp_path / "ann.jsonl")
    store.append(_ann())
    store.append(_ann(tid=2, rank=2, score=1))
    store.close()
    again = AnnotationStore(tmp_path / "ann.jsonl")
    got = again.annotations()
    again.close()
    assert len(got) == 2
    assert got[0] == _ann()


def test_duplicate_annotation_rejected_and_store_unchanged(tmp_path):
    path = tmp_path / "ann.jsonl"
    store = AnnotationStore(path)
    store.append(_ann())
    before = path.read_bytes()
    with pytest.raises(DuplicateAnnotation):
        store.append(_ann(score=1))  # same (qid, tid, annotator)
    assert path.read_bytes() == before
    store.append(_ann(annotator="someone-else"))
    store.close()


def test_duplicates_survive_restart(tmp_path):
    path = tmp_path / "ann.jsonl"
    store = AnnotationStore(path)
    store.append(_ann())
    store.close()
    again = AnnotationStore(path)
    with pytest.raises(DuplicateAnnotation):
        again.append(_ann())
    again.close()


def test_offline_reader_skips_partial_tail(tmp_path):
    path = tmp_path / "ann.jsonl"
    store = AnnotationStore(path)
    store.append(_ann())
    store.close()
    with open(path, "a", encoding="utf-8") as fp:
        fp.write('{"qid": "torn"')
    got = list(read_annotations(path))
    assert len(got) == 1
    assert got[0].question_id == "q1"
