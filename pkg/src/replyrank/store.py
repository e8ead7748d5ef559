"""Append-only JSON Lines persistence with crash recovery.

Every append is flushed and fsynced before returning, so a record is
durable once the caller sees success.  A crash mid-write leaves a partial
trailing line; on reopen it is moved to a ``.quarantine`` sidecar and the
file is truncated back to the last complete record.
"""

from __future__ import annotations

import json
import os
import threading
from typing import Iterator

from .errors import ReplyRankError
from .evaluation import (
    RelevanceAnnotation,
    annotation_from_record,
    annotation_to_record,
)


class CorruptStore(ReplyRankError):
    """A non-trailing line failed to parse; not a crash artifact."""


class DuplicateAnnotation(ReplyRankError):
    pass


class Journal:
    """Single-writer append-only JSONL file."""

    def __init__(self, path: str | os.PathLike):
        self.path = os.fspath(path)
        self._lock = threading.Lock()
        self._records: list[dict] = []
        self._recover()
        self._fp = open(self.path, "a", encoding="utf-8")

    def _recover(self) -> None:
        if not os.path.exists(self.path):
            parent = os.path.dirname(os.path.abspath(self.path))
            os.makedirs(parent, exist_ok=True)
            with open(self.path, "w", encoding="utf-8"):
                pass
            return
        with open(self.path, "rb") as fp:
            raw = fp.read()
        cut = len(raw) if raw.endswith(b"\n") or not raw else raw.rfind(b"\n") + 1
        partial = raw[cut:]
        lines = raw[:cut].decode("utf-8").splitlines()
        records: list[dict] = []
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                if i == len(lines) - 1:
                    # A newline-terminated but unparseable final line is a
                    # crash artifact too (e.g. torn multi-block write).
                    bad = (line + "\n").encode("utf-8")
                    partial = bad + partial
                    cut -= len(bad)
                    break
                raise CorruptStore(
                    f"{self.path}: line {i + 1} is not valid JSON"
                ) from exc
        if partial:
            with open(self.path + ".quarantine", "ab") as qf:
                qf.write(partial)
                qf.flush()
                os.fsync(qf.fileno())
            with open(self.path, "rb+") as fp:
                fp.truncate(cut)
        self._records = records

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False, separators=(",", ":"))
        with self._lock:
            self._fp.write(line + "\n")
            self._fp.flush()
            os.fsync(self._fp.fileno())
            self._records.append(record)

    def records(self) -> list[dict]:
        with self._lock:
            return list(self._records)

    def close(self) -> None:
        with self._lock:
            self._fp.close()


class AnnotationStore:
    """Relevance annotations with (question, template, annotator) uniqueness."""

    def __init__(self, path: str | os.PathLike):
        self._journal = Journal(path)
        self._keys: set[tuple[str, int, str]] = set()
        for record in self._journal.records():
            self._keys.add(annotation_from_record(record).key())

    @property
    def path(self) -> str:
        return self._journal.path

    def append(self, annotation: RelevanceAnnotation) -> None:
        key = annotation.key()
        if key in self._keys:
            raise DuplicateAnnotation(
                f"annotation for {key} already recorded"
            )
        self._journal.append(annotation_to_record(annotation))
        self._keys.add(key)

    def __contains__(self, key: tuple[str, int, str]) -> bool:
        return key in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def annotations(self) -> list[RelevanceAnnotation]:
        return [annotation_from_record(r) for r in self._journal.records()]

    def close(self) -> None:
        self._journal.close()


def read_annotations(path: str | os.PathLike) -> Iterator[RelevanceAnnotation]:
    """Offline read of complete records; partial trailing lines are skipped."""
    with open(path, "rb") as fp:
        raw = fp.read()
    if raw and not raw.endswith(b"\n"):
        raw = raw[: raw.rfind(b"\n") + 1]
    for line in raw.decode("utf-8").splitlines():
        if line.strip():
            yield annotation_from_record(json.loads(line))
