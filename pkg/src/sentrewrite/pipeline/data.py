"""JSONL corpus records: one ``{"id", "article", "abstract"}`` object per line."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..textproc import Document, normalize_tokens

log = logging.getLogger(__name__)

REQUIRED_FIELDS = ("id", "article", "abstract")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    article: tuple[str, ...]
    abstract: tuple[str, ...]

    def __init__(self, id: str, article: Sequence[str], abstract: Sequence[str]):
        object.__setattr__(self, "id", str(id))
        object.__setattr__(self, "article", tuple(article))
        object.__setattr__(self, "abstract", tuple(abstract))
        if not self.article:
            raise CorpusError(f"record {self.id!r}: empty article")
        if not self.abstract:
            raise CorpusError(f"record {self.id!r}: empty abstract")

    def to_json(self) -> dict:
        return {"id": self.id, "article": list(self.article), "abstract": list(self.abstract)}

    def to_documents(self) -> tuple[Document, Document]:
        return (Document.from_texts(self.id, self.article),
                Document.from_texts(self.id + "#ref", self.abstract))


@dataclass
class IngestResult:
    records: list[DatasetRecord]
    rejected: int = 0


def _clean(sentences, field: str, lineno: int) -> list[str]:
    if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
        raise CorpusError(f"line {lineno}: field {field!r} must be a list of strings")
    return [s for s in sentences if normalize_tokens(s)]


def ingest_jsonl(path: str | Path, with_report: bool = False):
    """Read and validate a corpus.

    Sentences that normalize to nothing are dropped; a record left with an
    empty article or abstract is rejected and counted.  Returns the list of
    records, or an :class:`IngestResult` when ``with_report`` is set.
    """
    records, rejected = [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"line {lineno}: expected a JSON object")
            for name in REQUIRED_FIELDS:
                if name not in obj:
                    raise CorpusError(f"line {lineno}: missing field {name!r}")
            article = _clean(obj["article"], "article", lineno)
            abstract = _clean(obj["abstract"], "abstract", lineno)
            if not article or not abstract:
                rejected += 1
                continue
            records.append(DatasetRecord(obj["id"], article, abstract))
    if rejected:
        log.warning("rejected %d record(s) with empty article or abstract", rejected)
    if not records:
        raise CorpusError(f"empty corpus: {path}")
    return IngestResult(records, rejected) if with_report else records


def serialize_jsonl(records: Iterable[DatasetRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")


def write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
    return out
