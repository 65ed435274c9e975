"""End-to-end summarization and corpus evaluation."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

from .. import nnkit as nn
from ..abstractor import Seq2Seq, rerank as rerank_candidates
from ..extractor import DecodeMode, ExtractionResult, ExtractorPolicy
from ..rouge import (
    RougeScore,
    corpus_average,
    rouge_l_summary,
    rouge_n,
    truncate_sentences,
)
from ..textproc import Document, Sentence


class EvalMode(str, enum.Enum):
    FULL_F1 = "full_f1"
    LIMITED_RECALL = "limited_recall"


@dataclass
class SummaryOutput:
    doc_id: str
    sentences: list[Sentence]
    extraction: ExtractionResult

    def to_json(self) -> dict:
        return {"id": self.doc_id, "summary": [s.text() for s in self.sentences],
                "selected": list(self.extraction.selected),
                "stopped": self.extraction.stopped}


def abstract_sentences(sentences: Sequence[Sentence], abstractor: Seq2Seq | None,
                       beam: int = 1, use_rerank: bool = False) -> list[Sentence]:
    """Rewrite each sentence; ``abstractor=None`` keeps them verbatim."""
    if abstractor is None or not sentences:
        return list(sentences)
    if use_rerank:
        cands = [abstractor.decode(s, beam=beam) for s in sentences]
        return [h.sentence() for h in rerank_candidates(cands, beam_k=beam)]
    return [abstractor.decode(s, beam=beam)[0].sentence() for s in sentences]


def summarize(doc: Document, actor: ExtractorPolicy, abstractor: Seq2Seq | None = None,
              use_rerank: bool = False, beam: int = 1, max_k: int = 5,
              trigram_block: bool = False) -> SummaryOutput:
    """GREEDY extraction followed by per-sentence rewriting, in extraction order.

    A policy that stops immediately yields an empty summary.
    """
    with nn.no_grad():
        res = actor.run_episode(doc, DecodeMode.GREEDY, max_k=max_k, trigram_block=trigram_block)
    picked = [doc.sentences[i] for i in res.selected]
    return SummaryOutput(doc.id, abstract_sentences(picked, abstractor, beam, use_rerank), res)


def _stemmed(sents: Sequence[Sentence]) -> list[Sentence]:
    return [Sentence.from_text(s.raw or s.text(), stem=True) for s in sents]


@dataclass
class MetricsReport:
    mode: EvalMode
    n_docs: int
    rouge1: RougeScore
    rouge2: RougeScore
    rougeL: RougeScore

    def _value(self, s: RougeScore) -> float:
        return s.recall if self.mode is EvalMode.LIMITED_RECALL else s.f1

    @property
    def ravg(self) -> float:
        return (self._value(self.rouge1) + self._value(self.rouge2)
                + self._value(self.rougeL)) / 3

    def to_json(self) -> dict:
        return {"mode": self.mode.value, "n_docs": self.n_docs,
                "rouge1": self._value(self.rouge1), "rouge2": self._value(self.rouge2),
                "rougeL": self._value(self.rougeL), "ravg": self.ravg,
                "detail": {"rouge1": self.rouge1.as_dict(), "rouge2": self.rouge2.as_dict(),
                           "rougeL": self.rougeL.as_dict()}}


def evaluate(references: Mapping[str, Sequence[Sentence]],
             outputs: Mapping[str, Sequence[Sentence]],
             mode: EvalMode = EvalMode.FULL_F1, stem: bool = True) -> MetricsReport:
    """Corpus-average ROUGE-1/2 and summary-level ROUGE-L.

    ``FULL_F1`` reports F1 over complete summaries.  ``LIMITED_RECALL``
    truncates each output to its reference's token count and reports
    recall.
    """
    mode = EvalMode(mode)
    missing = sorted(set(references) - set(outputs))
    extra = sorted(set(outputs) - set(references))
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing outputs for ids: " + ", ".join(missing))
        if extra:
            parts.append("outputs without references: " + ", ".join(extra))
        raise ValueError("id mismatch; " + "; ".join(parts))
    if not references:
        raise ValueError("empty corpus")
    r1, r2, rl = [], [], []
    for doc_id in sorted(references):
        ref = list(references[doc_id])
        out = list(outputs[doc_id])
        if stem:
            ref, out = _stemmed(ref), _stemmed(out)
        ref_flat = [t for s in ref for t in s.tokens]
        cand = [t for s in out for t in s.tokens]
        if mode is EvalMode.LIMITED_RECALL:
            out = truncate_sentences(out, len(ref_flat))
            cand = cand[:len(ref_flat)]
        r1.append(rouge_n(cand, ref_flat, 1))
        r2.append(rouge_n(cand, ref_flat, 2))
        rl.append(rouge_l_summary(out, ref))
    return MetricsReport(mode, len(references), corpus_average(r1), corpus_average(r2),
                         corpus_average(rl))
