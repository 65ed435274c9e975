"""Extractive oracles: sentence matching, greedy search and combination search."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .rouge import RougeScore, SummaryScorer, ZERO, corpus_average, rouge_l_sentence, rouge_n
from .textproc import Document, ReferenceSummary, Sentence

METHODS = ("match", "greedy", "combo")
DEFAULT_COMBO_LIMIT = 25


@dataclass(frozen=True)
class OracleLabel:
    doc_id: str
    selected: tuple[int, ...]
    score: RougeScore = ZERO

    def to_json(self) -> dict:
        return {"id": self.doc_id, "selected": list(self.selected), "score": self.score.as_dict()}

    @classmethod
    def from_json(cls, obj: dict) -> "OracleLabel":
        score = obj.get("score") or {}
        return cls(obj["id"], tuple(int(i) for i in obj["selected"]),
                   RougeScore(score.get("precision", 0.0), score.get("recall", 0.0),
                              score.get("f1", 0.0)))


@dataclass(frozen=True)
class AbstractorPair:
    source: Sentence
    target: Sentence
    source_index: int = -1
    target_index: int = -1


def sentence_match(doc: Document, ref: ReferenceSummary) -> list[AbstractorPair]:
    """Best document sentence (sentence-level ROUGE-L F1) for each reference sentence.

    Reference sentences are matched independently, so one document sentence
    may be paired with several of them.  Ties go to the lowest index.
    """
    pairs = []
    for t, target in enumerate(ref.sentences):
        best_i, best_f1 = 0, -1.0
        for i, sent in enumerate(doc.sentences):
            f1 = rouge_l_sentence(sent.tokens, target.tokens).f1
            if f1 > best_f1:
                best_i, best_f1 = i, f1
        pairs.append(AbstractorPair(doc.sentences[best_i], target, best_i, t))
    return pairs


def match_selection(doc: Document, ref: ReferenceSummary) -> tuple[int, ...]:
    """Distinct indices chosen by :func:`sentence_match`, in document order."""
    return tuple(sorted({p.source_index for p in sentence_match(doc, ref)}))


def _mean_rouge_objective(doc: Document, ref: ReferenceSummary):
    scorer = SummaryScorer(ref.sentences, doc.sentences)
    ref_flat = [t for s in ref.sentences for t in s.tokens]

    def objective(indices):
        cand = [t for i in indices for t in doc.sentences[i].tokens]
        return (rouge_n(cand, ref_flat, 1).f1 + rouge_n(cand, ref_flat, 2).f1
                + scorer.f1(indices)) / 3
    return objective


def greedy_oracle(doc: Document, ref: ReferenceSummary, max_k: int,
                  objective: str = "rl") -> OracleLabel:
    """Add sentences one at a time while the summary-level score strictly improves.

    ``objective="rl"`` ranks by summary-level ROUGE-L F1; ``"mean"`` ranks
    by the mean of ROUGE-1, ROUGE-2 and ROUGE-L F1.  The returned score is
    always summary-level ROUGE-L of the selection.
    """
    if max_k < 1:
        raise ValueError(f"max_k must be >= 1, got {max_k}")
    scorer = SummaryScorer(ref.sentences, doc.sentences)
    if objective == "rl":
        score_fn = scorer.f1
    elif objective == "mean":
        score_fn = _mean_rouge_objective(doc, ref)
    else:
        raise ValueError(f"unknown greedy objective {objective!r}")

    selected: list[int] = []
    current = 0.0
    while len(selected) < max_k:
        best_i, best = None, current
        for i in range(len(doc)):
            if i in selected:
                continue
            value = score_fn(selected + [i])
            if value > best:
                best_i, best = i, value
        if best_i is None:
            break
        selected.append(best_i)
        current = best
    return OracleLabel(doc.id, tuple(selected), scorer.score(selected))


def combination_search(doc: Document, ref: ReferenceSummary, max_k: int = 5,
                       limit: int = DEFAULT_COMBO_LIMIT) -> OracleLabel:
    """Exhaustive search over all subsets of 1..max_k sentences."""
    if max_k < 1:
        raise ValueError(f"max_k must be >= 1, got {max_k}")
    if len(doc) > limit:
        raise ValueError(
            f"combination search too large: {len(doc)} sentences > limit {limit} "
            f"({combination_count(len(doc), max_k)} subsets)")
    scorer = SummaryScorer(ref.sentences, doc.sentences)
    best_tup, best_f1 = None, -1.0
    for k in range(1, min(max_k, len(doc)) + 1):
        for tup in itertools.combinations(range(len(doc)), k):
            f1 = scorer.f1(tup)
            if f1 > best_f1 or (f1 == best_f1 and tup < best_tup):
                best_tup, best_f1 = tup, f1
    return OracleLabel(doc.id, best_tup, scorer.score(best_tup))


def combination_count(n: int, max_k: int) -> int:
    return sum(math.comb(n, k) for k in range(1, min(max_k, n) + 1))


def select(method: str, doc: Document, ref: ReferenceSummary, max_k: int = 5,
           limit: int = DEFAULT_COMBO_LIMIT) -> OracleLabel:
    if method == "match":
        sel = match_selection(doc, ref)
        return OracleLabel(doc.id, sel, SummaryScorer(ref.sentences, doc.sentences).score(sel))
    if method == "greedy":
        return greedy_oracle(doc, ref, max_k)
    if method == "combo":
        return combination_search(doc, ref, max_k, limit=limit)
    raise ValueError(f"unknown oracle method {method!r}; expected one of {METHODS}")


@dataclass
class OracleReportRow:
    method: str
    r1: RougeScore
    r2: RougeScore
    rl: RougeScore
    per_doc_rl: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"method": self.method, "r1": self.r1.as_dict(), "r2": self.r2.as_dict(),
                "rl": self.rl.as_dict()}


def oracle_report(corpus: Iterable[tuple[Document, ReferenceSummary]],
                  methods: Sequence[str] = METHODS, max_k: int = 5,
                  rewrite: Callable[[Sentence], Sentence] | None = None,
                  limit: int = DEFAULT_COMBO_LIMIT) -> list[OracleReportRow]:
    """Corpus-average ROUGE of each oracle's selection.

    With ``rewrite`` every document sentence is paraphrased first and the
    searches run over the rewritten sentences.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    scores = {m: ([], [], []) for m in methods}
    for doc, ref in corpus:
        if rewrite is not None:
            doc = Document(doc.id, tuple(rewrite(s) for s in doc.sentences))
        ref_flat = [t for s in ref.sentences for t in s.tokens]
        for m in methods:
            label = select(m, doc, ref, max_k=max_k, limit=limit)
            cand = [t for i in label.selected for t in doc.sentences[i].tokens]
            r1s, r2s, rls = scores[m]
            r1s.append(rouge_n(cand, ref_flat, 1))
            r2s.append(rouge_n(cand, ref_flat, 2))
            rls.append(label.score)
    return [OracleReportRow(m, corpus_average(scores[m][0]), corpus_average(scores[m][1]),
                            corpus_average(scores[m][2]), [s.f1 for s in scores[m][2]])
            for m in methods]


def format_report(rows: Sequence[OracleReportRow]) -> str:
    lines = [f"{'method':<10} {'R-1':>7} {'R-2':>7} {'R-L':>7}"]
    for row in rows:
        lines.append(f"{row.method:<10} {100 * row.r1.f1:7.2f} {100 * row.r2.f1:7.2f} "
                     f"{100 * row.rl.f1:7.2f}")
    return "\n".join(lines)
