"""ROUGE-1/2, sentence-level ROUGE-L and summary-level (union LCS) ROUGE-L.

Scores are plain precision/recall/F1 triples with no smoothing: a zero
denominator yields a zero component.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .textproc import Sentence, lcs_length, lcs_union_positions, ngrams


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        return cls(precision, recall, fmeasure(precision, recall))

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


ZERO = RougeScore(0.0, 0.0, 0.0)


class RougeVariant(str, enum.Enum):
    R1 = "r1"
    R2 = "r2"
    RL_SENTENCE = "rl_sentence"
    RL_SUMMARY = "rl_summary"


def fmeasure(precision: float, recall: float) -> float:
    if precision + recall > 0:
        return 2 * precision * recall / (precision + recall)
    return 0.0


def _tokens(s) -> tuple:
    return s.tokens if isinstance(s, Sentence) else tuple(s)


def rouge_n(cand: Sequence[str], ref: Sequence[str], n: int) -> RougeScore:
    cand_grams = ngrams(cand, n)
    ref_grams = ngrams(ref, n)
    overlap = sum(min(c, ref_grams[g]) for g, c in cand_grams.items())
    n_cand = sum(cand_grams.values())
    n_ref = sum(ref_grams.values())
    precision = overlap / n_cand if n_cand else 0.0
    recall = overlap / n_ref if n_ref else 0.0
    return RougeScore.from_pr(precision, recall)


def rouge_l_sentence(cand: Sequence[str], ref: Sequence[str]) -> RougeScore:
    if not cand or not ref:
        return ZERO
    lcs = lcs_length(cand, ref)
    return RougeScore.from_pr(lcs / len(cand), lcs / len(ref))


def _clipped_union_hits(refs, cands, union_positions) -> int:
    counter = Counter()
    for c in cands:
        counter.update(c)
    hits = 0
    for r_idx, ref in enumerate(refs):
        union = set()
        for c_idx in range(len(cands)):
            union |= union_positions(r_idx, c_idx)
        for pos in sorted(union):
            tok = ref[pos]
            if counter[tok] > 0:
                hits += 1
                counter[tok] -= 1
    return hits


def rouge_l_summary(cand_sents: Sequence, ref_sents: Sequence) -> RougeScore:
    """Summary-level ROUGE-L F1 via union LCS with candidate-token clipping.

    For each reference sentence the LCS alignments against every candidate
    sentence are unioned; each reference token in the union counts as a hit
    only while the candidate still has an unused copy of that token.  The
    clipping keeps precision at or below 1 for redundant candidates.
    """
    cands = [_tokens(s) for s in cand_sents]
    refs = [_tokens(s) for s in ref_sents]
    n_cand = sum(map(len, cands))
    n_ref = sum(map(len, refs))
    if not n_cand or not n_ref:
        return ZERO
    hits = _clipped_union_hits(
        refs, cands, lambda r, c: lcs_union_positions(refs[r], cands[c]))
    return RougeScore.from_pr(hits / n_cand, hits / n_ref)


class SummaryScorer:
    """Summary-level ROUGE-L against a fixed reference over a fixed sentence pool.

    LCS alignments between every (reference, pool) sentence pair are
    computed once, so scoring many subsets of the pool (oracle search,
    reward shaping) costs only the union and clipping steps.  Results are
    identical to :func:`rouge_l_summary` on the selected sentences.
    """

    def __init__(self, ref_sents: Sequence, pool: Sequence):
        self.refs = [_tokens(s) for s in ref_sents]
        self.pool = [_tokens(s) for s in pool]
        self.n_ref = sum(map(len, self.refs))
        self._positions = [[lcs_union_positions(r, c) for c in self.pool] for r in self.refs]

    def score(self, indices: Iterable[int]) -> RougeScore:
        indices = list(indices)
        cands = [self.pool[i] for i in indices]
        n_cand = sum(map(len, cands))
        if not n_cand or not self.n_ref:
            return ZERO
        hits = _clipped_union_hits(
            self.refs, cands, lambda r, c: self._positions[r][indices[c]])
        return RougeScore.from_pr(hits / n_cand, hits / self.n_ref)

    def f1(self, indices: Iterable[int]) -> float:
        return self.score(indices).f1


def score_variant(cand: Sequence[str], ref: Sequence[str], variant: RougeVariant) -> RougeScore:
    variant = RougeVariant(variant)
    if variant is RougeVariant.R1:
        return rouge_n(cand, ref, 1)
    if variant is RougeVariant.R2:
        return rouge_n(cand, ref, 2)
    if variant is RougeVariant.RL_SENTENCE:
        return rouge_l_sentence(cand, ref)
    raise ValueError(f"variant {variant.value} needs sentence lists, not token lists")


def rouge_recall_truncated(cand_tokens: Sequence[str], ref_tokens: Sequence[str],
                           variant: RougeVariant) -> RougeScore:
    """Score ``variant`` after cutting the candidate to the reference length.

    The ``recall`` field is the limited-length recall metric.
    """
    return score_variant(list(cand_tokens)[:len(ref_tokens)], ref_tokens, variant)


def truncate_sentences(sents: Sequence, budget: int) -> list[tuple]:
    """Keep leading tokens of a sentence list up to ``budget`` tokens in total."""
    out = []
    for s in sents:
        toks = _tokens(s)
        if budget <= 0:
            break
        out.append(toks[:budget])
        budget -= len(toks)
    return out


def corpus_average(scores: Sequence[RougeScore]) -> RougeScore:
    if not scores:
        raise ValueError("empty corpus")
    k = len(scores)
    return RougeScore(sum(s.precision for s in scores) / k,
                      sum(s.recall for s in scores) / k,
                      sum(s.f1 for s in scores) / k)
