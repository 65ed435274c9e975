"""Synthetic extract-and-summarize corpora with known optimal selections.

Vocabulary ``w0 .. w{V-1}`` is split in half: reference ("salient") words
and distractor words.  Each document mixes one copy of every reference
sentence with distractor sentences drawn from the other half.

Trap documents realize the failure of per-sentence matching.  The first
two reference sentences are ``a1 = X`` and ``a2 = C + Y``; the document
carries ``X + C`` (one long sentence covering both), a short ``Y`` and a
near-duplicate of ``X + C`` with two words of ``X`` swapped for distractors.  The
near-duplicate ties the long sentence as the best single match for ``a2``,
so matching each reference sentence independently yields a redundant or
incomplete selection, while ``{X + C, Y}`` reproduces the reference.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..nnkit import make_rng
from ..oracle import combination_search, match_selection
from ..rouge import SummaryScorer
from ..textproc import Document
from .data import DatasetRecord

MAX_TRAP_ATTEMPTS = 50
DUPLICATE_SWAPS = 2


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int = 200
    vocab_size: int = 400
    ref_sentences: tuple[int, int] = (2, 3)
    doc_sentences: tuple[int, int] = (8, 12)
    sentence_len: tuple[int, int] = (4, 7)
    near_duplicate_rate: float = 0.0
    noise_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("near_duplicate_rate", "noise_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        lo, hi = self.ref_sentences
        if lo < 2 and self.near_duplicate_rate > 0:
            raise ValueError("trap documents need at least 2 reference sentences")
        if not 1 <= lo <= hi or self.doc_sentences[0] < hi + 2:
            raise ValueError("documents must have room for every reference sentence")
        if self.vocab_size < 40:
            raise ValueError("vocab_size must be >= 40")


@dataclass
class DocTruth:
    id: str
    planted: list[int]
    trap: bool = False
    duplicate: int | None = None
    optimum: list[int] = field(default_factory=list)
    optimum_f1: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticCorpus:
    records: list[DatasetRecord]
    truth: list[DocTruth]

    def pairs(self) -> list[tuple[Document, Document]]:
        return [r.to_documents() for r in self.records]


def _noised(tokens: list[str], rate: float, rng: np.random.Generator) -> list[str]:
    if rate <= 0:
        return list(tokens)
    kept = [t for t in tokens if rng.random() >= rate] or [tokens[0]]
    for i in range(len(kept) - 1):
        if rng.random() < rate:
            kept[i], kept[i + 1] = kept[i + 1], kept[i]
    return kept


class _Sampler:
    def __init__(self, spec: SyntheticSpec, rng: np.random.Generator):
        half = spec.vocab_size // 2
        self.salient = [f"w{i}" for i in range(half)]
        self.distract = [f"w{i}" for i in range(half, spec.vocab_size)]
        self.rng = rng
        self.spec = spec
        self._pool = list(self.rng.permutation(self.salient))

    def fresh(self, k: int) -> list[str]:
        """``k`` salient words not used elsewhere in this document."""
        if len(self._pool) < k:
            raise ValueError("vocab_size too small for the requested sentence lengths")
        out, self._pool = self._pool[:k], self._pool[k:]
        return [str(w) for w in out]

    def length(self) -> int:
        lo, hi = self.spec.sentence_len
        return int(self.rng.integers(lo, hi + 1))

    def distractor(self) -> list[str]:
        k = int(self.rng.integers(4, 9))
        return [str(w) for w in self.rng.choice(self.distract, size=k, replace=False)]


def _build(spec: SyntheticSpec, index: int, attempt: int, trap: bool):
    rng = make_rng(spec.seed, index, attempt)
    s = _Sampler(spec, rng)
    n_ref = int(rng.integers(spec.ref_sentences[0], spec.ref_sentences[1] + 1))
    refs, salient = [], []
    dup = None
    if trap:
        x, c, y = s.fresh(int(rng.integers(3, 5))), s.fresh(int(rng.integers(4, 6))), s.fresh(2)
        refs += [x, c + y]
        long_sent = _noised(x + c, spec.noise_rate, rng)
        near = list(long_sent)
        spots = rng.choice(len(x), size=DUPLICATE_SWAPS, replace=False)
        junk = rng.choice(s.distract, size=DUPLICATE_SWAPS, replace=False)
        for pos, word in zip(spots, junk):
            near[int(pos)] = str(word)
        salient += [long_sent, _noised(y, spec.noise_rate, rng)]
        dup = near
    for _ in range(n_ref - len(refs)):
        ref = s.fresh(s.length())
        refs.append(ref)
        salient.append(_noised(ref, spec.noise_rate, rng))
    if trap:
        order = rng.permutation(len(refs))
        refs = [refs[i] for i in order]
    n_doc = int(rng.integers(spec.doc_sentences[0], spec.doc_sentences[1] + 1))
    extra = [dup] if dup is not None else []
    n_distract = max(0, n_doc - len(salient) - len(extra))
    body = salient + extra + [s.distractor() for _ in range(n_distract)]
    perm = [int(i) for i in rng.permutation(len(body))]
    sentences = [body[i] for i in perm]
    planted = sorted(perm.index(i) for i in range(len(salient)))
    dup_idx = perm.index(len(salient)) if dup is not None else None
    return refs, sentences, planted, dup_idx


def _is_trap(doc: Document, ref: Document) -> bool:
    scorer = SummaryScorer(ref.sentences, doc.sentences)
    best = combination_search(doc, ref, max_k=5, limit=len(doc)).score.f1
    return scorer.f1(match_selection(doc, ref)) < best


def gen_synthetic(spec: SyntheticSpec) -> SyntheticCorpus:
    """Generate ``spec.n_docs`` documents plus their planted/optimal selections.

    A document drawn as a trap is regenerated (new attempt seed) until the
    per-sentence-matching deficit is strict; noise can occasionally break it.
    """
    records, truth = [], []
    for index in range(spec.n_docs):
        trap = bool(make_rng(spec.seed, index).random() < spec.near_duplicate_rate)
        for attempt in range(MAX_TRAP_ATTEMPTS if trap else 1):
            refs, sents, planted, dup = _build(spec, index, attempt, trap)
            rec = DatasetRecord(f"syn{spec.seed}-{index:05d}", [" ".join(t) for t in sents],
                                [" ".join(t) for t in refs])
            doc, ref = rec.to_documents()
            if not trap or _is_trap(doc, ref):
                break
        else:
            raise RuntimeError(f"could not build a trap document for index {index}")
        best = combination_search(doc, ref, max_k=5, limit=len(doc))
        records.append(rec)
        truth.append(DocTruth(rec.id, planted, trap, dup, list(best.selected), best.score.f1))
    return SyntheticCorpus(records, truth)
