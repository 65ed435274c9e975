"""Tokenization, n-grams and longest-common-subsequence helpers.

Every ROUGE variant in :mod:`sentrewrite.rouge` is built on the primitives
here.  Tokens are plain lowercase strings; a :class:`Sentence` keeps its
normalized tokens next to the raw text it came from.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from nltk.stem.porter import PorterStemmer

Token = str
NGram = tuple

_STRIP_CHARS = re.compile(r"[^a-z0-9'\-]")
_EDGE_JOINERS = "-'"

_stemmer = PorterStemmer()


@lru_cache(maxsize=65536)
def _stem(token: str) -> str:
    return _stemmer.stem(token)


def normalize_tokens(raw: str, stem: bool = False) -> list[Token]:
    """Lowercase ``raw``, drop punctuation and split on whitespace.

    Characters other than ``[a-z0-9]`` are removed, except hyphens and
    apostrophes that sit inside a word.  Tokens that end up empty
    (punctuation-only input such as ``"--"`` or ``"."``) are discarded.

    >>> normalize_tokens("The cat sat.")
    ['the', 'cat', 'sat']
    >>> normalize_tokens("Cats running", stem=True)
    ['cat', 'run']
    """
    tokens = []
    for piece in raw.lower().split():
        piece = _STRIP_CHARS.sub("", piece).strip(_EDGE_JOINERS)
        if not piece:
            continue
        tokens.append(_stem(piece) if stem else piece)
    return tokens


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    raw: str = ""

    @classmethod
    def from_text(cls, raw: str, stem: bool = False) -> "Sentence":
        return cls(tuple(normalize_tokens(raw, stem=stem)), raw)

    @classmethod
    def from_tokens(cls, tokens: Sequence[Token]) -> "Sentence":
        return cls(tuple(tokens), " ".join(tokens))

    def text(self) -> str:
        return " ".join(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[Sentence, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.sentences:
            raise ValueError(f"document {self.id!r} has no sentences")
        for i, sent in enumerate(self.sentences):
            if not sent.tokens:
                raise ValueError(f"document {self.id!r}: sentence {i} is empty")

    @classmethod
    def from_texts(cls, doc_id: str, texts: Sequence[str], stem: bool = False) -> "Document":
        return cls(doc_id, tuple(Sentence.from_text(t, stem=stem) for t in texts))

    def __len__(self) -> int:
        return len(self.sentences)

    def __getitem__(self, i: int) -> Sentence:
        return self.sentences[i]


# A gold summary has the same shape as a document: ordered, non-empty sentences.
ReferenceSummary = Document


def ngrams(tokens: Sequence[Token], n: int) -> Counter:
    """Multiset of contiguous ``n``-grams, as a Counter of token tuples."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def lcs_table(a: Sequence[Token], b: Sequence[Token]) -> list[list[int]]:
    """Prefix DP table; ``t[i][j]`` is the LCS length of ``a[:i]`` and ``b[:j]``."""
    cols = len(b)
    table = [[0] * (cols + 1)]
    for i in range(1, len(a) + 1):
        prev = table[-1]
        row = [0] * (cols + 1)
        ai = a[i - 1]
        for j in range(1, cols + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
        table.append(row)
    return table


def lcs_length(a: Sequence[Token], b: Sequence[Token]) -> int:
    if not a or not b:
        return 0
    # Two rolling rows; the full table is only needed for alignments.
    prev = [0] * (len(b) + 1)
    for ai in a:
        row = [0]
        for j, bj in enumerate(b, start=1):
            if ai == bj:
                row.append(prev[j - 1] + 1)
            else:
                row.append(prev[j] if prev[j] >= row[j - 1] else row[j - 1])
        prev = row
    return prev[-1]


def lcs_union_positions(ref: Sequence[Token], cand: Sequence[Token]) -> frozenset[int]:
    """Reference indices of one canonical LCS alignment between ``ref`` and ``cand``.

    The alignment is read off a suffix DP table walking forward from the
    start of both sequences: equal heads are always matched, otherwise the
    candidate token is skipped whenever that keeps the alignment optimal.
    This prefers the earliest reference index, then the earliest candidate
    index, so the result is deterministic.
    """
    n, m = len(ref), len(cand)
    if not n or not m:
        return frozenset()
    # suffix[i][j] = LCS(ref[i:], cand[j:])
    suffix = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below = suffix[i], suffix[i + 1]
        ri = ref[i]
        for j in range(m - 1, -1, -1):
            if ri == cand[j]:
                row[j] = below[j + 1] + 1
            else:
                row[j] = below[j] if below[j] >= row[j + 1] else row[j + 1]
    positions = []
    i = j = 0
    while i < n and j < m:
        if ref[i] == cand[j]:
            positions.append(i)
            i += 1
            j += 1
        elif suffix[i][j + 1] == suffix[i][j]:
            j += 1
        else:
            i += 1
    return frozenset(positions)


def trigram_set(tokens: Sequence[Token]) -> set[NGram]:
    return set(ngrams(tokens, 3))
