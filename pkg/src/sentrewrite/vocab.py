from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

UNK = "[UNK]"
CLS = "[CLS]"
SEP = "[SEP]"
BOS = "[BOS]"
EOS = "[EOS]"


class Vocab:
    """Token <-> id map; ids of the special tokens come first."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if UNK not in self.index:
            raise ValueError("vocabulary must contain [UNK]")
        self.unk_id = self.index[UNK]

    @classmethod
    def build(cls, stream: Iterable[str], specials: Sequence[str] = (UNK,),
              min_count: int = 1, max_size: int | None = None) -> "Vocab":
        counts = Counter(stream)
        words = sorted((w for w, c in counts.items() if c >= min_count and w not in specials),
                       key=lambda w: (-counts[w], w))
        if max_size is not None:
            words = words[:max(0, max_size - len(specials))]
        return cls(list(specials) + words)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        return self.index.get(token, self.unk_id)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, self.unk_id) for t in tokens]
