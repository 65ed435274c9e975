"""Cross-entropy pre-training of the extractor on oracle labels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .. import nnkit as nn
from ..extractor import ExtractorPolicy
from ..oracle import OracleLabel
from ..textproc import Document


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 30
    lr_base: float = 2e-3
    warmup: int = 10000
    clip: float = 2.0
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)


def extraction_loss(policy: ExtractorPolicy, doc: Document, selected: Sequence[int]) -> nn.Tensor:
    """Mean negative log-likelihood of ``selected`` followed by the stop action."""
    logps = policy.teacher_forced(doc, list(selected) + [-1])
    return -nn.tsum(nn.stack(logps)) / len(logps)


def _check_labels(docs: Sequence[Document], labels: Sequence[OracleLabel]) -> None:
    if len(docs) != len(labels):
        raise ValueError(f"{len(docs)} documents but {len(labels)} labels")
    if not docs:
        raise ValueError("empty corpus")
    for doc, label in zip(docs, labels):
        for i in label.selected:
            if not 0 <= i < len(doc):
                raise ValueError(f"label index {i} out of range for document {doc.id!r} "
                                 f"with {len(doc)} sentences")
        if len(set(label.selected)) != len(label.selected):
            raise ValueError(f"duplicate label index for document {doc.id!r}")


def pretrain_extractor(docs: Sequence[Document], labels: Sequence[OracleLabel],
                       policy: ExtractorPolicy, cfg: PretrainConfig = PretrainConfig(),
                       on_epoch: Callable[[dict], None] | None = None) -> list[float]:
    """Teacher-forced training, one document per Adam step; returns per-epoch mean loss.

    Document order is reshuffled each epoch from ``cfg.seed``.
    """
    _check_labels(docs, labels)
    opt = nn.Adam(policy.named_parameters(), betas=cfg.betas)
    sched = nn.LrSchedule(cfg.lr_base, cfg.warmup)
    step, curve = 0, []
    for epoch in range(1, cfg.epochs + 1):
        order = nn.make_rng(cfg.seed, 10, epoch).permutation(len(docs))
        total = 0.0
        for i in order:
            opt.zero_grad()
            loss = extraction_loss(policy, docs[i], labels[i].selected)
            total += loss.item()
            nn.backward(loss)
            nn.clip_global_norm(opt.params, cfg.clip)
            step += 1
            opt.step(nn.lr_at(step, sched))
        curve.append(total / len(docs))
        if on_epoch is not None:
            on_epoch({"epoch": epoch, "loss": curve[-1], "step": step})
    return curve


def match_rate(policy: ExtractorPolicy, docs: Sequence[Document],
               labels: Sequence[OracleLabel], max_k: int = 5) -> float:
    """Fraction of documents whose GREEDY extraction equals the label index set."""
    hits = 0
    with nn.no_grad():
        for doc, label in zip(docs, labels):
            res = policy.run_episode(doc, "greedy", max_k=max_k)
            hits += set(res.selected) == set(label.selected)
    return hits / len(docs)


def mean_episode_score(policy: ExtractorPolicy, pairs, max_k: int = 5,
                       rewrite=None) -> float:
    from ..rouge import rouge_l_summary

    scores = []
    with nn.no_grad():
        for doc, ref in pairs:
            res = policy.run_episode(doc, "greedy", max_k=max_k)
            sents = [doc.sentences[i] for i in res.selected]
            if rewrite is not None:
                sents = [rewrite(s) for s in sents]
            scores.append(rouge_l_summary(sents, ref.sentences).f1 if sents else 0.0)
    return float(np.mean(scores))
