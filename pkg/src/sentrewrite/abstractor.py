"""Sentence rewriter: a small attentional LSTM encoder-decoder with a copy gate.

The output distribution at each step mixes generation from the fixed
vocabulary with copying of source tokens through the attention weights:

    P(w) = p_gen * P_vocab(w) + (1 - p_gen) * sum_{j: x_j = w} a_j

Source tokens missing from the vocabulary get temporary ids past the end
of it (the "extended vocabulary" of that source), so they can be copied
verbatim.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import nnkit as nn
from .nnkit import Tensor
from .oracle import AbstractorPair
from .textproc import Sentence, ngrams
from .vocab import BOS, EOS, UNK, Vocab

CONTROL_TOKENS = (UNK, BOS, EOS)
RERANK_BUDGET = 4 ** 6


@dataclass(frozen=True)
class Seq2SeqConfig:
    embed_dim: int = 16
    hidden_dim: int = 32
    max_len: int = 30

    def __post_init__(self):
        if min(self.embed_dim, self.hidden_dim, self.max_len) < 1:
            raise ValueError("Seq2SeqConfig dimensions must be >= 1")


@dataclass(frozen=True)
class AbstractorTrainConfig:
    epochs: int = 10
    lr: float = 1e-3
    batch_size: int = 8
    clip: float = 2.0
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)


@dataclass
class BeamHypothesis:
    tokens: list[str]
    log_prob: float
    finished: bool
    ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.log_prob > 1e-12:
            raise ValueError("log_prob must be <= 0")
        if self.finished != bool(self.tokens and self.tokens[-1] == EOS):
            raise ValueError("finished must hold exactly when the last token is [EOS]")

    @property
    def score(self) -> float:
        """Length-normalized log-probability."""
        return self.log_prob / max(1, len(self.tokens))

    @property
    def words(self) -> list[str]:
        return self.tokens[:-1] if self.finished else list(self.tokens)

    def sentence(self) -> Sentence:
        return Sentence.from_tokens(self.words)


def copy_distribution(p_vocab: Tensor, attention: Tensor, p_gen: Tensor,
                      source_ext_ids: Sequence[int], ext_size: int) -> Tensor:
    """Mix generation and copying into one distribution over ``ext_size`` ids.

    ``p_vocab`` covers the fixed vocabulary (its length is the offset of the
    first source OOV id); ``attention`` has one weight per source position.
    """
    p_vocab, attention, p_gen = nn.as_tensor(p_vocab), nn.as_tensor(attention), nn.as_tensor(p_gen)
    v = p_vocab.shape[-1]
    if attention.shape[-1] != len(source_ext_ids):
        raise nn.ShapeError(f"copy_distribution: {attention.shape[-1]} attention weights for "
                            f"{len(source_ext_ids)} source tokens")
    scatter = np.zeros((len(source_ext_ids), ext_size))
    scatter[np.arange(len(source_ext_ids)), list(source_ext_ids)] = 1.0
    pad = np.zeros(ext_size - v)
    gen = nn.concat([p_vocab, nn.Tensor(pad)], axis=-1) if ext_size > v else p_vocab
    copy = nn.matmul(nn.reshape(attention, (1, -1)), nn.Tensor(scatter))
    return p_gen * gen + (1.0 - p_gen) * nn.reshape(copy, (-1,))


@dataclass
class SourceView:
    """Ids of one source sentence in the fixed and the extended vocabulary."""
    tokens: list[str]
    vocab_ids: list[int]
    ext_ids: list[int]
    oovs: list[str]

    def ext_size(self, vocab: Vocab) -> int:
        return len(vocab) + len(self.oovs)

    def token(self, ext_id: int, vocab: Vocab) -> str:
        if ext_id < len(vocab):
            return vocab.tokens[ext_id]
        return self.oovs[ext_id - len(vocab)]

    def target_id(self, token: str, vocab: Vocab) -> int:
        if token in vocab:
            return vocab.id(token)
        if token in self.oovs:
            return len(vocab) + self.oovs.index(token)
        return vocab.unk_id


def source_view(tokens: Sequence[str], vocab: Vocab) -> SourceView:
    oovs: list[str] = []
    ext = []
    for t in tokens:
        if t in vocab and t not in CONTROL_TOKENS:
            ext.append(vocab.id(t))
        else:
            if t not in oovs:
                oovs.append(t)
            ext.append(len(vocab) + oovs.index(t))
    return SourceView(list(tokens), vocab.ids(tokens), ext, oovs)


class Seq2Seq(nn.Module):
    def __init__(self, cfg: Seq2SeqConfig, vocab: Vocab, seed: int = 0):
        super().__init__()
        missing = [t for t in CONTROL_TOKENS if t not in vocab]
        if missing:
            raise ValueError(f"vocabulary lacks control tokens {missing}")
        self.cfg, self.vocab = cfg, vocab
        rng = nn.make_rng(seed, 3)
        e, h, v = cfg.embed_dim, cfg.hidden_dim, len(vocab)
        u = nn.uniform_init
        self.emb = self.add_param("emb", nn.normal_init(rng, (v, e)))
        self.enc_wx = self.add_param("enc_wx", u(rng, (e, 4 * h)))
        self.enc_wh = self.add_param("enc_wh", u(rng, (h, 4 * h)))
        self.enc_b = self.add_param("enc_b", _lstm_bias(h))
        self.dec_wx = self.add_param("dec_wx", u(rng, (e + h, 4 * h)))
        self.dec_wh = self.add_param("dec_wh", u(rng, (h, 4 * h)))
        self.dec_b = self.add_param("dec_b", _lstm_bias(h))
        self.att_wh = self.add_param("att_wh", u(rng, (h, h)))
        self.att_ws = self.add_param("att_ws", u(rng, (h, h)))
        self.att_v = self.add_param("att_v", u(rng, h))
        self.gen_w = self.add_param("gen_w", u(rng, 2 * h + e))
        self.gen_b = self.add_param("gen_b", np.zeros(()))
        self.out_w = self.add_param("out_w", u(rng, (2 * h, v)))
        self.out_b = self.add_param("out_b", np.zeros(v))

    @classmethod
    def build_vocab(cls, pairs: Sequence[AbstractorPair], min_count: int = 1,
                    max_size: int | None = None) -> Vocab:
        stream = (t for p in pairs for s in (p.source, p.target) for t in s.tokens)
        return Vocab.build(stream, specials=CONTROL_TOKENS, min_count=min_count,
                           max_size=max_size)

    # -- network ----------------------------------------------------------

    def encode(self, src: SourceView):
        x = nn.embedding_lookup(self.emb, src.vocab_ids)
        h = nn.Tensor(np.zeros((1, self.cfg.hidden_dim)))
        c = nn.Tensor(np.zeros((1, self.cfg.hidden_dim)))
        rows = []
        for j in range(len(src.vocab_ids)):
            h, c = nn.lstm_cell(x[j:j + 1], h, c, self.enc_wx, self.enc_wh, self.enc_b)
            rows.append(h)
        states = nn.concat(rows, axis=0)
        return states, states @ self.att_wh, (h, c)

    def initial(self, enc_final):
        h, c = enc_final
        return h, c, nn.Tensor(np.zeros((1, self.cfg.hidden_dim)))

    def step(self, src: SourceView, enc_states, enc_proj, state, prev_id: int):
        """One decoder step; returns (distribution over the extended vocab, new state)."""
        h, c, ctx = state
        x = nn.embedding_lookup(self.emb, [prev_id])
        h, c = nn.lstm_cell(nn.concat([x, ctx], axis=-1), h, c,
                            self.dec_wx, self.dec_wh, self.dec_b)
        scores = nn.tanh(enc_proj + h @ self.att_ws) @ self.att_v
        attn = nn.softmax(scores)
        ctx = nn.reshape(attn, (1, -1)) @ enc_states
        feats = nn.concat([h, ctx], axis=-1)
        p_vocab = nn.softmax(nn.reshape(feats @ self.out_w, (-1,)) + self.out_b)
        p_gen = nn.sigmoid(nn.tsum(nn.reshape(nn.concat([feats, x], axis=-1), (-1,))
                                   * self.gen_w) + self.gen_b)
        dist = copy_distribution(p_vocab, attn, p_gen, src.ext_ids, src.ext_size(self.vocab))
        return dist, (h, c, ctx)

    def _prev_input(self, ext_id: int) -> int:
        return ext_id if ext_id < len(self.vocab) else self.vocab.unk_id

    # -- training ---------------------------------------------------------

    def loss(self, source: Sentence, target: Sentence) -> Tensor:
        """Mean negative log-likelihood of the target tokens followed by [EOS]."""
        if not len(source):
            raise ValueError("empty source sentence")
        src = source_view(source.tokens, self.vocab)
        enc_states, enc_proj, final = self.encode(src)
        state = self.initial(final)
        gold = [src.target_id(t, self.vocab) for t in target.tokens] + [self.vocab.id(EOS)]
        prev = self.vocab.id(BOS)
        terms = []
        for g in gold:
            dist, state = self.step(src, enc_states, enc_proj, state, prev)
            terms.append(nn.log(dist[g]))
            prev = self._prev_input(g)
        return -nn.tsum(nn.stack(terms)) / len(terms)

    # -- decoding ---------------------------------------------------------

    def decode(self, source: Sentence, beam: int = 1, max_len: int | None = None
               ) -> list[BeamHypothesis]:
        """Greedy (``beam=1``) or beam decoding, best length-normalized score first."""
        max_len = max_len or self.cfg.max_len
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        if beam < 1:
            raise ValueError("beam must be >= 1")
        with nn.no_grad():
            src = source_view(source.tokens, self.vocab)
            enc = self.encode(src)
            greedy = self._beam(src, enc, 1, max_len)
            if beam == 1:
                return greedy
            pool = self._beam(src, enc, beam, max_len)
            if all(h.ids != greedy[0].ids for h in pool):
                pool.append(greedy[0])
            pool.sort(key=lambda h: -h.score)
            return pool[:beam]

    def _beam(self, src: SourceView, enc, k: int, max_len: int) -> list[BeamHypothesis]:
        enc_states, enc_proj, final = enc
        eos = self.vocab.id(EOS)
        alive = [([], 0.0, self.initial(final))]
        done: list[tuple[list[int], float]] = []
        for _ in range(max_len):
            expansions = []
            for ids, lp, state in alive:
                prev = self._prev_input(ids[-1]) if ids else self.vocab.id(BOS)
                dist, new_state = self.step(src, enc_states, enc_proj, state, prev)
                logp = np.log(np.maximum(dist.data, 1e-300))
                top = np.argsort(-logp, kind="stable")[:k]
                expansions += [(ids + [int(w)], lp + float(logp[w]), new_state) for w in top]
            expansions.sort(key=lambda e: -e[1])
            alive = []
            for ids, lp, state in expansions[:k]:
                if ids[-1] == eos:
                    done.append((ids, lp))
                else:
                    alive.append((ids, lp, state))
            if not alive or len(done) >= k:
                break
        # unfinished hypotheses only survive if they ran to max_len
        pool = done + [(ids, lp) for ids, lp, _ in alive if len(ids) == max_len]
        hyps = [BeamHypothesis([src.token(i, self.vocab) for i in ids], min(0.0, lp),
                               ids[-1] == eos, ids) for ids, lp in pool]
        hyps.sort(key=lambda h: -h.score)
        return hyps[:k]

    def rewrite(self, source: Sentence, beam: int = 1) -> Sentence:
        return self.decode(source, beam)[0].sentence()

    # -- persistence ------------------------------------------------------

    def save(self, path, extra: dict | None = None) -> None:
        meta = {"kind": "abstractor", "config": asdict(self.cfg), "vocab": self.vocab.tokens}
        meta.update(extra or {})
        nn.save_checkpoint(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path) -> "Seq2Seq":
        tensors, meta = nn.load_checkpoint(path)
        if meta.get("kind") != "abstractor":
            raise nn.CheckpointError(f"{path}: not an abstractor checkpoint")
        model = cls(Seq2SeqConfig(**meta["config"]), Vocab(meta["vocab"]))
        model.load_state_dict(tensors)
        return model


def _lstm_bias(h: int) -> np.ndarray:
    b = np.zeros(4 * h)
    b[h:2 * h] = 1.0
    return b


def train_abstractor(pairs: Sequence[AbstractorPair], model: Seq2Seq,
                     cfg: AbstractorTrainConfig = AbstractorTrainConfig(),
                     on_epoch: Callable[[dict], None] | None = None) -> list[float]:
    """Teacher-forced minibatch training; returns per-epoch mean loss."""
    if not pairs:
        raise ValueError("no training pairs")
    opt = nn.Adam(model.named_parameters(), betas=cfg.betas)
    curve = []
    for epoch in range(1, cfg.epochs + 1):
        order = nn.make_rng(cfg.seed, 30, epoch).permutation(len(pairs))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            opt.zero_grad()
            for i in batch:
                loss = model.loss(pairs[i].source, pairs[i].target) / len(batch)
                total += loss.item() * len(batch)
                nn.backward(loss)
            nn.clip_global_norm(opt.params, cfg.clip)
            opt.step(cfg.lr)
        curve.append(total / len(pairs))
        if on_epoch is not None:
            on_epoch({"epoch": epoch, "loss": curve[-1]})
    return curve


def identity_abstract(source: Sentence) -> Sentence:
    return source


# ------------------------------------------------------------------ rerank

def repeated_ngrams(sentences: Sequence[Sequence[str]], n: int = 3) -> int:
    """Occurrences of n-grams beyond their first, pooled over all sentences."""
    pooled: Counter = Counter()
    for toks in sentences:
        pooled.update(ngrams(list(toks), n))
    return sum(c - 1 for c in pooled.values() if c > 1)


def _objective(combo: Sequence[BeamHypothesis], n: int) -> tuple[int, float]:
    return repeated_ngrams([h.words for h in combo], n), -sum(h.score for h in combo)


def rerank(candidates: Sequence[Sequence[BeamHypothesis]], beam_k: int | None = None,
           n: int = 3, budget: int = RERANK_BUDGET) -> list[BeamHypothesis]:
    """Pick one hypothesis per sentence, fewest repeated n-grams first.

    Ties go to the higher total length-normalized log-probability.  Small
    candidate grids are searched exhaustively; larger ones greedily, sentence
    by sentence, keeping the all-top-1 choice if the greedy pass does worse.
    """
    if any(not c for c in candidates):
        raise ValueError("every sentence needs at least one candidate")
    cands = [list(c)[:beam_k] if beam_k else list(c) for c in candidates]
    if not cands:
        return []
    top1 = [c[0] for c in cands]
    if math.prod(len(c) for c in cands) <= budget:
        best = min(itertools.product(*cands), key=lambda combo: _objective(combo, n))
        best = list(best)
    else:
        best = []
        for c in cands:
            best.append(min(c, key=lambda h: _objective(best + [h], n)))
    return best if _objective(best, n) <= _objective(top1, n) else top1
