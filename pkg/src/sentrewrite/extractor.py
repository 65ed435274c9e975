"""Sentence encoder plus LSTM pointer decoder with glimpse attention and a stop action.

The encoder maps a document to one vector per sentence; a trainable
``h_stop`` row is appended so "stop" is scored like any other candidate.
At each step the decoder LSTM consumes the previous pick, attends over the
sentence rows (glimpse) and scores every unselected sentence plus stop.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import nnkit as nn
from .nnkit import Tensor
from .textproc import Document, trigram_set
from .vocab import CLS, SEP, UNK, Vocab


class EncoderVariant(str, enum.Enum):
    BAG_MEAN = "bag_mean"
    MINI_ATTENTION = "mini_attention"


class DecodeMode(str, enum.Enum):
    SAMPLE = "sample"
    GREEDY = "greedy"


@dataclass
class EncoderConfig:
    variant: EncoderVariant = EncoderVariant.BAG_MEAN
    embed_dim: int = 32
    hidden_dim: int = 32
    num_layers: int = 1
    ff_dim: int = 64
    max_tokens: int = 512

    def __post_init__(self):
        self.variant = EncoderVariant(self.variant)
        for name in ("embed_dim", "hidden_dim", "num_layers", "ff_dim", "max_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def segment_ids(n_sentences: int) -> list[int]:
    """Interval segment index per sentence: 0 (E_A) for odd positions, 1 (E_B) for even."""
    return [i % 2 for i in range(n_sentences)]


def _truncate(doc_ids: list[list[int]], budget: int) -> list[list[int]]:
    """Trim tail sentences so the document fits ``budget`` tokens (one token minimum each)."""
    if len(doc_ids) > budget:
        raise ValueError(f"document has {len(doc_ids)} sentences; at most {budget} fit")
    out, remaining = [], budget
    for k, ids in enumerate(doc_ids):
        reserve = len(doc_ids) - k - 1
        take = max(1, min(len(ids), remaining - reserve))
        out.append(ids[:take])
        remaining -= take
    return out


class BagMeanEncoder(nn.Module):
    """h_i = tanh(mean token embedding of s_i @ W + b)."""

    def __init__(self, cfg: EncoderConfig, vocab_size: int, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.emb = self.add_param("emb", nn.normal_init(rng, (vocab_size, cfg.embed_dim)))
        self.w = self.add_param("w", nn.uniform_init(rng, (cfg.embed_dim, cfg.hidden_dim)))
        self.b = self.add_param("b", np.zeros(cfg.hidden_dim))

    def __call__(self, doc_ids: list[list[int]]) -> Tensor:
        doc_ids = _truncate(doc_ids, self.cfg.max_tokens)
        flat = [t for ids in doc_ids for t in ids]
        avg = np.zeros((len(doc_ids), len(flat)))
        col = 0
        for i, ids in enumerate(doc_ids):
            avg[i, col:col + len(ids)] = 1.0 / len(ids)
            col += len(ids)
        means = nn.matmul(avg, nn.embedding_lookup(self.emb, flat))
        return nn.tanh(means @ self.w + self.b)


class MiniAttentionEncoder(nn.Module):
    """Tiny transformer over ``[CLS] s_1 [SEP] [CLS] s_2 [SEP] ...``.

    Input embeddings are token + learned position + interval segment
    (E_A / E_B alternating by sentence).  Sentence ``i`` is read from the
    output at its ``[CLS]`` position.
    """

    def __init__(self, cfg: EncoderConfig, vocab_size: int, rng: np.random.Generator,
                 cls_id: int, sep_id: int):
        super().__init__()
        self.cfg = cfg
        self.cls_id, self.sep_id = cls_id, sep_id
        d, f = cfg.embed_dim, cfg.ff_dim
        std = 1.0 / math.sqrt(d)
        self.tok = self.add_param("tok", nn.normal_init(rng, (vocab_size, d), std))
        self.pos = self.add_param("pos", nn.normal_init(rng, (cfg.max_tokens, d), std))
        self.seg = self.add_param("seg", nn.normal_init(rng, (2, d), std))
        self.layers = []
        for k in range(cfg.num_layers):
            layer = nn.Module()
            for name in ("wq", "wk", "wv", "wo"):
                layer.add_param(name, nn.xavier_init(rng, (d, d)))
            layer.add_param("ln1_g", np.ones(d))
            layer.add_param("ln1_b", np.zeros(d))
            layer.add_param("w1", nn.xavier_init(rng, (d, f)))
            layer.add_param("b1", np.zeros(f))
            layer.add_param("w2", nn.xavier_init(rng, (f, d)))
            layer.add_param("b2", np.zeros(d))
            layer.add_param("ln2_g", np.ones(d))
            layer.add_param("ln2_b", np.zeros(d))
            self.layers.append(self.add_module(f"layer{k}", layer))
        self.w = self.add_param("w", nn.xavier_init(rng, (d, cfg.hidden_dim)))
        self.b = self.add_param("b", np.zeros(cfg.hidden_dim))

    def stream(self, doc_ids: list[list[int]]) -> tuple[list[int], list[int], list[int]]:
        """Token ids, segment ids and [CLS] positions of the flattened input."""
        doc_ids = _truncate(doc_ids, self.cfg.max_tokens - 2 * len(doc_ids))
        toks, segs, cls_pos = [], [], []
        for seg, ids in zip(segment_ids(len(doc_ids)), doc_ids):
            cls_pos.append(len(toks))
            piece = [self.cls_id] + list(ids) + [self.sep_id]
            toks.extend(piece)
            segs.extend([seg] * len(piece))
        return toks, segs, cls_pos

    def __call__(self, doc_ids: list[list[int]]) -> Tensor:
        toks, segs, cls_pos = self.stream(doc_ids)
        x = (nn.embedding_lookup(self.tok, toks)
             + nn.embedding_lookup(self.pos, list(range(len(toks))))
             + nn.embedding_lookup(self.seg, segs))
        scale = 1.0 / math.sqrt(self.cfg.embed_dim)
        for layer in self.layers:
            p = layer._params
            q, k, v = x @ p["wq"], x @ p["wk"], x @ p["wv"]
            attn = nn.softmax(nn.matmul(q, k.T) * scale)
            x = nn.layer_norm(x + nn.matmul(attn, v) @ p["wo"], p["ln1_g"], p["ln1_b"])
            ff = nn.relu(x @ p["w1"] + p["b1"]) @ p["w2"] + p["b2"]
            x = nn.layer_norm(x + ff, p["ln2_g"], p["ln2_b"])
        return nn.tanh(x[np.asarray(cls_pos)] @ self.w + self.b)


@dataclass
class ExtractionResult:
    selected: list[int]
    log_probs: list[float]
    stopped: bool
    log_prob_tensors: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        assert len(self.log_probs) == len(self.selected) + (1 if self.stopped else 0)

    @property
    def actions(self) -> list[int]:
        """Selected indices, followed by -1 for the stop action when taken."""
        return self.selected + ([-1] if self.stopped else [])

    def to_json(self, doc_id: str) -> dict:
        return {"id": doc_id, "selected": self.selected, "stopped": self.stopped,
                "log_probs": self.log_probs}


@dataclass
class DecoderState:
    z: Tensor
    cell: Tensor
    selected: list[int]
    mask: np.ndarray


class PointerDecoder(nn.Module):
    """LSTM decoder with glimpse attention; shared layout for actor and critic."""

    def __init__(self, d: int, rng: np.random.Generator):
        super().__init__()
        self.d = d
        self.start = self.add_param("start", nn.uniform_init(rng, d))
        self.lstm_wx = self.add_param("lstm_wx", nn.uniform_init(rng, (d, 4 * d)))
        self.lstm_wh = self.add_param("lstm_wh", nn.uniform_init(rng, (d, 4 * d)))
        bias = np.zeros(4 * d)
        bias[d:2 * d] = 1.0  # forget gate
        self.lstm_b = self.add_param("lstm_b", bias)
        self.w_g1 = self.add_param("w_g1", nn.uniform_init(rng, (d, d)))
        self.w_g2 = self.add_param("w_g2", nn.uniform_init(rng, (d, d)))
        self.v_g = self.add_param("v_g", nn.uniform_init(rng, d))
        self.w_e = self.add_param("w_e", nn.uniform_init(rng, (d, d)))

    def initial_state(self, n_actions: int) -> DecoderState:
        zeros = Tensor(np.zeros((1, self.d)))
        return DecoderState(zeros, zeros, [], np.zeros(n_actions, dtype=bool))

    def step(self, state: DecoderState, inp: Tensor, proj_g: Tensor) -> Tensor:
        """Advance the LSTM on ``inp`` and return the glimpse vector e_t."""
        state.z, state.cell = nn.lstm_cell(nn.reshape(inp, (1, self.d)), state.z, state.cell,
                                           self.lstm_wx, self.lstm_wh, self.lstm_b)
        return _glimpse_from_proj(proj_g, state.z, self.w_g2, self.v_g)[0]

    def step_input(self, state: DecoderState, proj_g: Tensor) -> Tensor:
        return self.start if not state.selected else proj_g[state.selected[-1]]


def _glimpse_from_proj(proj_g: Tensor, z: Tensor, w_g2, v_g) -> tuple[Tensor, Tensor]:
    c = nn.tanh(proj_g + nn.reshape(z, (-1,)) @ w_g2) @ v_g
    alpha = nn.softmax(c)
    return alpha @ proj_g, alpha


def glimpse(H: Tensor, z: Tensor, w_g1, w_g2, v_g) -> Tensor:
    """e_t = sum_i alpha_i W_g1 h_i, alpha = softmax_i(v_g . tanh(W_g1 h_i + W_g2 z)).

    ``H`` is the sentence matrix with ``h_stop`` as its last row; the stop
    row is not attended over.
    """
    return _glimpse_from_proj(nn.as_tensor(H)[:-1] @ w_g1, nn.as_tensor(z), w_g2, v_g)[0]


def pointer_scores(H: Tensor, e: Tensor, w_e, w_h, v_m) -> Tensor:
    """u_i = v_m . tanh(W_e e + W_h h_i) for every row of ``H`` (stop included)."""
    return nn.tanh(nn.as_tensor(H) @ w_h + nn.as_tensor(e) @ w_e) @ v_m


def pointer_distribution(H: Tensor, e: Tensor, mask, w_e, w_h, v_m) -> Tensor:
    """Probabilities over rows of ``H``; ``mask`` marks blocked rows (probability 0)."""
    return nn.softmax(pointer_scores(H, e, w_e, w_h, v_m), mask=mask)


class ExtractorPolicy(nn.Module):
    """Encoder + pointer decoder + stop row; all actor parameters."""

    def __init__(self, cfg: EncoderConfig, vocab: Vocab, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.vocab = vocab
        rng = nn.make_rng(seed, 0)
        if cfg.variant is EncoderVariant.BAG_MEAN:
            enc = BagMeanEncoder(cfg, len(vocab), rng)
        else:
            enc = MiniAttentionEncoder(cfg, len(vocab), rng, vocab.id(CLS), vocab.id(SEP))
        self.encoder = self.add_module("encoder", enc)
        d = cfg.hidden_dim
        self.h_stop = self.add_param("h_stop", np.zeros(d))
        self.decoder = self.add_module("decoder", PointerDecoder(d, rng))
        self.w_h = self.add_param("w_h", nn.uniform_init(rng, (d, d)))
        self.v_m = self.add_param("v_m", nn.uniform_init(rng, d))

    @classmethod
    def build_vocab(cls, docs: Sequence[Document], max_size: int | None = None) -> Vocab:
        stream = (t for doc in docs for s in doc.sentences for t in s.tokens)
        return Vocab.build(stream, specials=(UNK, CLS, SEP), max_size=max_size)

    def doc_ids(self, doc: Document) -> list[list[int]]:
        return [self.vocab.ids(s.tokens) for s in doc.sentences]

    def encode(self, doc: Document) -> Tensor:
        """Sentence matrix ``[n + 1, hidden]`` with ``h_stop`` as the last row."""
        if not len(doc.sentences):
            raise ValueError("cannot encode an empty document")
        rows = self.encoder(self.doc_ids(doc))
        return nn.concat([rows, nn.reshape(self.h_stop, (1, -1))], axis=0)

    def copy_from(self, other: "ExtractorPolicy") -> None:
        self.load_state_dict(other.state_dict())

    # -- episodes -----------------------------------------------------------

    def _context(self, doc: Document):
        H = self.encode(doc)
        proj_g = H[:-1] @ self.decoder.w_g1
        proj_p = H @ self.w_h
        return H, proj_g, proj_p

    def _log_probs(self, state: DecoderState, proj_g: Tensor, proj_p: Tensor,
                   mask: np.ndarray | None = None) -> Tensor:
        e = self.decoder.step(state, self.decoder.step_input(state, proj_g), proj_g)
        u = nn.tanh(proj_p + e @ self.decoder.w_e) @ self.v_m
        return nn.log_softmax(u, mask=state.mask if mask is None else mask)

    def teacher_forced(self, doc: Document, actions: Sequence[int]) -> list[Tensor]:
        """Log-probability tensors of ``actions`` (-1 or n means stop) under teacher forcing."""
        _, proj_g, proj_p = self._context(doc)
        n = len(doc)
        state = self.decoder.initial_state(n + 1)
        out = []
        for a in actions:
            a = n if a < 0 else a
            if a > n or (a < n and state.mask[a]):
                raise ValueError(f"action {a} is out of range or already selected")
            logp = self._log_probs(state, proj_g, proj_p)
            out.append(logp[a])
            if a == n:
                break
            state.selected.append(a)
            state.mask[a] = True
        return out

    def run_episode(self, doc: Document, mode: DecodeMode = DecodeMode.GREEDY, max_k: int = 5,
                    trigram_block: bool = False, seed: int = 0,
                    rng: np.random.Generator | None = None) -> ExtractionResult:
        if max_k < 1:
            raise ValueError(f"max_k must be >= 1, got {max_k}")
        mode = DecodeMode(mode)
        if rng is None and mode is DecodeMode.SAMPLE:
            rng = nn.make_rng(seed, 1)
        _, proj_g, proj_p = self._context(doc)
        n = len(doc)
        state = self.decoder.initial_state(n + 1)
        seen_trigrams: set = set()
        sent_trigrams = [trigram_set(s.tokens) for s in doc.sentences] if trigram_block else None
        tensors, stopped = [], False
        while len(state.selected) < min(max_k, n):
            mask = state.mask.copy()
            if trigram_block:
                for i in range(n):
                    if not mask[i] and sent_trigrams[i] & seen_trigrams:
                        mask[i] = True
            logp = self._log_probs(state, proj_g, proj_p, mask)
            probs = np.exp(logp.data)
            a = _choose(probs, mask, mode, rng)
            tensors.append(logp[a])
            if a == n:
                stopped = True
                break
            state.selected.append(a)
            state.mask[a] = True
            if trigram_block:
                seen_trigrams |= sent_trigrams[a]
        return ExtractionResult(list(state.selected), [float(t.data) for t in tensors],
                                stopped, tensors)

    # -- persistence ----------------------------------------------------------

    def save(self, path, extra: dict | None = None) -> None:
        meta = {"kind": "extractor", "config": _cfg_json(self.cfg), "vocab": self.vocab.tokens}
        meta.update(extra or {})
        nn.save_checkpoint(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path) -> "ExtractorPolicy":
        tensors, meta = nn.load_checkpoint(path)
        if meta.get("kind") != "extractor":
            raise nn.CheckpointError(f"{path}: not an extractor checkpoint")
        policy = cls(EncoderConfig(**meta["config"]), Vocab(meta["vocab"]))
        policy.load_state_dict({k: v for k, v in tensors.items() if not k.startswith("critic.")})
        return policy


def _cfg_json(cfg: EncoderConfig) -> dict:
    out = asdict(cfg)
    out["variant"] = cfg.variant.value
    return out


def _choose(probs: np.ndarray, mask: np.ndarray, mode: DecodeMode, rng) -> int:
    if mode is DecodeMode.GREEDY:
        return int(np.argmax(np.where(mask, -1.0, probs)))
    cdf = np.cumsum(probs)
    a = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    admissible = np.flatnonzero(~mask)
    if a >= len(probs) or mask[a]:
        a = int(admissible[-1])
    return a


def run_episode(doc: Document, policy: ExtractorPolicy, mode: DecodeMode = DecodeMode.GREEDY,
                max_k: int = 5, trigram_block: bool = False, seed: int = 0) -> ExtractionResult:
    return policy.run_episode(doc, mode, max_k, trigram_block, seed)


class Critic(nn.Module):
    """State-value network sharing the actor's encoder.

    Same decoder layout as the actor; the pointer output layer is replaced
    by a scalar head ``V_t = v_c . tanh(W_e e_t) + b_c``.
    """

    def __init__(self, actor: ExtractorPolicy, seed: int = 0):
        super().__init__()
        self.actor = actor
        self.encoder = self.add_module("encoder", actor.encoder)
        rng = nn.make_rng(seed, 2)
        d = actor.cfg.hidden_dim
        self.decoder = self.add_module("decoder", PointerDecoder(d, rng))
        self.decoder.load_state_dict(actor.decoder.state_dict())
        self.v_c = self.add_param("v_c", nn.uniform_init(rng, d))
        self.b_c = self.add_param("b_c", np.zeros(()))

    def values(self, doc: Document, actions: Sequence[int]) -> list[Tensor]:
        """V_t for the state before each action along ``actions``."""
        rows = self.encoder(self.actor.doc_ids(doc))
        proj_g = rows @ self.decoder.w_g1
        state = self.decoder.initial_state(len(doc) + 1)
        out = []
        for a in actions:
            e = self.decoder.step(state, self.decoder.step_input(state, proj_g), proj_g)
            out.append(nn.tanh(e @ self.decoder.w_e) @ self.v_c + self.b_c)
            if a < 0 or a >= len(doc):
                break
            state.selected.append(a)
        return out

    def own_state(self) -> dict[str, np.ndarray]:
        """Parameters not shared with the actor."""
        return {k: v for k, v in self.state_dict().items() if not k.startswith("encoder.")}

    def save(self, path) -> None:
        nn.save_checkpoint(path, self.own_state(), {"kind": "critic"})

    @classmethod
    def load(cls, path, actor: ExtractorPolicy) -> "Critic":
        tensors, meta = nn.load_checkpoint(path)
        if meta.get("kind") != "critic":
            raise nn.CheckpointError(f"{path}: not a critic checkpoint")
        critic = cls(actor)
        critic.load_state_dict(tensors, strict=False)
        if set(tensors) != set(critic.own_state()):
            raise nn.CheckpointError(f"{path}: critic parameters do not match the actor")
        return critic
