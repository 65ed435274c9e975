"""Reward shaping, discounted returns and advantage actor-critic fine-tuning."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import nnkit as nn
from .extractor import Critic, DecodeMode, ExtractorPolicy
from .rouge import rouge_l_sentence, rouge_l_summary
from .textproc import Document, ReferenceSummary, Sentence


class RewardMode(str, enum.Enum):
    SUMMARY_LEVEL = "summary"
    SENTENCE_LEVEL = "sentence"


class StopMode(str, enum.Enum):
    ADD = "add"          # stop reward is an extra step after the shaped rewards
    REPLACE = "replace"  # shaped rewards zeroed; only the stop step is rewarded


@dataclass(frozen=True)
class RLConfig:
    gamma: float = 0.95
    stop_lambda: float = 0.08
    rl_lr: float = 4e-6
    reward_mode: RewardMode = RewardMode.SUMMARY_LEVEL
    stop_mode: StopMode = StopMode.ADD
    normalize_adv: bool = False
    clip: float = 2.0
    max_k: int = 5
    batch_size: int = 1
    betas: tuple[float, float] = (0.9, 0.999)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.stop_lambda < 0:
            raise ValueError("stop_lambda must be >= 0")
        if self.rl_lr < 0:
            raise ValueError("rl_lr must be >= 0")
        object.__setattr__(self, "reward_mode", RewardMode(self.reward_mode))
        object.__setattr__(self, "stop_mode", StopMode(self.stop_mode))


@dataclass
class Episode:
    doc_id: str
    actions: list[int]
    log_probs: list[float]
    rewards: list[float]
    returns: list[float]
    values: list[float] = field(default_factory=list)
    final_return: float = 0.0
    stopped: bool = False

    def __post_init__(self):
        if not len(self.rewards) == len(self.returns) == len(self.actions):
            raise ValueError("rewards, returns and actions must have equal length")


def _summary_f1(sents: Sequence[Sentence], ref: ReferenceSummary) -> float:
    return rouge_l_summary(sents, ref.sentences).f1 if sents else 0.0


def shaped_rewards(selected: Sequence[Sentence], ref: ReferenceSummary, stopped: bool,
                   cfg: RLConfig = RLConfig()) -> list[float]:
    """Per-step rewards for an episode whose (rewritten) picks are ``selected``.

    Summary level: ``r_t = R(S_t) - R(S_{t-1})``.  Sentence level:
    ``r_t = ROUGE-L F1(s_t, a_t)`` against the t-th reference sentence, 0
    once ``t`` runs past the reference.  A stopped episode gets one extra
    reward ``stop_lambda * R(S)``.
    """
    rewards = []
    if cfg.reward_mode is RewardMode.SUMMARY_LEVEL:
        prev = 0.0
        for t in range(1, len(selected) + 1):
            cur = _summary_f1(selected[:t], ref)
            rewards.append(cur - prev)
            prev = cur
    else:
        for t, sent in enumerate(selected):
            rewards.append(rouge_l_sentence(sent.tokens, ref.sentences[t].tokens).f1
                           if t < len(ref.sentences) else 0.0)
    if cfg.stop_mode is StopMode.REPLACE:
        rewards = [0.0] * len(rewards)
    if stopped:
        rewards.append(cfg.stop_lambda * _summary_f1(selected, ref))
    return rewards


def returns(rewards: Sequence[float], gamma: float) -> list[float]:
    """Discounted tail sums ``R_t = r_t + gamma * R_{t+1}``."""
    out = [0.0] * len(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def advantage(rets: Sequence[float], values: Sequence[float]) -> list[float]:
    if len(rets) != len(values):
        raise ValueError(f"length mismatch: {len(rets)} returns vs {len(values)} values")
    return [float(r) - float(v) for r, v in zip(rets, values)]


def actor_loss(log_probs: Sequence[nn.Tensor], advantages: Sequence[float]) -> nn.Tensor:
    """``-(1/k) sum_t log p_t * A_t``; advantages enter as constants."""
    if len(log_probs) != len(advantages):
        raise ValueError(f"length mismatch: {len(log_probs)} log-probs vs "
                         f"{len(advantages)} advantages")
    if not log_probs:
        raise ValueError("empty episode")
    adv = nn.Tensor(np.asarray(advantages, dtype=float))
    return -nn.tsum(nn.stack(log_probs) * adv) / len(log_probs)


def critic_loss(values: Sequence[nn.Tensor], rets: Sequence[float]) -> nn.Tensor:
    if len(values) != len(rets):
        raise ValueError(f"length mismatch: {len(values)} values vs {len(rets)} returns")
    if not values:
        raise ValueError("empty episode")
    target = nn.Tensor(np.asarray(rets, dtype=float))
    return nn.mean(nn.square(nn.stack(values) - target))


def joint_parameters(actor: ExtractorPolicy, critic: Critic) -> dict[str, nn.Parameter]:
    """Actor and critic parameters with shared tensors listed once."""
    named = {"actor." + k: p for k, p in actor.named_parameters().items()}
    seen = {id(p) for p in named.values()}
    for k, p in critic.named_parameters().items():
        if id(p) not in seen:
            named["critic." + k] = p
            seen.add(id(p))
    return named


Rewriter = Callable[[Sentence], Sentence]


def identity_rewrite(s: Sentence) -> Sentence:
    return s


def run_training_episode(doc: Document, ref: ReferenceSummary, actor: ExtractorPolicy,
                         critic: Critic, rewrite: Rewriter, cfg: RLConfig,
                         rng: np.random.Generator) -> tuple[Episode, nn.Tensor]:
    """Sample one episode and build the joint actor + critic loss."""
    res = actor.run_episode(doc, DecodeMode.SAMPLE, max_k=cfg.max_k, rng=rng)
    picks = [rewrite(doc.sentences[i]) for i in res.selected]
    rewards = shaped_rewards(picks, ref, res.stopped, cfg)
    rets = returns(rewards, cfg.gamma)
    values = critic.values(doc, res.actions)
    adv = advantage(rets, [v.item() for v in values])
    if cfg.normalize_adv and len(adv) > 1:
        a = np.asarray(adv)
        adv = list((a - a.mean()) / (a.std() + 1e-8))
    loss = actor_loss(res.log_prob_tensors, adv) + critic_loss(values, rets)
    ep = Episode(doc.id, res.actions, res.log_probs, rewards, rets,
                 [v.item() for v in values], _summary_f1(picks, ref), res.stopped)
    return ep, loss


def a2c_finetune(pairs: Sequence[tuple[Document, ReferenceSummary]], actor: ExtractorPolicy,
                 critic: Critic | None = None, rewrite: Rewriter | None = None,
                 cfg: RLConfig = RLConfig(), epochs: int = 1, seed: int = 0,
                 on_epoch: Callable[[dict], None] | None = None) -> tuple[Critic, list[dict]]:
    """Sample one episode per document; one joint Adam step per ``cfg.batch_size`` episodes.

    The critic shares the actor's encoder, so encoder gradients from both
    losses accumulate before each update.  With the default batch size of 1
    every document triggers its own update.  Returns the critic and
    the per-epoch log ``{epoch, mean_return, mean_len, stop_rate}``.
    """
    if not pairs:
        raise ValueError("empty corpus")
    if critic is None:
        critic = Critic(actor, seed=seed)
    rewrite = rewrite or identity_rewrite
    opt = nn.Adam(joint_parameters(actor, critic), betas=cfg.betas)
    history = []
    for epoch in range(1, epochs + 1):
        rng = nn.make_rng(seed, 20, epoch)
        order = rng.permutation(len(pairs))
        finals, lengths, stops = [], [], 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            opt.zero_grad()
            for i in batch:
                doc, ref = pairs[i]
                ep, loss = run_training_episode(doc, ref, actor, critic, rewrite, cfg, rng)
                nn.backward(loss / len(batch))
                finals.append(ep.final_return)
                lengths.append(len(ep.actions) - int(ep.stopped))
                stops += ep.stopped
            nn.clip_global_norm(opt.params, cfg.clip)
            opt.step(cfg.rl_lr)
        row = {"epoch": epoch, "mean_return": float(np.mean(finals)),
               "mean_len": float(np.mean(lengths)), "stop_rate": stops / len(pairs)}
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)
    return critic, history
