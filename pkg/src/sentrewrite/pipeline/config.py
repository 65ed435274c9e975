"""Run configuration: every hyperparameter in one flat, JSON-serializable record."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

CONFIG_FILENAME = "resolved_config.json"


@dataclass(frozen=True)
class RunConfig:
    # extractor
    encoder: str = "bag_mean"
    embed_dim: int = 32
    hidden_dim: int = 256
    num_layers: int = 1
    ff_dim: int = 64
    max_tokens: int = 512
    max_k: int = 5
    # optimisation
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    lr_base: float = 2e-3
    warmup: int = 10000
    clip: float = 2.0
    ext_epochs: int = 30
    # abstractor
    abs_embed_dim: int = 128
    abs_hidden_dim: int = 256
    abs_lr: float = 1e-3
    abs_epochs: int = 10
    abs_batch_size: int = 8
    abs_max_len: int = 30
    # reinforcement learning
    gamma: float = 0.95
    stop_lambda: float = 0.08
    rl_lr: float = 4e-6
    rl_epochs: int = 1
    rl_batch_size: int = 1
    reward_mode: str = "summary"
    stop_mode: str = "add"
    normalize_adv: bool = False
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("seed", "normalize_adv") or isinstance(value, str):
                continue
            if value <= 0 and f.name not in ("gamma", "stop_lambda", "rl_lr"):
                raise ValueError(f"config value {f.name} must be positive, got {value}")
            if value < 0:
                raise ValueError(f"config value {f.name} must be >= 0, got {value}")
        if self.gamma > 1:
            raise ValueError("gamma must be in [0, 1]")
        if self.adam_beta1 >= 1 or self.adam_beta2 >= 1:
            raise ValueError("Adam betas must be below 1")

    @property
    def betas(self) -> tuple[float, float]:
        return (self.adam_beta1, self.adam_beta2)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(obj) - set(known))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**obj)

    def override(self, **kwargs) -> "RunConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_json(json.load(fh))


def save_config(cfg: RunConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
