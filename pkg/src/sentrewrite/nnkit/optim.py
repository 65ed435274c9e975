"""Adam, global-norm gradient clipping and the warmup learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .autograd import Parameter


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def _named(params) -> list[tuple[str, Parameter]]:
    if isinstance(params, Mapping):
        return list(params.items())
    return [(p.name, p) for p in params]


def adam_step(params: Mapping[str, Parameter] | Iterable[Parameter], states: dict, lr: float,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> None:
    """Bias-corrected Adam update in place.

    ``states`` is keyed by the mapping key of each parameter (or
    ``Parameter.name`` when a plain iterable is given).
    """
    b1, b2 = betas
    for key, p in _named(params):
        st = states.get(key)
        if st is None:
            st = states[key] = AdamState(np.zeros_like(p.data), np.zeros_like(p.data))
        g = p.grad
        st.step += 1
        st.m = b1 * st.m + (1.0 - b1) * g
        st.v = b2 * st.v + (1.0 - b2) * g * g
        m_hat = st.m / (1.0 - b1 ** st.step)
        v_hat = st.v / (1.0 - b2 ** st.step)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    def __init__(self, params: Mapping[str, Parameter] | Iterable[Parameter],
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.named = dict(_named(params))
        self.betas = betas
        self.eps = eps
        self.states: dict[str, AdamState] = {}

    @property
    def params(self) -> list[Parameter]:
        return list(self.named.values())

    def step(self, lr: float) -> None:
        adam_step(self.named, self.states, lr, self.betas, self.eps)

    def zero_grad(self) -> None:
        for p in self.named.values():
            p.zero_grad()


def global_grad_norm(params: Iterable[Parameter]) -> float:
    return math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params))


def clip_global_norm(params: Iterable[Parameter], threshold: float = 2.0) -> float:
    """Rescale gradients so their joint L2 norm is at most ``threshold``.

    Returns the norm before clipping.
    """
    params = list(params)
    norm = global_grad_norm(params)
    if norm > threshold:
        scale = threshold / norm
        for p in params:
            p.grad = p.grad * scale
    return norm


@dataclass(frozen=True)
class LrSchedule:
    base: float = 2e-3
    warmup: int = 10000

    def __post_init__(self):
        if self.warmup < 1:
            raise ValueError("warmup must be >= 1")


def lr_at(step: int, sched: LrSchedule | None = None) -> float:
    """``base * min(step**-0.5, step * warmup**-1.5)``; peaks at ``step == warmup``."""
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    sched = sched or LrSchedule()
    return sched.base * min(step ** -0.5, step * sched.warmup ** -1.5)
