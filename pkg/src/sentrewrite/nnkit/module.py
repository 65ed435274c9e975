"""Parameter containers and initializers."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .autograd import Parameter, default_dtype

RECURRENT_INIT = 0.08
EMBED_STD = 0.01


def uniform_init(rng: np.random.Generator, shape, scale: float = RECURRENT_INIT) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


def xavier_init(rng: np.random.Generator, shape) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[-1]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def normal_init(rng: np.random.Generator, shape, std: float = EMBED_STD) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


class Module:
    """Holds named :class:`Parameter` objects and child modules."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}
        self._children: dict[str, Module] = {}

    def add_param(self, name: str, value) -> Parameter:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        p = Parameter(np.array(value, dtype=default_dtype()), name=name)
        self._params[name] = p
        return p

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def _walk(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child._walk(f"{prefix}{name}.")

    def named_parameters(self) -> dict[str, Parameter]:
        out = {}
        for name, p in self._walk():
            # shared submodules appear once, under their first name
            if all(q is not p for q in out.values()):
                out[name] = p
        return out

    def parameters(self) -> list[Parameter]:
        return list(self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: dict, strict: bool = True) -> None:
        params = self.named_parameters()
        if strict:
            missing = sorted(set(params) - set(state))
            unexpected = sorted(set(state) - set(params))
            if missing or unexpected:
                raise KeyError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for name, p in params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.data.dtype, copy=True)
            p.zero_grad()
