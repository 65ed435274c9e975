"""Central finite-difference checks for analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .autograd import Tensor, backward


def _numeric_at(fn: Callable[[], Tensor], x: Tensor, k: int, eps: float) -> float:
    flat = x.data.reshape(-1)
    orig = flat[k]
    flat[k] = orig + eps
    plus = float(fn().data)
    flat[k] = orig - eps
    minus = float(fn().data)
    flat[k] = orig
    return (plus - minus) / (2 * eps)


def numeric_grad(fn: Callable[[], Tensor], x: Tensor, eps: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(x.data)
    for k in range(x.data.size):
        grad.reshape(-1)[k] = _numeric_at(fn, x, k, eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over all entries."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor],
                    eps: float = 1e-5, coords: int | None = None,
                    rng: np.random.Generator | None = None) -> float:
    """Max relative error between backprop and finite differences over ``inputs``.

    ``fn`` must rebuild the graph from the current values of ``inputs`` on
    every call and return a scalar.  With ``coords`` set, only that many
    entries (drawn uniformly over all inputs with ``rng``) are compared.
    """
    for x in inputs:
        x.requires_grad = True
        x.grad = np.zeros_like(x.data)
    backward(fn())
    analytic = [x.grad.copy() for x in inputs]
    if coords is None:
        return max((max_relative_error(a, numeric_grad(fn, x, eps))
                    for a, x in zip(analytic, inputs)), default=0.0)
    sizes = np.array([x.data.size for x in inputs])
    picks = (rng or np.random.default_rng()).choice(int(sizes.sum()),
                                                    size=min(coords, int(sizes.sum())),
                                                    replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for flat in np.sort(picks):
        j = int(np.searchsorted(offsets, flat, side="right") - 1)
        k = int(flat - offsets[j])
        a = analytic[j].reshape(-1)[k]
        n = _numeric_at(fn, inputs[j], k, eps)
        worst = max(worst, max_relative_error(np.array([a]), np.array([n])))
    return worst
