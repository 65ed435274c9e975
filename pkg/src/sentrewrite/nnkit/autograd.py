"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` wraps an ndarray and remembers the op that produced it.
Calling :func:`backward` on a scalar walks the recorded graph in reverse
topological order and accumulates gradients into every reachable tensor
that requires them.  Only the ops the models in this package need are
provided; elementwise ops follow numpy broadcasting.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

_DEFAULT_DTYPE = np.float64
_GRAD_ENABLED = True


class ShapeError(ValueError):
    pass


class NoAdmissibleAction(ValueError):
    pass


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def no_grad():
    """Run ops without recording a graph (inference over frozen weights)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


class Parameter(Tensor):
    """A trainable leaf tensor; its ``grad`` always exists (zeros until reached)."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = "", dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    if needs:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))
    return _result(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))
    return _result(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))
    return _result(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return _result(a.data / b.data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: a._accumulate(-g))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: a._accumulate(g * (1.0 - y * y)))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = _sigmoid(a.data)
    return _result(y, (a,), lambda g: a._accumulate(g * y * (1.0 - y)))


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _result(y, (a,), lambda g: a._accumulate(g * y))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _result(np.log(a.data), (a,), lambda g: a._accumulate(g / a.data))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _result(a.data * mask, (a,), lambda g: a._accumulate(g * mask))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.data * a.data, (a,), lambda g: a._accumulate(2.0 * g * a.data))


# ------------------------------------------------------------------ reductions

def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    y = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape))
    return _result(np.asarray(y), (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


# --------------------------------------------------------------- shape & index

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g: a._accumulate(g.reshape(old)))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.T, (a,), lambda g: a._accumulate(g.T))


def _is_basic_index(idx) -> bool:
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (int, np.integer, slice)) or p is Ellipsis or p is None
               for p in parts)


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)
    basic = _is_basic_index(idx)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        a._accumulate(full)
    return _result(a.data[idx], (a,), backward)


def embedding_lookup(table, ids) -> Tensor:
    """Rows of ``table`` selected by integer ``ids`` (any shape)."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range for table of {table.shape[0]} rows")
    return getitem(table, ids)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        y = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat: incompatible shapes "
                         + " and ".join(str(t.shape) for t in tensors)) from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, sizes, axis=axis)):
            if t.requires_grad:
                t._accumulate(piece)
    return _result(y, tensors, backward)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        y = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("stack: incompatible shapes "
                         + " and ".join(str(t.shape) for t in tensors)) from None

    def backward(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(np.take(g, i, axis=axis))
    return _result(y, tensors, backward)


# ------------------------------------------------------------------- linear alg

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0 or a.shape[-1] != b.shape[0 if b.ndim == 1 else -2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    y = a.data @ b.data

    def backward(g):
        a2 = a.data if a.ndim > 1 else a.data[None, :]
        b2 = b.data if b.ndim > 1 else b.data[:, None]
        g2 = g.reshape(a2.shape[0], b2.shape[1])
        if a.requires_grad:
            a._accumulate((g2 @ b2.T).reshape(a.shape))
        if b.requires_grad:
            b._accumulate((a2.T @ g2).reshape(b.shape))
    return _result(y, (a, b), backward)


# --------------------------------------------------------------------- softmax

def _check_mask(x: np.ndarray, mask) -> np.ndarray | None:
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeError(f"softmax: mask shape {mask.shape} does not match scores {x.shape}")
    if np.any(mask.all(axis=-1)):
        raise NoAdmissibleAction("no admissible action")
    return mask


def _softmax_data(x: np.ndarray, mask) -> np.ndarray:
    if mask is not None:
        x = np.where(mask, -np.inf, x)
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(a, mask=None) -> Tensor:
    """Softmax over the last axis; ``mask`` marks blocked entries (probability 0)."""
    a = as_tensor(a)
    mask = _check_mask(a.data, mask)
    y = _softmax_data(a.data, mask)

    def backward(g):
        a._accumulate(y * (g - (g * y).sum(axis=-1, keepdims=True)))
    return _result(y, (a,), backward)


def log_softmax(a, mask=None) -> Tensor:
    """Log-softmax over the last axis; blocked entries are ``-inf``."""
    a = as_tensor(a)
    mask = _check_mask(a.data, mask)
    x = a.data if mask is None else np.where(mask, -np.inf, a.data)
    z = x - x.max(axis=-1, keepdims=True)
    y = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    p = np.exp(y)

    def backward(g):
        g = np.where(np.isfinite(y), g, 0.0)
        a._accumulate(g - p * g.sum(axis=-1, keepdims=True))
    return _result(y, (a,), backward)


# ------------------------------------------------------------------- fused ops

def lstm_cell(x, h, c, w_x, w_h, b) -> tuple[Tensor, Tensor]:
    """One step of a standard 4-gate LSTM (gate order: input, forget, cell, output).

    ``x`` is ``[batch, in]``, ``h`` and ``c`` are ``[batch, hidden]``,
    ``w_x`` is ``[in, 4*hidden]``, ``w_h`` is ``[hidden, 4*hidden]``.
    Returns the new hidden and cell states.
    """
    x, h, c, w_x, w_h, b = map(as_tensor, (x, h, c, w_x, w_h, b))
    d = h.shape[-1]
    if w_x.shape != (x.shape[-1], 4 * d) or w_h.shape != (d, 4 * d) or b.shape[-1] != 4 * d:
        raise ShapeError(f"lstm_cell: incompatible shapes {x.shape} and {w_x.shape}"
                         f" (hidden {h.shape}, recurrent {w_h.shape}, bias {b.shape})")
    z = x.data @ w_x.data + h.data @ w_h.data + b.data
    i = _sigmoid(z[..., :d])
    f = _sigmoid(z[..., d:2 * d])
    gg = np.tanh(z[..., 2 * d:3 * d])
    o = _sigmoid(z[..., 3 * d:])
    c_new = f * c.data + i * gg
    tc = np.tanh(c_new)
    h_new = o * tc
    packed = np.concatenate([h_new, c_new], axis=-1)

    def backward(gp):
        gh, gc = gp[..., :d], gp[..., d:]
        gc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            gc * gg * i * (1.0 - i),
            gc * c.data * f * (1.0 - f),
            gc * i * (1.0 - gg * gg),
            gh * tc * o * (1.0 - o),
        ], axis=-1)
        if x.requires_grad:
            x._accumulate(dz @ w_x.data.T)
        if h.requires_grad:
            h._accumulate(dz @ w_h.data.T)
        if c.requires_grad:
            c._accumulate(gc * f)
        x2 = x.data.reshape(-1, x.shape[-1])
        h2 = h.data.reshape(-1, d)
        dz2 = dz.reshape(-1, 4 * d)
        if w_x.requires_grad:
            w_x._accumulate(x2.T @ dz2)
        if w_h.requires_grad:
            w_h._accumulate(h2.T @ dz2)
        if b.requires_grad:
            b._accumulate(_unbroadcast(dz, b.shape))
    out = _result(packed, (x, h, c, w_x, w_h, b), backward)
    return out[..., :d], out[..., d:]


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    x, gain, bias = map(as_tensor, (x, gain, bias))
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gain.data + bias.data
    n = x.shape[-1]

    def backward(g):
        if gain.requires_grad:
            gain._accumulate(_unbroadcast(g * xhat, gain.shape))
        if bias.requires_grad:
            bias._accumulate(_unbroadcast(g, bias.shape))
        if x.requires_grad:
            gx = g * gain.data
            x._accumulate(inv / n * (n * gx - gx.sum(axis=-1, keepdims=True)
                                     - xhat * (gx * xhat).sum(axis=-1, keepdims=True)))
    return _result(y, (x, gain, bias), backward)


# -------------------------------------------------------------------- backward

def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(x) into ``x.grad`` for every reachable tensor."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topological(loss)
    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
            if not isinstance(node, Parameter):
                node.grad = None
        # drop the graph so intermediate arrays can be freed
        node._parents = ()
        node._backward = None
