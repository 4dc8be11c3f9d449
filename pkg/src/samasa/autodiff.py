"""Dense tensors with reverse-mode automatic differentiation.

Small CPU-only engine backed by numpy. Every operation whose inputs require
gradients records its parents and a backward closure; ``backward`` on a
scalar loss replays those closures in exact reverse creation order (the
creation counter doubles as the topological index, since operands are always
created before their consumers). float32 is the training default; build
tensors with ``dtype=np.float64`` for tight gradient checks.

Tensors are treated as immutable once produced by a forward pass, so frozen
graphs can be read concurrently; training mutates parameters and must stay
single-threaded per parameter set.
"""

from __future__ import annotations

import itertools

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "GraphError",
    "backward",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "tensor_sum",
    "mean",
    "relu",
    "tanh",
    "exp",
    "log",
    "sigmoid",
    "softplus",
    "softmax",
    "log_softmax",
    "cross_entropy",
    "layer_norm",
    "dropout",
    "embedding_lookup",
]

# Large finite stand-in for -inf in score masks: exp() underflows to zero in
# both float32 and float64 without producing inf/nan arithmetic.
MASK_SCORE = -1e9

_creation_counter = itertools.count()


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class GraphError(RuntimeError):
    """Compute-graph misuse: non-scalar backward, repeated backward, etc."""


class Tensor:
    """Dense array with an optional gradient slot.

    ``requires_grad`` marks trainable leaves; results of ops on such leaves
    propagate the flag. ``grad`` is filled by :func:`backward` and has the
    same shape as ``data``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn",
                 "_op", "_order", "_backward_done")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None
        self._op = "leaf"
        self._order = next(_creation_counter)
        self._backward_done = False

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def T(self):
        return transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_error(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    # -- operator sugar --------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other, self.dtype)))

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return tensor_getitem(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)


def _scalar_error(t):
    raise GraphError(f"item() requires a single-element tensor, got shape {t.shape}")


def _as_tensor(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _node(data, parents, backward_fn, op):
    """Wrap an op result; records the graph only when a parent needs grads."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
        out._op = op
    else:
        out._op = op
    return out


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss: Tensor):
    """Populate ``grad`` on every requires_grad ancestor of a scalar loss."""
    if loss.data.size != 1:
        raise GraphError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._backward_done:
        raise GraphError("backward already ran for this graph; rebuild the forward pass first")

    nodes = []
    seen = set()
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._order, reverse=True)

    loss.grad = np.ones_like(loss.data)
    for t in nodes:
        if t._backward_fn is not None and t.grad is not None:
            t._backward_fn(t.grad)
    loss._backward_done = True


# -- elementwise arithmetic ------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a.dtype)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from None

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), bwd, "add")


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a.dtype)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from None

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), bwd, "mul")


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        _accum(a, -g)

    return _node(-a.data, (a,), bwd, "neg")


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0)

    def bwd(g):
        _accum(a, g * (a.data > 0))

    return _node(data, (a,), bwd, "relu")


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def bwd(g):
        _accum(a, g * (1 - data * data))

    return _node(data, (a,), bwd, "tanh")


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def bwd(g):
        _accum(a, g * data)

    return _node(data, (a,), bwd, "exp")


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def bwd(g):
        _accum(a, g / a.data)

    return _node(data, (a,), bwd, "log")


def sigmoid(a: Tensor) -> Tensor:
    # exp of the negated magnitude keeps both tails finite
    data = np.where(a.data >= 0,
                    1.0 / (1.0 + np.exp(-np.abs(a.data))),
                    np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
    data = data.astype(a.dtype, copy=False)

    def bwd(g):
        _accum(a, g * data * (1 - data))

    return _node(data, (a,), bwd, "sigmoid")


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)), stable on both tails."""
    data = np.maximum(a.data, 0) + np.log1p(np.exp(-np.abs(a.data)))

    def bwd(g):
        sig = np.where(a.data >= 0,
                       1.0 / (1.0 + np.exp(-np.abs(a.data))),
                       np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
        _accum(a, g * sig)

    return _node(data, (a,), bwd, "softplus")


# -- shape ops ---------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} x {b.data.shape}")
    data = a.data @ b.data

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(data, (a, b), bwd, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")

    def bwd(g):
        _accum(a, g.T)

    return _node(a.data.T.copy(), (a,), bwd, "transpose")


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def bwd(g):
        _accum(a, g.reshape(a.data.shape))

    return _node(data, (a,), bwd, "reshape")


def tensor_getitem(a: Tensor, key) -> Tensor:
    data = a.data[key]
    fancy = _is_fancy(key)

    def bwd(g):
        if not a.requires_grad:
            return
        buf = np.zeros_like(a.data)
        if fancy:
            np.add.at(buf, key, g)
        else:
            buf[key] += g
        _accum(a, buf)

    out = _node(np.array(data, copy=True), (a,), bwd, "getitem")
    return out


def _is_fancy(key) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return any(isinstance(k, (list, np.ndarray)) for k in parts)


def concat(tensors, axis=0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat of zero tensors")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def bwd(g):
        start = 0
        for t, size in zip(tensors, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, start + size)
            _accum(t, g[tuple(idx)])
            start += size

    return _node(data, tuple(tensors), bwd, "concat")


def tensor_sum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg, a.data.shape).copy())

    return _node(data, (a,), bwd, "sum")


def mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# -- neural-net ops ----------------------------------------------------------


def softmax(a: Tensor, axis=-1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accum(a, data * (g - dot))

    return _node(data, (a,), bwd, "softmax")


def log_softmax(a: Tensor, axis=-1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse

    def bwd(g):
        p = np.exp(data)
        _accum(a, g - p * g.sum(axis=axis, keepdims=True))

    return _node(data, (a,), bwd, "log_softmax")


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-softmax probability of the target classes.

    ``logits`` is [batch, classes]; ``targets`` integer class indices.
    Gradient is (softmax - one_hot) / batch.
    """
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy expects [batch, classes] logits, got {logits.shape}")
    t = np.asarray(targets, dtype=np.intp)
    b, n = logits.data.shape
    if t.shape != (b,):
        raise ShapeError(f"cross_entropy: {b} rows but {t.shape} targets")
    if t.size and (t.min() < 0 or t.max() >= n):
        bad = int(t[(t < 0) | (t >= n)][0])
        raise IndexError(f"cross_entropy: target {bad} out of range for {n} classes")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    data = -logp[np.arange(b), t].mean()

    def bwd(g):
        p = np.exp(logp)
        p[np.arange(b), t] -= 1.0
        _accum(logits, (g * p / b).astype(logits.dtype, copy=False))

    return _node(np.asarray(data, dtype=logits.dtype), (logits,), bwd, "cross_entropy")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps=1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gain.data + bias.data

    def bwd(g):
        d = x.data.shape[-1]
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        _accum(x, inv * (dxhat - m1 - xhat * m2))
        axes = tuple(range(g.ndim - 1))
        _accum(gain, (g * xhat).sum(axis=axes) if axes else g * xhat)
        _accum(bias, g.sum(axis=axes) if axes else g)

    return _node(data.astype(x.dtype, copy=False), (x, gain, bias), bwd, "layer_norm")


def dropout(x: Tensor, rate: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Zero entries with probability ``rate``; survivors scaled by 1/(1-rate).

    Identity in eval mode or at rate 0.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an explicit rng")
    mask = (rng.random(x.data.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    data = x.data * mask

    def bwd(g):
        _accum(x, g * mask)

    return _node(data.astype(x.dtype, copy=False), (x,), bwd, "dropout")


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Rows of ``table`` at integer ``ids``; grads accumulate over repeats."""
    idx = np.asarray(ids, dtype=np.intp)
    data = table.data[idx]

    def bwd(g):
        if not table.requires_grad:
            return
        buf = np.zeros_like(table.data)
        np.add.at(buf, idx, g)
        _accum(table, buf)

    return _node(np.array(data, copy=True), (table,), bwd, "embedding")
