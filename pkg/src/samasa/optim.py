"""Named parameter storage and gradient-descent updates.

A :class:`ParameterStore` owns every trainable tensor under a unique dotted
name ("encoder.layer0.attn.wq", ...), the RNG used for initialization and
dropout, the global step counter, and per-parameter optimizer slots. One
store must never be updated by two concurrent trainers; frozen stores are
safe to share across threads for inference.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class NumericsError(RuntimeError):
    """Non-finite value reached the optimizer."""


def xavier_uniform(rng: np.random.Generator, shape, dtype) -> np.ndarray:
    """Uniform(+-sqrt(6/(fan_in+fan_out))); 3-D stacks use the trailing dims."""
    if len(shape) >= 2:
        fan_in, fan_out = shape[-2], shape[-1]
    else:
        fan_in = fan_out = shape[0]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class ParameterStore:
    """Create-or-fetch registry of trainable tensors."""

    INITS = ("xavier", "zeros", "ones", "embedding")

    def __init__(self, seed: int = 0, dtype=np.float32):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self.rng = np.random.default_rng(self.seed)
        self.step_count = 0
        self._params: dict[str, Tensor] = {}
        self.opt_state: dict[str, dict[str, np.ndarray]] = {}

    def parameter(self, name: str, shape, init: str = "xavier") -> Tensor:
        """Return the named parameter, creating it on first request.

        Creation order is deterministic for a fixed model build, which keeps
        seeded initialization reproducible.
        """
        shape = tuple(int(s) for s in shape)
        if name in self._params:
            p = self._params[name]
            if p.data.shape != shape:
                raise ValueError(f"parameter {name!r} exists with shape {p.data.shape}, requested {shape}")
            return p
        if init == "xavier":
            data = xavier_uniform(self.rng, shape, self.dtype)
        elif init == "zeros":
            data = np.zeros(shape, dtype=self.dtype)
        elif init == "ones":
            data = np.ones(shape, dtype=self.dtype)
        elif init == "embedding":
            data = (self.rng.normal(0.0, 0.02, size=shape)).astype(self.dtype)
        else:
            raise ValueError(f"unknown init {init!r}; expected one of {self.INITS}")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self):
        for p in self._params.values():
            p.grad = None

    def copy_values(self) -> dict[str, np.ndarray]:
        """Snapshot of all parameter arrays (used for best-epoch keeping)."""
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]):
        for name, arr in values.items():
            if name not in self._params:
                raise KeyError(f"unknown parameter {name!r}")
            p = self._params[name]
            if p.data.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name!r}: {p.data.shape} vs {arr.shape}")
            p.data = arr.astype(self.dtype, copy=True)


class Optimizer:
    """Adam by default, plain SGD behind ``algorithm='sgd'``.

    The defaults (lr 0.001, betas 0.9/0.999, eps 1e-8) follow common
    transformer fine-tuning practice; learning rate is always caller-visible
    config. No schedule; optional global-norm gradient clipping.
    """

    def __init__(self, store: ParameterStore, lr: float = 0.001, algorithm: str = "adam",
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 clip_norm: float | None = None):
        if algorithm not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer algorithm {algorithm!r}")
        self.store = store
        self.lr = float(lr)
        self.algorithm = algorithm
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm

    def step(self):
        """Apply one update, zero the grads, bump the step counter.

        Parameters without grads are left untouched. A NaN/Inf gradient
        aborts, naming the offending parameter.
        """
        store = self.store
        named_grads = []
        for name in store.names():
            p = store[name]
            if p.grad is None:
                continue
            if not np.isfinite(p.grad).all():
                raise NumericsError(f"non-finite gradient for parameter {name!r}")
            named_grads.append((name, p))

        scale = 1.0
        if self.clip_norm is not None and named_grads:
            total = np.sqrt(sum(float((p.grad.astype(np.float64) ** 2).sum()) for _, p in named_grads))
            if total > self.clip_norm:
                scale = self.clip_norm / total

        t = store.step_count + 1
        for name, p in named_grads:
            g = p.grad if scale == 1.0 else p.grad * np.asarray(scale, dtype=p.dtype)
            if self.algorithm == "sgd":
                p.data = p.data - np.asarray(self.lr, dtype=p.dtype) * g
            else:
                state = store.opt_state.setdefault(name, {
                    "m": np.zeros_like(p.data), "v": np.zeros_like(p.data)})
                state["m"] = self.beta1 * state["m"] + (1 - self.beta1) * g
                state["v"] = self.beta2 * state["v"] + (1 - self.beta2) * (g * g)
                mhat = state["m"] / (1 - self.beta1 ** t)
                vhat = state["v"] / (1 - self.beta2 ** t)
                p.data = p.data - (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.dtype)
            p.grad = None
        store.step_count = t
