"""Trainable transformer encoder over wordpieces with per-token mean pooling.

Deliberately small (default: 2 post-norm layers, dim 64, 4 heads) so the full
system trains from scratch on a CPU in seconds; it is NOT a stand-in for a
large pretrained multilingual encoder and no pretrained weights are involved.
Every token's hidden state is the arithmetic mean of its wordpiece states;
per-layer, per-head attention maps are captured for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    concat,
    dropout,
    embedding_lookup,
    layer_norm,
    matmul,
    relu,
    softmax,
    transpose,
)
from .optim import ParameterStore


class TooManyPiecesError(ValueError):
    """Input exceeds max_pieces; inputs are never silently truncated."""


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 2
    model_dim: int = 64
    heads: int = 4
    ff_dim: int = 128
    max_pieces: int = 128
    dropout: float = 0.3

    def __post_init__(self):
        for name in ("layers", "model_dim", "heads", "ff_dim", "max_pieces"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.model_dim % self.heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    def to_json(self) -> dict:
        return {"layers": self.layers, "model_dim": self.model_dim, "heads": self.heads,
                "ff_dim": self.ff_dim, "max_pieces": self.max_pieces, "dropout": self.dropout}

    @classmethod
    def from_json(cls, obj: dict) -> "EncoderConfig":
        return cls(**obj)


@dataclass
class EncoderOutput:
    piece_states: Tensor                     # [pieces, dim]
    token_states: Tensor                     # [n+1, dim], mean over each span
    attention_maps: list[list[np.ndarray]]   # [layer][head] -> (pieces, pieces)
    spans: list[tuple[int, int]]


class Encoder:
    def __init__(self, cfg: EncoderConfig, vocab_size: int, prefix: str = "encoder"):
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.prefix = prefix

    def init_params(self, store: ParameterStore):
        cfg = self.cfg
        p = self.prefix
        store.parameter(f"{p}.piece_emb", (self.vocab_size, cfg.model_dim), init="embedding")
        store.parameter(f"{p}.pos_emb", (cfg.max_pieces, cfg.model_dim), init="embedding")
        for i in range(cfg.layers):
            layer = f"{p}.layer{i}"
            for w in ("wq", "wk", "wv", "wo"):
                store.parameter(f"{layer}.attn.{w}", (cfg.model_dim, cfg.model_dim))
                store.parameter(f"{layer}.attn.b{w[1]}", (cfg.model_dim,), init="zeros")
            store.parameter(f"{layer}.ln1.gain", (cfg.model_dim,), init="ones")
            store.parameter(f"{layer}.ln1.bias", (cfg.model_dim,), init="zeros")
            store.parameter(f"{layer}.ln2.gain", (cfg.model_dim,), init="ones")
            store.parameter(f"{layer}.ln2.bias", (cfg.model_dim,), init="zeros")
            store.parameter(f"{layer}.ff.w1", (cfg.model_dim, cfg.ff_dim))
            store.parameter(f"{layer}.ff.b1", (cfg.ff_dim,), init="zeros")
            store.parameter(f"{layer}.ff.w2", (cfg.ff_dim, cfg.model_dim))
            store.parameter(f"{layer}.ff.b2", (cfg.model_dim,), init="zeros")

    def encode(self, store: ParameterStore, piece_ids, spans, train: bool = False,
               rng: np.random.Generator | None = None) -> EncoderOutput:
        """Contextual piece states plus mean-pooled token states.

        Deterministic in eval mode; dropout (training only) is applied to the
        pooled token states.
        """
        cfg = self.cfg
        p = self.prefix
        n_pieces = len(piece_ids)
        if n_pieces == 0:
            raise ValueError("cannot encode an empty piece sequence")
        if n_pieces > cfg.max_pieces:
            raise TooManyPiecesError(
                f"{n_pieces} pieces exceed max_pieces={cfg.max_pieces}; "
                "shorten the input instead of truncating")
        if spans[0][0] != 0 or spans[-1][1] != n_pieces or any(
                e1 != s2 for (_, e1), (s2, _) in zip(spans, spans[1:])):
            raise ValueError("spans must partition the piece sequence")

        x = embedding_lookup(store[f"{p}.piece_emb"], piece_ids) + \
            store[f"{p}.pos_emb"][0:n_pieces, :]

        maps: list[list[np.ndarray]] = []
        for i in range(cfg.layers):
            layer = f"{p}.layer{i}"
            attn_out, layer_maps = self._attention(store, layer, x)
            maps.append(layer_maps)
            x = layer_norm(x + attn_out, store[f"{layer}.ln1.gain"], store[f"{layer}.ln1.bias"])
            hidden = relu(matmul(x, store[f"{layer}.ff.w1"]) + store[f"{layer}.ff.b1"])
            ff_out = matmul(hidden, store[f"{layer}.ff.w2"]) + store[f"{layer}.ff.b2"]
            x = layer_norm(x + ff_out, store[f"{layer}.ln2.gain"], store[f"{layer}.ln2.bias"])

        pooled = matmul(Tensor(_pooling_matrix(spans, n_pieces, store.dtype)), x)
        pooled = dropout(pooled, cfg.dropout, train=train, rng=rng)
        return EncoderOutput(piece_states=x, token_states=pooled,
                             attention_maps=maps, spans=list(spans))

    def _attention(self, store, layer, x):
        cfg = self.cfg
        dh = cfg.model_dim // cfg.heads
        q = matmul(x, store[f"{layer}.attn.wq"]) + store[f"{layer}.attn.bq"]
        k = matmul(x, store[f"{layer}.attn.wk"]) + store[f"{layer}.attn.bk"]
        v = matmul(x, store[f"{layer}.attn.wv"]) + store[f"{layer}.attn.bv"]
        contexts = []
        maps = []
        for h in range(cfg.heads):
            cols = slice(h * dh, (h + 1) * dh)
            qh, kh, vh = q[:, cols], k[:, cols], v[:, cols]
            scores = matmul(qh, transpose(kh)) * (1.0 / np.sqrt(dh))
            probs = softmax(scores, axis=-1)
            maps.append(probs.data.copy())
            contexts.append(matmul(probs, vh))
        out = matmul(concat(contexts, axis=1), store[f"{layer}.attn.wo"]) + \
            store[f"{layer}.attn.bo"]
        return out, maps


def _pooling_matrix(spans, n_pieces, dtype) -> np.ndarray:
    pool = np.zeros((len(spans), n_pieces), dtype=dtype)
    for i, (s, e) in enumerate(spans):
        if e <= s:
            raise ValueError(f"span {i} is empty")
        pool[i, s:e] = 1.0 / (e - s)
    return pool


def import_piece_embeddings(store: ParameterStore, matrix, prefix: str = "encoder"):
    """Optional hook: overwrite the piece-embedding table with externally
    computed vectors (shape must match the existing parameter)."""
    name = f"{prefix}.piece_emb"
    if name not in store:
        raise KeyError(f"no parameter {name!r}; build the encoder first")
    param = store[name]
    arr = np.asarray(matrix, dtype=store.dtype)
    if arr.shape != param.data.shape:
        raise ValueError(
            f"embedding shape {arr.shape} does not match {param.data.shape}")
    param.data = arr.copy()


def attention_heatmap(output: EncoderOutput, layer: int, head: int) -> np.ndarray:
    """Aggregate a piece-level attention map to token level.

    Query rows within a span are averaged; key columns within a span are
    summed, so each token-level row still sums to 1.
    """
    if not 0 <= layer < len(output.attention_maps):
        raise IndexError(f"layer {layer} out of range [0, {len(output.attention_maps)})")
    heads = output.attention_maps[layer]
    if not 0 <= head < len(heads):
        raise IndexError(f"head {head} out of range [0, {len(heads)})")
    piece_map = heads[head]
    spans = output.spans
    n = len(spans)
    out = np.zeros((n, n), dtype=np.float64)
    for i, (qs, qe) in enumerate(spans):
        for j, (ks, ke) in enumerate(spans):
            out[i, j] = piece_map[qs:qe, ks:ke].sum(axis=1).mean()
    return out
