"""Output heads over pooled token states.

- pair scorer: biaffine score s_ij = z_i' U z_j + q' z_i saying how much
  context word i should inform the appended compound copy j = n+1;
- label scorer: per-type biaffine r_ik = z_i' U_k z_c + q_k' [z_i; z_c] + b_k
  scoring semantic type k for the pair (context word i, compound);
- voting decoder: each pair votes its argmax type, plurality wins;
- token taggers: flat softmax classifiers for morphological tags and the
  extra case / lemma / relation auxiliary signals;
- dependency head: biaffine arc scorer over [root] + context tokens with a
  per-relation biaffine labeler.

All scorers operate on the n context positions; the appended compound copy
never receives auxiliary supervision. Position indices here are 0-based with
the compound copy at index n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    MASK_SCORE,
    Tensor,
    concat,
    cross_entropy,
    dropout,
    log_softmax,
    matmul,
    neg,
    relu,
    softplus,
    tanh,
    tensor_sum,
    transpose,
)
from .optim import ParameterStore


class MLP:
    """Stack of linear layers, each followed by the nonlinearity (and, in
    training, dropout), in the style of biaffine-parser projections."""

    def __init__(self, prefix: str, in_dim: int, sizes: list[int],
                 activation: str = "tanh", dropout_rate: float = 0.0):
        if activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {activation!r}")
        self.prefix = prefix
        self.dims = [in_dim] + list(sizes)
        self.activation = tanh if activation == "tanh" else relu
        self.dropout_rate = dropout_rate

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    def init_params(self, store: ParameterStore):
        for i, (din, dout) in enumerate(zip(self.dims, self.dims[1:])):
            store.parameter(f"{self.prefix}.{i}.w", (din, dout))
            store.parameter(f"{self.prefix}.{i}.b", (dout,), init="zeros")

    def __call__(self, store, x: Tensor, train=False, rng=None) -> Tensor:
        for i in range(len(self.dims) - 1):
            x = self.activation(matmul(x, store[f"{self.prefix}.{i}.w"]) +
                                store[f"{self.prefix}.{i}.b"])
            x = dropout(x, self.dropout_rate, train=train, rng=rng)
        return x


class PairScorer:
    """Full pairwise score matrix S[i, j] = z_i' U z_j + q' z_i.

    The training objective only consumes the compound column S[:, n]; the
    full matrix feeds the pair-score heatmap.
    """

    def __init__(self, in_dim: int, mlp_dim: int, dropout_rate: float = 0.0,
                 prefix: str = "pair"):
        self.prefix = prefix
        self.mlp = MLP(f"{prefix}.mlp", in_dim, [mlp_dim], dropout_rate=dropout_rate)

    def init_params(self, store):
        self.mlp.init_params(store)
        d = self.mlp.out_dim
        store.parameter(f"{self.prefix}.u", (d, d))
        store.parameter(f"{self.prefix}.q", (d, 1))

    def score_matrix(self, store, token_states: Tensor, train=False, rng=None) -> Tensor:
        z = self.mlp(store, token_states, train=train, rng=rng)
        u = store[f"{self.prefix}.u"]
        q = store[f"{self.prefix}.q"]
        bilinear = matmul(matmul(z, u), transpose(z))
        return bilinear + matmul(z, q)  # row bias broadcasts over columns


class LabelScorer:
    """Per-type biaffine r[i, k] for pairs (context word i, compound copy)."""

    def __init__(self, in_dim: int, mlp_dim: int, num_types: int,
                 dropout_rate: float = 0.0, prefix: str = "label"):
        self.prefix = prefix
        self.num_types = num_types
        self.mlp = MLP(f"{prefix}.mlp", in_dim, [mlp_dim], dropout_rate=dropout_rate)

    def init_params(self, store):
        self.mlp.init_params(store)
        d = self.mlp.out_dim
        store.parameter(f"{self.prefix}.u", (self.num_types, d, d))
        store.parameter(f"{self.prefix}.q", (self.num_types, 2 * d, 1))
        store.parameter(f"{self.prefix}.b", (self.num_types,), init="zeros")

    def label_scores(self, store, token_states: Tensor, train=False, rng=None) -> Tensor:
        """[n, K] scores over the n context positions."""
        n_plus_1 = token_states.shape[0]
        n = n_plus_1 - 1
        if n < 1:
            raise ValueError("need at least one context position")
        z = self.mlp(store, token_states, train=train, rng=rng)
        d = self.mlp.out_dim
        z_ctx = z[0:n, :]
        z_comp = z[n:n_plus_1, :]          # [1, d]
        u = store[f"{self.prefix}.u"]
        q = store[f"{self.prefix}.q"]
        b = store[f"{self.prefix}.b"]
        cols = []
        for k in range(self.num_types):
            u_k = u[k]
            q_k = q[k]                      # [2d, 1]
            bilinear = matmul(matmul(z_ctx, u_k), transpose(z_comp))       # [n, 1]
            linear = matmul(z_ctx, q_k[0:d, :]) + matmul(z_comp, q_k[d:2 * d, :])
            cols.append(bilinear + linear + b[k])
        return concat(cols, axis=1)


def compound_type_loss(score_matrix: Tensor, label_scores: Tensor, gold_label: int,
                       attachment_norm: str = "binary") -> Tensor:
    """Negated sum over context words of attachment + type log-likelihoods.

    Each context word i contributes log p(attach to compound | i) plus
    log p(gold type | i). The attachment normalizer is a declared choice:

    - "binary" (default): p = sigma(s_{i,n+1}), i.e. the compound column
      normalized against a zero-score null candidate only;
    - "row": softmax of word i's full score row over all positions except
      itself, evaluated at the compound column (a single legal candidate
      then contributes zero loss).
    """
    n, num_types = label_scores.shape
    if not 0 <= gold_label < num_types:
        raise IndexError(f"gold label {gold_label} out of range for {num_types} types")
    if attachment_norm not in ("binary", "row"):
        raise ValueError(f"unknown attachment_norm {attachment_norm!r}")

    rows = np.arange(n)
    picked = log_softmax(label_scores, axis=-1)[rows, np.full(n, gold_label)]
    label_term = neg(tensor_sum(picked))

    if attachment_norm == "binary":
        s_col = score_matrix[0:n, n:n + 1]
        attach_term = tensor_sum(softplus(neg(s_col)))
    else:
        mask = np.zeros((n, n + 1), dtype=score_matrix.dtype)
        mask[rows, rows] = MASK_SCORE                      # no self-attachment
        masked = score_matrix[0:n, :] + Tensor(mask)
        attach = log_softmax(masked, axis=-1)[rows, np.full(n, n)]
        attach_term = neg(tensor_sum(attach))
    return attach_term + label_term


def vote_decode(label_scores: np.ndarray) -> tuple[int, np.ndarray]:
    """Maximum-voting decoder over per-pair type scores.

    Each of the n pairs votes its argmax type; the plurality wins. Ties are
    broken by the highest summed log-softmax score across all pairs, then by
    the lowest type id. Returns (winner id, vote share per type).
    """
    r = np.asarray(label_scores, dtype=np.float64)
    n, num_types = r.shape
    votes = r.argmax(axis=1)
    counts = np.bincount(votes, minlength=num_types)
    confidence = counts / n
    top = counts.max()
    tied = np.flatnonzero(counts == top)
    if len(tied) == 1:
        return int(tied[0]), confidence
    shifted = r - r.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    # fsum: exactly-rounded, so mathematically equal vote groups compare equal
    sums = {int(k): math.fsum(logp[:, k]) for k in tied}
    best = max(sums.values())
    winner = min(k for k in sums if sums[k] == best)
    return winner, confidence


class TokenTagHead:
    """Linear + softmax classifier over per-token states (morph, case, ...)."""

    def __init__(self, prefix: str, in_dim: int, num_tags: int):
        self.prefix = prefix
        self.in_dim = in_dim
        self.num_tags = num_tags

    def init_params(self, store):
        store.parameter(f"{self.prefix}.w", (self.in_dim, self.num_tags))
        store.parameter(f"{self.prefix}.b", (self.num_tags,), init="zeros")

    def logits(self, store, context_states: Tensor) -> Tensor:
        return matmul(context_states, store[f"{self.prefix}.w"]) + store[f"{self.prefix}.b"]

    def loss(self, logits: Tensor, tag_ids) -> Tensor:
        """Cross-entropy averaged over the supplied (unmasked) tokens."""
        return cross_entropy(logits, tag_ids)


@dataclass
class DepOutputs:
    arc_scores: Tensor     # [n, n+1]; column 0 = root, self-attachment masked
    head_states: Tensor    # [n+1, arc_dim]: root rep + per-token head reps
    dep_states: Tensor     # [n, arc_dim]


class DependencyHead:
    """Biaffine arc scorer plus per-relation biaffine labeler."""

    def __init__(self, in_dim: int, mlp_dim: int, num_rels: int,
                 dropout_rate: float = 0.0, prefix: str = "dep"):
        self.prefix = prefix
        self.num_rels = num_rels
        self.head_mlp = MLP(f"{prefix}.head_mlp", in_dim, [mlp_dim], dropout_rate=dropout_rate)
        self.dep_mlp = MLP(f"{prefix}.dep_mlp", in_dim, [mlp_dim], dropout_rate=dropout_rate)

    def init_params(self, store):
        self.head_mlp.init_params(store)
        self.dep_mlp.init_params(store)
        d = self.head_mlp.out_dim
        store.parameter(f"{self.prefix}.root", (1, d), init="embedding")
        store.parameter(f"{self.prefix}.arc.u", (d, d))
        store.parameter(f"{self.prefix}.arc.b", (d, 1))
        store.parameter(f"{self.prefix}.rel.u", (self.num_rels, d, d))
        store.parameter(f"{self.prefix}.rel.q", (self.num_rels, 2 * d, 1))
        store.parameter(f"{self.prefix}.rel.b", (self.num_rels,), init="zeros")

    def forward(self, store, token_states: Tensor, train=False, rng=None) -> DepOutputs:
        """Arc scores for the n context tokens over n+1 head candidates.

        Candidates are [root] + context tokens; the appended compound copy is
        excluded on both axes. Token i's self column carries a mask score so
        it is never predicted.
        """
        n = token_states.shape[0] - 1
        ctx = token_states[0:n, :]
        hd = self.head_mlp(store, ctx, train=train, rng=rng)
        dd = self.dep_mlp(store, ctx, train=train, rng=rng)
        head_states = concat([store[f"{self.prefix}.root"], hd], axis=0)   # [n+1, d]
        u = store[f"{self.prefix}.arc.u"]
        b = store[f"{self.prefix}.arc.b"]
        arc = matmul(matmul(dd, u), transpose(head_states))                 # [n, n+1]
        arc = arc + transpose(matmul(head_states, b))                       # head-side bias
        mask = np.zeros((n, n + 1), dtype=arc.dtype)
        mask[np.arange(n), np.arange(1, n + 1)] = MASK_SCORE
        arc = arc + Tensor(mask)
        return DepOutputs(arc_scores=arc, head_states=head_states, dep_states=dd)

    def rel_logits_at(self, store, outputs: DepOutputs, head_indices) -> Tensor:
        """[n, R] relation scores with each token paired to its given head."""
        idx = np.asarray(head_indices, dtype=np.intp)
        gathered = outputs.head_states[idx]                 # [n, d]
        dd = outputs.dep_states
        d = self.head_mlp.out_dim
        u = store[f"{self.prefix}.rel.u"]
        q = store[f"{self.prefix}.rel.q"]
        b = store[f"{self.prefix}.rel.b"]
        both = concat([gathered, dd], axis=1)               # [n, 2d]
        cols = []
        for k in range(self.num_rels):
            bilinear = tensor_sum(matmul(gathered, u[k]) * dd, axis=1, keepdims=True)
            cols.append(bilinear + matmul(both, q[k]) + b[k])
        return concat(cols, axis=1)

    def loss(self, store, outputs: DepOutputs, gold_heads, gold_rels) -> Tensor:
        """Arc cross-entropy at gold heads plus relation cross-entropy at the
        gold head, each averaged over the supervised tokens."""
        arc_loss = cross_entropy(outputs.arc_scores, gold_heads)
        rel_logits = self.rel_logits_at(store, outputs, gold_heads)
        return arc_loss + cross_entropy(rel_logits, gold_rels)

    def decode(self, store, outputs: DepOutputs) -> tuple[list[int], list[int]]:
        """Greedy per-token argmax head and argmax relation at that head.

        Display-only: the result is not guaranteed to be a tree.
        """
        heads = outputs.arc_scores.data.argmax(axis=1).tolist()
        rel_logits = self.rel_logits_at(store, outputs, heads)
        rels = rel_logits.data.argmax(axis=1).tolist()
        return heads, rels


# -- heatmaps -----------------------------------------------------------------


def _stable_softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def pair_score_heatmap(score_matrix: np.ndarray) -> np.ndarray:
    """Row-softmaxed (n+1)x(n+1) pair-score matrix for display."""
    return _stable_softmax_rows(np.asarray(score_matrix, dtype=np.float64))


def dep_arc_heatmap(arc_scores: np.ndarray) -> np.ndarray:
    """Row-softmaxed n x (n+1) arc matrix (masked self cells go to ~0)."""
    return _stable_softmax_rows(np.asarray(arc_scores, dtype=np.float64))
