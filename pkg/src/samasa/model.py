"""Full multi-task model: encoder + compound-type scorer + auxiliary heads.

The compound-type head is always active. Auxiliary heads (morphological
tagging, dependency parsing, and the extra case / lemma / relation taggers)
are built only when enabled in the config, and an instance contributes a
head's loss only when it actually carries that head's labels, so fully
masked auxiliaries change neither the loss value nor any gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tensor, backward, cross_entropy  # noqa: F401  (re-export convenience)
from .bpe import SubwordVocab
from .data import ContextInstance, LabelVocab, encode_instance
from .encoder import Encoder, EncoderConfig, EncoderOutput, attention_heatmap
from .heads import (
    DependencyHead,
    LabelScorer,
    PairScorer,
    TokenTagHead,
    compound_type_loss,
    dep_arc_heatmap,
    pair_score_heatmap,
    vote_decode,
)
from .optim import ParameterStore

HEAD_KINDS = ("sacti", "morph", "dep", "case", "lemma", "relation")
AUX_TAG_KINDS = ("morph", "case", "lemma", "relation")

# which instance field / vocabulary feeds each token-tagging head
_TAG_FIELD = {"morph": "morph_tags", "case": "case_tags", "lemma": "lemmas",
              "relation": "dep_rels"}
_TAG_VOCAB = {"morph": "morph", "case": "case", "lemma": "lemma", "relation": "rel"}


@dataclass(frozen=True)
class ModelConfig:
    num_types: int
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    heads: tuple[str, ...] = ("sacti", "morph", "dep")
    classifier: str = "biaffine"     # "pooled" = single classifier on the compound state
    attachment_norm: str = "binary"  # or "row"
    pair_dim: int = 64
    label_dim: int = 64
    dep_dim: int = 64

    def __post_init__(self):
        if "sacti" not in self.heads:
            raise ValueError("the compound-type head is mandatory")
        unknown = set(self.heads) - set(HEAD_KINDS)
        if unknown:
            raise ValueError(f"unknown heads: {sorted(unknown)}")
        if self.classifier not in ("biaffine", "pooled"):
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.attachment_norm not in ("binary", "row"):
            raise ValueError(f"unknown attachment_norm {self.attachment_norm!r}")
        if self.num_types < 2:
            raise ValueError("need at least two semantic types")

    def to_json(self) -> dict:
        return {"num_types": self.num_types, "encoder": self.encoder.to_json(),
                "heads": list(self.heads), "classifier": self.classifier,
                "attachment_norm": self.attachment_norm, "pair_dim": self.pair_dim,
                "label_dim": self.label_dim, "dep_dim": self.dep_dim}

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        obj = dict(obj)
        obj["encoder"] = EncoderConfig.from_json(obj["encoder"])
        obj["heads"] = tuple(obj["heads"])
        return cls(**obj)


@dataclass
class ModelOutputs:
    enc: EncoderOutput
    pair_matrix: Tensor | None = None       # (n+1, n+1)
    label_matrix: Tensor | None = None      # (n, K)
    pooled_logits: Tensor | None = None     # (1, K), "pooled" classifier mode
    tag_logits: dict = field(default_factory=dict)  # kind -> (n, |vocab|)
    dep: object = None                      # DepOutputs when the dep head runs


@dataclass
class PredictionReport:
    tokens: list[str]
    compound_index: int
    label: str
    types: list[str]
    confidence: dict[str, float]
    pair_votes: list[str]
    pair_label_distributions: list[list[float]]
    pair_weights: list[float]
    morph_tags: list[str] | None
    dep_heads: list[int] | None
    dep_rels: list[str] | None
    heatmaps: dict[str, list[list[float]]]

    def to_json(self) -> dict:
        return {
            "tokens": self.tokens,
            "compound_index": self.compound_index,
            "label": self.label,
            "types": self.types,
            "confidence": self.confidence,
            "pair_votes": self.pair_votes,
            "pair_label_distributions": self.pair_label_distributions,
            "pair_weights": self.pair_weights,
            "morph_tags": self.morph_tags,
            "dep_heads": self.dep_heads,
            "dep_rels": self.dep_rels,
            "heatmaps": self.heatmaps,
        }


class Model:
    def __init__(self, config: ModelConfig, subword: SubwordVocab,
                 type_vocab: LabelVocab, tag_vocabs: dict[str, LabelVocab] | None = None):
        if len(type_vocab) != config.num_types:
            raise ValueError(
                f"type vocabulary has {len(type_vocab)} labels, config says {config.num_types}")
        self.config = config
        self.subword = subword
        self.type_vocab = type_vocab
        self.tag_vocabs = tag_vocabs or {}

        cfg = config
        dim = cfg.encoder.model_dim
        drop = cfg.encoder.dropout
        self.encoder = Encoder(cfg.encoder, vocab_size=len(subword))
        self.pair_scorer = None
        self.label_scorer = None
        if cfg.classifier == "biaffine":
            self.pair_scorer = PairScorer(dim, cfg.pair_dim, dropout_rate=drop)
            self.label_scorer = LabelScorer(dim, cfg.label_dim, cfg.num_types,
                                            dropout_rate=drop)
        self.tag_heads: dict[str, TokenTagHead] = {}
        for kind in AUX_TAG_KINDS:
            if kind in cfg.heads:
                vocab = self._tag_vocab(kind)
                self.tag_heads[kind] = TokenTagHead(kind, dim, len(vocab))
        self.dep_head = None
        if "dep" in cfg.heads:
            self.dep_head = DependencyHead(dim, cfg.dep_dim, len(self._tag_vocab("relation")),
                                           dropout_rate=drop)

    def _tag_vocab(self, kind: str) -> LabelVocab:
        key = _TAG_VOCAB[kind]
        if key not in self.tag_vocabs:
            raise ValueError(f"head {kind!r} enabled but no {key!r} vocabulary was built")
        return self.tag_vocabs[key]

    # -- parameters ------------------------------------------------------

    def init_params(self, store: ParameterStore):
        self.encoder.init_params(store)
        if self.pair_scorer is not None:
            self.pair_scorer.init_params(store)
            self.label_scorer.init_params(store)
        else:
            store.parameter("pooled.w", (self.config.encoder.model_dim, self.config.num_types))
            store.parameter("pooled.b", (self.config.num_types,), init="zeros")
        for head in self.tag_heads.values():
            head.init_params(store)
        if self.dep_head is not None:
            self.dep_head.init_params(store)
        return store

    # -- forward ------------------------------------------------------------

    def forward(self, store: ParameterStore, inst: ContextInstance,
                train: bool = False, rng: np.random.Generator | None = None) -> ModelOutputs:
        ids, spans = encode_instance(inst, self.subword)
        enc = self.encoder.encode(store, ids, spans, train=train, rng=rng)
        out = ModelOutputs(enc=enc)
        h = enc.token_states
        n = len(inst.tokens)
        ctx = h[0:n, :]
        if self.pair_scorer is not None:
            out.pair_matrix = self.pair_scorer.score_matrix(store, h, train=train, rng=rng)
            out.label_matrix = self.label_scorer.label_scores(store, h, train=train, rng=rng)
        else:
            from .autodiff import matmul
            out.pooled_logits = matmul(h[n:n + 1, :], store["pooled.w"]) + store["pooled.b"]
        for kind, head in self.tag_heads.items():
            out.tag_logits[kind] = head.logits(store, ctx)
        if self.dep_head is not None:
            out.dep = self.dep_head.forward(store, h, train=train, rng=rng)
        return out

    # -- losses ----------------------------------------------------------------

    def instance_losses(self, store, inst: ContextInstance, train: bool = True,
                        rng: np.random.Generator | None = None) -> dict[str, Tensor]:
        """Per-head loss tensors for heads whose labels this instance carries."""
        if inst.label is None:
            raise ValueError("cannot compute losses for an unlabeled instance")
        out = self.forward(store, inst, train=train, rng=rng)
        gold = self.type_vocab.id(inst.label)
        losses: dict[str, Tensor] = {}
        if out.pooled_logits is not None:
            losses["sacti"] = cross_entropy(out.pooled_logits, [gold])
        else:
            losses["sacti"] = compound_type_loss(out.pair_matrix, out.label_matrix, gold,
                                                 self.config.attachment_norm)
        for kind, head in self.tag_heads.items():
            tags = getattr(inst, _TAG_FIELD[kind])
            if tags is None:
                continue
            vocab = self._tag_vocab(kind)
            losses[kind] = head.loss(out.tag_logits[kind], [vocab.id(t) for t in tags])
        if self.dep_head is not None and inst.dep_heads is not None and inst.dep_rels is not None:
            rel_vocab = self._tag_vocab("relation")
            losses["dep"] = self.dep_head.loss(store, out.dep, inst.dep_heads,
                                               [rel_vocab.id(r) for r in inst.dep_rels])
        return losses

    # -- prediction ---------------------------------------------------------------

    def predict(self, store, inst: ContextInstance, heatmap_layer: int | None = None,
                heatmap_head: int = 0) -> PredictionReport:
        out = self.forward(store, inst, train=False)
        n = len(inst.tokens)
        names = self.type_vocab.names

        if out.pooled_logits is not None:
            logits = out.pooled_logits.data[0].astype(np.float64)
            probs = np.exp(logits - logits.max())
            probs /= probs.sum()
            label_id = int(probs.argmax())
            confidence = probs
            distributions = [probs.tolist()]
            votes = [names[label_id]]
            weights = [1.0]
            heatmaps = {}
        else:
            r = out.label_matrix.data
            label_id, confidence = vote_decode(r)
            shifted = r.astype(np.float64) - r.max(axis=1, keepdims=True)
            dist = np.exp(shifted)
            dist /= dist.sum(axis=1, keepdims=True)
            distributions = dist.tolist()
            votes = [names[int(k)] for k in r.argmax(axis=1)]
            s_col = out.pair_matrix.data[:n, n].astype(np.float64)
            w = np.exp(s_col - s_col.max())
            w /= w.sum()
            weights = w.tolist()
            heatmaps = {"pair": pair_score_heatmap(out.pair_matrix.data).tolist()}

        layer = (self.config.encoder.layers - 1) if heatmap_layer is None else heatmap_layer
        heatmaps["attention"] = attention_heatmap(out.enc, layer, heatmap_head).tolist()

        morph_tags = None
        if "morph" in self.tag_heads:
            vocab = self._tag_vocab("morph")
            morph_tags = [vocab.name(int(i))
                          for i in out.tag_logits["morph"].data.argmax(axis=1)]
        dep_heads = dep_rels = None
        if self.dep_head is not None:
            rel_vocab = self._tag_vocab("relation")
            head_ids, rel_ids = self.dep_head.decode(store, out.dep)
            dep_heads = head_ids
            dep_rels = [rel_vocab.name(int(i)) for i in rel_ids]
            heatmaps["dep"] = dep_arc_heatmap(out.dep.arc_scores.data).tolist()

        return PredictionReport(
            tokens=list(inst.tokens),
            compound_index=inst.compound_index,
            label=names[label_id],
            types=list(names),
            confidence={name: float(c) for name, c in zip(names, confidence)},
            pair_votes=votes,
            pair_label_distributions=distributions,
            pair_weights=weights,
            morph_tags=morph_tags,
            dep_heads=dep_heads,
            dep_rels=dep_rels,
            heatmaps=heatmaps,
        )

    # -- persistence ------------------------------------------------------------------

    def echo(self) -> dict:
        """Config payload stored in checkpoints; enough to rebuild the model."""
        return {
            "model": self.config.to_json(),
            "subword": self.subword.to_json(),
            "vocabs": {"type": self.type_vocab.to_json(),
                       **{k: v.to_json() for k, v in self.tag_vocabs.items()}},
        }

    @classmethod
    def from_echo(cls, echo: dict) -> "Model":
        config = ModelConfig.from_json(echo["model"])
        subword = SubwordVocab.from_json(echo["subword"])
        vocabs = dict(echo["vocabs"])
        type_vocab = LabelVocab.from_json(vocabs.pop("type"))
        tag_vocabs = {k: LabelVocab.from_json(v) for k, v in vocabs.items()}
        return cls(config, subword, type_vocab, tag_vocabs)


def strip_context(inst: ContextInstance) -> ContextInstance:
    """Without-context mode: the compound token alone stands in for the context.

    Single-token tags that refer to the compound itself survive; tree-shaped
    labels (heads/relations) cannot be remapped and are dropped.
    """
    i = inst.compound_index
    pick = lambda xs: [xs[i]] if xs is not None else None
    return ContextInstance(
        tokens=[inst.compound], compound_index=0, label=inst.label,
        language=inst.language, morph_tags=pick(inst.morph_tags),
        case_tags=pick(inst.case_tags), lemmas=pick(inst.lemmas),
        dep_heads=None, dep_rels=None, uid=inst.uid,
    ).validate()


def apply_context_mode(inst: ContextInstance, mode: str) -> ContextInstance:
    if mode == "with":
        return inst
    if mode == "without":
        return strip_context(inst)
    raise ValueError(f"unknown context mode {mode!r}")


def make_model_config(train_config, num_types: int) -> ModelConfig:
    """Derive a ModelConfig from a TrainConfig-like object."""
    enc = replace(train_config.encoder, dropout=train_config.dropout)
    return ModelConfig(
        num_types=num_types,
        encoder=enc,
        heads=tuple(train_config.heads),
        classifier=train_config.classifier,
        attachment_norm=train_config.attachment_norm,
        pair_dim=train_config.pair_dim,
        label_dim=train_config.label_dim,
        dep_dim=train_config.dep_dim,
    )
