"""Multi-task training loop, evaluation, and the experiment grid.

Training is deterministic for a fixed seed, config, and data: parameter
initialization, dropout, and the per-epoch shuffle all derive from the seed,
and the epoch log stores plain JSON-serializable floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tensor, backward, mul
from .bpe import SubwordVocab, train_subword_vocab
from .data import ContextInstance, LabelVocab
from .encoder import EncoderConfig
from .metrics import ConfusionMatrix, MetricsReport, compute_metrics
from .model import (
    AUX_TAG_KINDS,
    Model,
    _TAG_FIELD,
    _TAG_VOCAB,
    apply_context_mode,
    make_model_config,
)
from .optim import Optimizer, ParameterStore

EXTRA_AUX = ("case", "lemma", "relation")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 70
    batch_size: int = 50
    lr: float = 0.001
    dropout: float = 0.3
    dep_loss_weight: float = 0.01
    aux_loss_weight: float = 1.0
    heads: tuple[str, ...] = ("sacti", "morph", "dep")
    context_mode: str = "with"
    classifier: str = "biaffine"
    attachment_norm: str = "binary"
    seed: int = 0
    eval_every: int = 1
    optimizer: str = "adam"
    clip_norm: float | None = None
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    pair_dim: int = 64
    label_dim: int = 64
    dep_dim: int = 64
    subword_vocab_size: int = 200
    dtype: str = "float32"

    def __post_init__(self):
        if "sacti" not in self.heads:
            raise ValueError("the compound-type head cannot be disabled")
        if self.dep_loss_weight < 0 or self.aux_loss_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.context_mode not in ("with", "without"):
            raise ValueError(f"unknown context_mode {self.context_mode!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    def to_json(self) -> dict:
        out = {f: getattr(self, f) for f in self.__dataclass_fields__ if f != "encoder"}
        out["heads"] = list(self.heads)
        out["encoder"] = self.encoder.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        if "encoder" in obj:
            obj["encoder"] = EncoderConfig.from_json(obj["encoder"])
        if "heads" in obj:
            obj["heads"] = tuple(obj["heads"])
        return cls(**obj)


def total_loss(head_losses: dict[str, Tensor], config: TrainConfig) -> Tensor:
    """Weighted multi-task loss.

    L = L_type + L_morph + dep_loss_weight * L_dep + aux_loss_weight * extras.
    Heads absent from the dict contribute exactly nothing: no term, no
    gradient.
    """
    loss = head_losses["sacti"]
    if "morph" in head_losses:
        loss = loss + head_losses["morph"]
    for kind in EXTRA_AUX:
        if kind in head_losses:
            loss = loss + mul(head_losses[kind], config.aux_loss_weight)
    if "dep" in head_losses:
        loss = loss + mul(head_losses["dep"], config.dep_loss_weight)
    return loss


def build_model(config: TrainConfig, train_set: list[ContextInstance]) -> tuple[Model, ParameterStore]:
    """Vocabularies from the training data, then a fresh seeded parameter store."""
    if not train_set:
        raise ValueError("cannot train on an empty dataset")
    instances = [apply_context_mode(inst, config.context_mode) for inst in train_set]

    corpus = [tok for inst in instances for tok in inst.tokens]
    chars = {c for tok in corpus for c in tok}
    subword = train_subword_vocab(corpus, max(config.subword_vocab_size, len(chars)))

    labels = [inst.label for inst in instances if inst.label is not None]
    if not labels:
        raise ValueError("training data has no labels")
    type_vocab = LabelVocab.from_values(labels)

    tag_vocabs: dict[str, LabelVocab] = {}
    for kind in AUX_TAG_KINDS:
        if kind not in config.heads and not (kind == "relation" and "dep" in config.heads):
            continue
        values = [t for inst in instances
                  for t in (getattr(inst, _TAG_FIELD[kind]) or [])]
        if values:
            tag_vocabs[_TAG_VOCAB[kind]] = LabelVocab.from_values(values)

    model_config = make_model_config(config, num_types=len(type_vocab))
    # heads whose labels never occur cannot train; drop them rather than fail
    active = []
    for kind in model_config.heads:
        if kind == "sacti":
            active.append(kind)
        elif kind == "dep":
            if "rel" in tag_vocabs and any(i.dep_heads is not None for i in instances):
                active.append(kind)
        elif _TAG_VOCAB[kind] in tag_vocabs:
            active.append(kind)
    model_config = replace(model_config, heads=tuple(active))

    dtype = np.float64 if config.dtype == "float64" else np.float32
    store = ParameterStore(seed=config.seed, dtype=dtype)
    model = Model(model_config, subword, type_vocab, tag_vocabs)
    model.init_params(store)
    return model, store


@dataclass
class TrainResult:
    model: Model
    store: ParameterStore
    epoch_log: list[dict]
    best_epoch: int | None
    config: TrainConfig

    def checkpoint_config(self) -> dict:
        return {**self.model.echo(), "train": self.config.to_json()}


def train(train_set: list[ContextInstance], config: TrainConfig,
          dev_set: list[ContextInstance] | None = None,
          model: Model | None = None, store: ParameterStore | None = None) -> TrainResult:
    """Train, tracking the checkpoint with the best dev macro-F1.

    Every epoch shuffles with a seeded RNG, sums each head's loss over the
    instances that carry its labels (mean per contributing instance), applies
    the weighted total, and logs per-head losses plus dev metrics. With a dev
    set, the best-scoring parameters are restored at the end.
    """
    if not train_set:
        raise ValueError("cannot train on an empty dataset")
    if model is None or store is None:
        model, store = build_model(config, train_set)
    instances = [apply_context_mode(inst, config.context_mode) for inst in train_set]

    optimizer = Optimizer(store, lr=config.lr, algorithm=config.optimizer,
                          clip_norm=config.clip_norm)
    shuffle_rng = np.random.default_rng([config.seed, 0x5AA5])

    epoch_log: list[dict] = []
    best: tuple[float, int, dict] | None = None  # (macro_f1, epoch, values)

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(instances))
        head_totals: dict[str, float] = {}
        head_counts: dict[str, int] = {}
        total_value = 0.0
        batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = [instances[i] for i in order[start:start + config.batch_size]]
            batch_losses = batch_head_losses(model, store, batch, train=True)
            loss = total_loss(batch_losses, config)
            value = loss.item()
            if math.isnan(value) or math.isinf(value):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, step {batches}")
            backward(loss)
            optimizer.step()
            total_value += value
            batches += 1
            for kind, t in batch_losses.items():
                head_totals[kind] = head_totals.get(kind, 0.0) + t.item()
                head_counts[kind] = head_counts.get(kind, 0) + 1

        entry = {"epoch": epoch, "loss_total": total_value / max(batches, 1)}
        for kind in sorted(head_totals):
            entry[f"loss_{kind}"] = head_totals[kind] / head_counts[kind]
        if dev_set and (epoch % config.eval_every == 0 or epoch == config.epochs - 1):
            report, _ = evaluate(model, store, dev_set, context_mode=config.context_mode)
            entry["dev"] = report.to_json()
            if best is None or report.macro_f1 > best[0]:
                best = (report.macro_f1, epoch, store.copy_values())
        epoch_log.append(entry)

    best_epoch = None
    if best is not None:
        best_epoch = best[1]
        store.load_values(best[2])
    return TrainResult(model=model, store=store, epoch_log=epoch_log,
                       best_epoch=best_epoch, config=config)


def batch_head_losses(model: Model, store, batch, train=True) -> dict[str, Tensor]:
    """Mean per-head loss over the batch instances that carry each head's labels."""
    sums: dict[str, Tensor] = {}
    counts: dict[str, int] = {}
    rng = store.rng
    for inst in batch:
        for kind, loss in model.instance_losses(store, inst, train=train, rng=rng).items():
            sums[kind] = loss if kind not in sums else sums[kind] + loss
            counts[kind] = counts.get(kind, 0) + 1
    return {kind: mul(sums[kind], 1.0 / counts[kind]) for kind in sums}


def evaluate(model: Model, store, dataset, context_mode: str = "with"
             ) -> tuple[MetricsReport, ConfusionMatrix]:
    """Metrics over voting-decoder predictions against gold type labels."""
    if not dataset:
        raise ValueError("cannot evaluate an empty dataset")
    gold, predicted = [], []
    for inst in dataset:
        if inst.label is None:
            raise ValueError("evaluation needs labeled instances")
        inst = apply_context_mode(inst, context_mode)
        report = model.predict(store, inst)
        gold.append(inst.label)
        predicted.append(report.label)
    return compute_metrics(gold, predicted, model.type_vocab.names)


# -- experiment grid ---------------------------------------------------------


class GridError(ValueError):
    pass


ABLATIONS = {
    "-context": {"context_mode": "without"},
    "-BiAFF": {"classifier": "pooled"},
    "-morph": {"drop_heads": ("morph",)},
    "-DP": {"drop_heads": ("dep",)},
    "-morph-DP": {"drop_heads": ("morph", "dep")},
}

AUX_COMBOS = {
    "M+C": ("sacti", "morph", "case"),
    "M+C+L": ("sacti", "morph", "case", "lemma"),
    "M+C+R": ("sacti", "morph", "case", "relation"),
    "M+DP": ("sacti", "morph", "dep"),
}


@dataclass
class GridCell:
    name: str
    ablation: str | None = None
    heads: tuple[str, ...] | None = None
    context_mode: str | None = None
    classifier: str | None = None
    train_datasets: tuple[str, ...] = ("default",)
    eval_dataset: str = "default"

    @classmethod
    def from_json(cls, obj: dict) -> "GridCell":
        obj = dict(obj)
        if "heads" in obj and obj["heads"] is not None:
            obj["heads"] = tuple(obj["heads"])
        if "train_datasets" in obj:
            obj["train_datasets"] = tuple(obj["train_datasets"])
        return cls(**obj)


def cell_config(base: TrainConfig, cell: GridCell) -> TrainConfig:
    cfg = base
    if cell.ablation is not None:
        if cell.ablation in ABLATIONS:
            spec = dict(ABLATIONS[cell.ablation])
            drop = spec.pop("drop_heads", ())
            if drop:
                spec["heads"] = tuple(h for h in cfg.heads if h not in drop)
            cfg = replace(cfg, **spec)
        elif cell.ablation in AUX_COMBOS:
            cfg = replace(cfg, heads=AUX_COMBOS[cell.ablation])
        else:
            raise GridError(f"unknown ablation {cell.ablation!r}")
    if cell.heads is not None:
        cfg = replace(cfg, heads=cell.heads)
    if cell.context_mode is not None:
        cfg = replace(cfg, context_mode=cell.context_mode)
    if cell.classifier is not None:
        cfg = replace(cfg, classifier=cell.classifier)
    return cfg


def run_experiment_grid(base: TrainConfig, cells, datasets: dict) -> list[dict]:
    """One training + evaluation run per cell.

    ``datasets`` maps a name to ``{"train": [...], "dev": [...], "test":
    [...]}`` instance lists. Cells may train on several datasets at once
    (multilingual) or evaluate on a different one (zero-shot); the evaluation
    label space must be covered by the training labels.
    """
    results = []
    for cell in cells:
        cfg = cell_config(base, cell)
        train_insts: list[ContextInstance] = []
        for name in cell.train_datasets:
            if name not in datasets:
                raise GridError(f"cell {cell.name!r}: unknown dataset {name!r}")
            train_insts.extend(datasets[name].get("train") or [])
        eval_bundle = datasets.get(cell.eval_dataset)
        if eval_bundle is None:
            raise GridError(f"cell {cell.name!r}: unknown dataset {cell.eval_dataset!r}")
        test_insts = eval_bundle.get("test") or []
        dev_insts = datasets[cell.train_datasets[0]].get("dev")

        train_labels = {i.label for i in train_insts if i.label is not None}
        eval_labels = {i.label for i in test_insts if i.label is not None}
        if not eval_labels <= train_labels:
            raise GridError(
                f"cell {cell.name!r}: evaluation labels {sorted(eval_labels - train_labels)} "
                "missing from the training label space")

        result = train(train_insts, cfg, dev_set=dev_insts)
        report, confusion = evaluate(result.model, result.store, test_insts,
                                     context_mode=cfg.context_mode)
        results.append({"name": cell.name, "metrics": report.to_json(),
                        "confusion": confusion.to_json()})
    return results
