"""Dataset types and ingestion: labeled context instances, label
vocabularies, JSONL round-trip, CoNLL-U pseudo-label merging, statistics.

JSONL instance schema (one object per line, UTF-8, diacritics preserved):

    tokens          list[str]   surface tokens c_1..c_n          (required)
    compound_index  int         0-based position of the compound (required)
    label           str         semantic type name               (optional)
    language        str         language code, default "sa"      (optional)
    morph_tags      list[str]   per-token composite POS+feature tags
    dep_heads       list[int]   per-token head indices, 0 = root
    dep_rels        list[str]   per-token dependency relations
    case_tags       list[str]   per-token case values
    lemmas          list[str]   per-token lemmas
    uid             str         stable instance id               (optional)

All optional per-token lists, when present, must have length n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .bpe import SubwordVocab


class DatasetError(ValueError):
    """Schema or invariant violation in dataset input."""


_LIST_FIELDS = ("morph_tags", "dep_heads", "dep_rels", "case_tags", "lemmas")


@dataclass
class ContextInstance:
    """One labeled example: a context sentence containing a binary compound."""

    tokens: list[str]
    compound_index: int
    label: str | None = None
    language: str = "sa"
    morph_tags: list[str] | None = None
    dep_heads: list[int] | None = None
    dep_rels: list[str] | None = None
    case_tags: list[str] | None = None
    lemmas: list[str] | None = None
    uid: str | None = None

    @property
    def compound(self) -> str:
        return self.tokens[self.compound_index]

    def validate(self):
        n = len(self.tokens)
        if n == 0:
            raise DatasetError("field tokens: empty token sequence")
        if not 0 <= self.compound_index < n:
            raise DatasetError(
                f"field compound_index: {self.compound_index} outside [0, {n})")
        parts = self.compound.split("-")
        if len(parts) != 2 or not all(parts):
            raise DatasetError(
                f"field tokens: compound {self.compound!r} is not two components joined by '-'")
        for name in _LIST_FIELDS:
            value = getattr(self, name)
            if value is not None and len(value) != n:
                raise DatasetError(f"field {name}: length {len(value)} != {n} tokens")
        if self.dep_heads is not None:
            for i, h in enumerate(self.dep_heads):
                if not 0 <= h <= n:
                    raise DatasetError(f"field dep_heads: head {h} outside [0, {n}]")
                if h == i + 1:
                    raise DatasetError(f"field dep_heads: token {i} attaches to itself")
        return self

    def to_json(self) -> dict:
        out = {"tokens": self.tokens, "compound_index": self.compound_index}
        if self.label is not None:
            out["label"] = self.label
        out["language"] = self.language
        for name in _LIST_FIELDS + ("uid",):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ContextInstance":
        if not isinstance(obj, dict):
            raise DatasetError("instance must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise DatasetError(f"unknown field(s): {sorted(unknown)}")
        for req in ("tokens", "compound_index"):
            if req not in obj:
                raise DatasetError(f"missing required field {req}")
        inst = cls(**obj)
        return inst.validate()


@dataclass
class LabelVocab:
    """Bijective name <-> dense id mapping for one tag inventory."""

    names: list[str]
    name_to_id: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name_to_id:
            self.name_to_id = {n: i for i, n in enumerate(self.names)}
        if len(self.name_to_id) != len(self.names):
            raise DatasetError("duplicate label names")

    @classmethod
    def from_values(cls, values) -> "LabelVocab":
        return cls(sorted(set(values)))

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self.name_to_id

    def id(self, name: str) -> int:
        if name not in self.name_to_id:
            raise DatasetError(f"unknown label {name!r}")
        return self.name_to_id[name]

    def name(self, idx: int) -> str:
        return self.names[idx]

    def to_json(self) -> list[str]:
        return list(self.names)

    @classmethod
    def from_json(cls, names) -> "LabelVocab":
        return cls(list(names))


def encode_instance(inst: ContextInstance, vocab: SubwordVocab):
    """Piece ids for c_1..c_n plus the appended compound copy c_{n+1}.

    Returns ``(ids, spans)`` where ``spans[i] = (start, end)`` delimits token
    i's pieces; the n+1 spans partition the id sequence and the last span is
    the compound again.
    """
    tokens = list(inst.tokens) + [inst.compound]
    ids: list[int] = []
    spans: list[tuple[int, int]] = []
    for tok in tokens:
        pieces = vocab.encode_token(tok)
        spans.append((len(ids), len(ids) + len(pieces)))
        ids.extend(pieces)
    return ids, spans


# -- JSONL -------------------------------------------------------------------


def load_jsonl_dataset(path) -> list[ContextInstance]:
    instances = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}, line {lineno}: invalid JSON ({exc.msg})") from None
            try:
                instances.append(ContextInstance.from_json(obj))
            except DatasetError as exc:
                raise DatasetError(f"{path}, line {lineno}: {exc}") from None
    return instances


def write_jsonl_dataset(path, instances):
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(json.dumps(inst.to_json(), ensure_ascii=False) + "\n")


# -- CoNLL-U pseudo-labels ---------------------------------------------------

# standard 10 columns
_ID, _FORM, _LEMMA, _UPOS, _XPOS, _FEATS, _HEAD, _DEPREL, _DEPS, _MISC = range(10)


def read_conllu(path) -> list[list[dict]]:
    """Sentences as lists of token rows; comments, ranges, empty nodes skipped."""
    sentences = []
    current: list[dict] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                if current:
                    sentences.append(current)
                    current = []
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise DatasetError(f"{path}: expected 10 CoNLL-U columns, got {len(cols)}")
            if "-" in cols[_ID] or "." in cols[_ID]:
                continue
            current.append({
                "form": cols[_FORM],
                "lemma": cols[_LEMMA],
                "upos": cols[_UPOS],
                "feats": cols[_FEATS],
                "head": int(cols[_HEAD]),
                "deprel": cols[_DEPREL],
            })
    if current:
        sentences.append(current)
    return sentences


def _composite_tag(row: dict) -> str:
    if row["feats"] in ("", "_"):
        return row["upos"]
    return f"{row['upos']}|{row['feats']}"


def _case_of(row: dict) -> str:
    for feat in row["feats"].split("|"):
        if feat.startswith("Case="):
            return feat.split("=", 1)[1]
    return "_"


def merge_conllu_pseudolabels(dataset, conllu_path) -> list[ContextInstance]:
    """Fill morph/dep/case/lemma fields from a parsed CoNLL-U file.

    Sentences must align 1:1 with instances by order and token count.
    Fields an instance already carries are left untouched.
    """
    sentences = read_conllu(conllu_path)
    if len(sentences) != len(dataset):
        raise DatasetError(
            f"{conllu_path}: {len(sentences)} sentences for {len(dataset)} instances")
    merged = []
    for idx, (inst, sent) in enumerate(zip(dataset, sentences)):
        if len(sent) != len(inst.tokens):
            raise DatasetError(
                f"sentence {idx}: {len(sent)} CoNLL-U tokens vs {len(inst.tokens)} instance tokens")
        inst = ContextInstance(**{f.name: getattr(inst, f.name) for f in fields(ContextInstance)})
        if inst.morph_tags is None:
            inst.morph_tags = [_composite_tag(r) for r in sent]
        if inst.dep_heads is None and inst.dep_rels is None:
            inst.dep_heads = [r["head"] for r in sent]
            inst.dep_rels = [r["deprel"] for r in sent]
        if inst.case_tags is None:
            inst.case_tags = [_case_of(r) for r in sent]
        if inst.lemmas is None:
            inst.lemmas = [r["lemma"] for r in sent]
        merged.append(inst.validate())
    return merged


# -- statistics ---------------------------------------------------------------


def dataset_stats(splits: dict[str, list[ContextInstance]]) -> dict:
    """Instance / label counts per split plus unique-compound count."""
    out = {"splits": {}, "unique_compounds": 0, "types": []}
    compounds = set()
    labels = set()
    for name, instances in splits.items():
        counts: dict[str, int] = {}
        for inst in instances:
            if inst.label is not None:
                counts[inst.label] = counts.get(inst.label, 0) + 1
                labels.add(inst.label)
            compounds.add(inst.compound)
        out["splits"][name] = {
            "instances": len(instances),
            "label_counts": dict(sorted(counts.items())),
        }
    out["unique_compounds"] = len(compounds)
    out["types"] = sorted(labels)
    return out


def load_splits(train=None, dev=None, test=None) -> dict[str, list[ContextInstance]]:
    splits = {}
    for name, path in (("train", train), ("dev", dev), ("test", test)):
        if path is not None and Path(path).exists():
            splits[name] = load_jsonl_dataset(path)
    return splits
