"""Deterministic byte-pair-encoding subword vocabulary.

Desk-scale stand-in for a pretrained multilingual tokenizer: merges are
learned from the task corpus itself, most-frequent pair first, frequency ties
broken by lexicographically smallest pair, so retraining on the same corpus
always yields the same merge list. All text is treated as Unicode (IAST
diacritics are ordinary characters).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

PAD = "<pad>"
UNK = "<unk>"
BOUNDARY = "<w>"
SPECIALS = (PAD, UNK, BOUNDARY)


@dataclass
class SubwordVocab:
    """Piece inventory plus the ordered merges that produced it.

    Ids are dense: specials first (pad=0, unk=1, boundary=2), then single
    characters in sorted order, then merged pieces in learn order.
    """

    pieces: list[str]
    merges: list[tuple[str, str]]
    piece_to_id: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.piece_to_id:
            self.piece_to_id = {p: i for i, p in enumerate(self.pieces)}
        if len(self.piece_to_id) != len(self.pieces):
            raise ValueError("duplicate pieces in vocabulary")

    def __len__(self):
        return len(self.pieces)

    @property
    def pad_id(self) -> int:
        return self.piece_to_id[PAD]

    @property
    def unk_id(self) -> int:
        return self.piece_to_id[UNK]

    def encode_token(self, token: str) -> list[int]:
        """Split one surface token into piece ids (>= 1 piece, unk for unknown chars)."""
        if not token:
            return [self.unk_id]
        parts = [c if c in self.piece_to_id else UNK for c in token]
        for a, b in self.merges:
            merged = []
            i = 0
            while i < len(parts):
                if i + 1 < len(parts) and parts[i] == a and parts[i + 1] == b:
                    merged.append(a + b)
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            parts = merged
        return [self.piece_to_id[p] for p in parts]

    def decode(self, ids) -> str:
        """Concatenate pieces back into a surface string (specials dropped)."""
        return "".join(p for p in (self.pieces[i] for i in ids) if p not in SPECIALS)

    def to_json(self) -> dict:
        return {"pieces": self.pieces, "merges": [list(m) for m in self.merges]}

    @classmethod
    def from_json(cls, obj: dict) -> "SubwordVocab":
        return cls(pieces=list(obj["pieces"]), merges=[tuple(m) for m in obj["merges"]])


def train_subword_vocab(corpus, vocab_size: int) -> SubwordVocab:
    """Learn a BPE vocabulary of ``vocab_size`` non-special pieces.

    ``corpus`` is an iterable of tokens (a multiset: duplicates weigh the
    pair counts). ``vocab_size`` counts characters plus learned merges;
    specials are always added on top.
    """
    freqs = Counter(corpus)
    if not freqs:
        raise ValueError("cannot train a subword vocabulary on an empty corpus")
    chars = sorted({c for tok in freqs for c in tok})
    if vocab_size < len(chars):
        raise ValueError(
            f"vocab_size {vocab_size} below base character inventory ({len(chars)})")

    words = {tok: tuple(tok) for tok in freqs}
    merges: list[tuple[str, str]] = []
    while len(chars) + len(merges) < vocab_size:
        pair_counts = Counter()
        for tok, parts in words.items():
            f = freqs[tok]
            for a, b in zip(parts, parts[1:]):
                pair_counts[(a, b)] += f
        if not pair_counts:
            break
        # highest count first; ties broken by smallest pair, for determinism
        best = min(pair_counts, key=lambda p: (-pair_counts[p], p))
        merges.append(best)
        a, b = best
        for tok, parts in words.items():
            if a not in parts:
                continue
            out = []
            i = 0
            while i < len(parts):
                if i + 1 < len(parts) and parts[i] == a and parts[i + 1] == b:
                    out.append(a + b)
                    i += 2
                else:
                    out.append(parts[i])
                    i += 1
            words[tok] = tuple(out)

    pieces = list(SPECIALS) + chars + [a + b for a, b in merges]
    return SubwordVocab(pieces=pieces, merges=merges)
