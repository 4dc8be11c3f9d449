"""Test server for the frontend e2e suite.

Trains a tiny model on synthetic data, exposes it plus an annotation queue,
and serves until killed. Usage: python3 scripts/e2e_server.py [port]
"""

import sys
import tempfile
from pathlib import Path

import uvicorn

from samasa.data import ContextInstance
from samasa.encoder import EncoderConfig
from samasa.service import AnnotationStore, create_app
from samasa.training import TrainConfig, train

CUES = {"A": "upari", "B": "yasya", "D": "ca", "T": "tasya"}


def instance(i: int, label: str) -> ContextInstance:
    cue = CUES[label]
    return ContextInstance(
        tokens=[cue, f"pūrva{i}-para{i}", cue], compound_index=1, label=label,
        morph_tags=["IND", "NOUN", "IND"], dep_heads=[2, 0, 2],
        dep_rels=["mod", "root", "mod"]).validate()


def main() -> int:
    port = int(sys.argv[1]) if len(sys.argv) > 1 else 8913
    data = [instance(i, "ABDT"[i % 4]) for i in range(16)]
    # keep the vocabulary open enough for arbitrary inspector input
    data.append(ContextInstance(
        tokens=["aham", "pīta-ambaram", "namāmi"], compound_index=1, label="B",
        morph_tags=["PRON", "NOUN", "VERB"], dep_heads=[3, 3, 0],
        dep_rels=["nsubj", "obj", "root"]).validate())

    cfg = TrainConfig(
        epochs=8, batch_size=8, lr=0.005, dropout=0.0, seed=5,
        encoder=EncoderConfig(layers=1, model_dim=16, heads=2, ff_dim=16,
                              max_pieces=64, dropout=0.0),
        pair_dim=8, label_dim=8, dep_dim=8, subword_vocab_size=80)
    result = train(data, cfg)

    queue = []
    for i in range(8):
        inst = instance(100 + i, "ABDT"[i % 4])
        inst.label = None
        inst.uid = f"q-{i}"
        queue.append(inst)

    journal = Path(tempfile.mkdtemp()) / "journal.jsonl"
    annotation = AnnotationStore(queue, labels=["A", "B", "D", "T"], journal_path=journal)
    app = create_app(model=result.model, store=result.store, annotation=annotation,
                     config_echo=result.checkpoint_config())
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
