"""HTTP service: prediction endpoint plus the annotation workflow.

The loaded checkpoint is frozen and shared read-only across requests, so
prediction is referentially transparent. Annotation submissions go through an
append-only JSONL journal guarded by a lock (single writer); the journal is
replayed on startup, which is the whole persistence story at this scale.

Endpoints (all JSON; schemas in docs/http_api.md):

    GET  /health
    GET  /config
    POST /predict                {tokens, compound_index[, heatmap_layer, heatmap_head]}
    GET  /annotation/next        ?annotator=ID
    POST /annotation/{uid}       {annotator_id, choice[, comment, idempotency_key]}
    GET  /annotation/export
    POST /annotation/import      {records: [...]}
    GET  /admin/labels
    POST /admin/labels           {labels: [...]}
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .annotation import NOT_SURE, AnnotationRecord, aggregate_annotations, pairwise_kappa
from .checkpoint import load_checkpoint
from .data import ContextInstance, DatasetError
from .model import Model
from .optim import ParameterStore


class AnnotationStore:
    """Append-only journal of annotation records over a fixed instance queue."""

    def __init__(self, instances: list[ContextInstance], labels: list[str],
                 journal_path: str | Path | None = None):
        self.instances: dict[str, ContextInstance] = {}
        self.order: list[str] = []
        for i, inst in enumerate(instances):
            uid = inst.uid or f"inst-{i:05d}"
            inst.uid = uid
            self.instances[uid] = inst
            self.order.append(uid)
        self.labels = list(labels)
        self.journal_path = Path(journal_path) if journal_path else None
        self.records: list[AnnotationRecord] = []
        self._keys: dict[tuple, AnnotationRecord] = {}
        self._dedup: set[tuple] = set()
        self._lock = threading.Lock()
        self._next_id = 0
        if self.journal_path and self.journal_path.exists():
            self._replay()

    def _replay(self):
        with open(self.journal_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                key = obj.pop("idempotency_key", None)
                record = AnnotationRecord.from_json(obj)
                self._attach(record, key)

    def _attach(self, record: AnnotationRecord, idempotency_key):
        self.records.append(record)
        self._dedup.add(self._content_key(record))
        if idempotency_key is not None:
            self._keys[(record.instance_id, record.annotator_id, idempotency_key)] = record
        if record.record_id is not None:
            self._next_id = max(self._next_id, record.record_id + 1)

    @staticmethod
    def _content_key(record: AnnotationRecord) -> tuple:
        return (record.instance_id, record.annotator_id, record.choice,
                record.comment, record.timestamp)

    def _append_journal(self, record: AnnotationRecord, idempotency_key):
        if self.journal_path is None:
            return
        obj = record.to_json()
        if idempotency_key is not None:
            obj["idempotency_key"] = idempotency_key
        with open(self.journal_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")

    # -- workflow ------------------------------------------------------------

    def next_for(self, annotator_id: str) -> dict:
        """Least-annotated instance this annotator has not handled yet."""
        with self._lock:
            seen = {r.instance_id for r in self.records if r.annotator_id == annotator_id}
            counts = {uid: 0 for uid in self.order}
            for r in self.records:
                if r.instance_id in counts:
                    counts[r.instance_id] += 1
            candidates = [uid for uid in self.order if uid not in seen]
            payload = None
            if candidates:
                uid = min(candidates, key=lambda u: (counts[u], self.order.index(u)))
                inst = self.instances[uid]
                payload = {"uid": uid, "tokens": inst.tokens,
                           "compound_index": inst.compound_index,
                           "language": inst.language}
            return {"instance": payload, "done": len(seen & set(self.order)),
                    "total": len(self.order), "labels": list(self.labels)}

    def submit(self, instance_id: str, annotator_id: str, choice: str,
               comment: str = "", idempotency_key: str | None = None) -> AnnotationRecord:
        with self._lock:
            if instance_id not in self.instances:
                raise KeyError(instance_id)
            if choice != NOT_SURE and choice not in self.labels:
                raise ValueError(
                    f"choice {choice!r} not in label set {self.labels} or {NOT_SURE!r}")
            if idempotency_key is not None:
                existing = self._keys.get((instance_id, annotator_id, idempotency_key))
                if existing is not None:
                    return existing
            record = AnnotationRecord(
                instance_id=instance_id, annotator_id=annotator_id, choice=choice,
                comment=comment, timestamp=time.time(), record_id=self._next_id)
            self._next_id += 1
            self._attach(record, idempotency_key)
            self._append_journal(record, idempotency_key)
            return record

    def latest_per_annotator(self) -> list[AnnotationRecord]:
        latest: dict[tuple, AnnotationRecord] = {}
        for r in self.records:
            latest[(r.instance_id, r.annotator_id)] = r
        return [latest[k] for k in sorted(latest)]

    def export(self) -> dict:
        with self._lock:
            effective = self.latest_per_annotator()
            labels, dropped = aggregate_annotations(effective)
            return {
                "records": [r.to_json() for r in self.records],
                "summary": {
                    "labels": labels,
                    "dropped": dropped,
                    "kappa": pairwise_kappa(effective),
                },
            }

    def import_records(self, objs: list[dict]) -> int:
        added = 0
        with self._lock:
            for obj in objs:
                record = AnnotationRecord.from_json(dict(obj))
                if self._content_key(record) in self._dedup:
                    continue
                if record.record_id is None or any(
                        r.record_id == record.record_id for r in self.records):
                    record.record_id = self._next_id
                self._attach(record, None)
                self._append_journal(record, None)
                added += 1
        return added


class PredictRequest(BaseModel):
    tokens: list[str]
    compound_index: int
    heatmap_layer: int | None = None
    heatmap_head: int = 0


class SubmitRequest(BaseModel):
    annotator_id: str = Field(min_length=1)
    choice: str
    comment: str = ""
    idempotency_key: str | None = None


class ImportRequest(BaseModel):
    records: list[dict]


class LabelsRequest(BaseModel):
    labels: list[str] = Field(min_length=1)


def create_app(model: Model | None = None, store: ParameterStore | None = None,
               annotation: AnnotationStore | None = None,
               config_echo: dict | None = None) -> FastAPI:
    app = FastAPI(title="samasa", version="0.1.0")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    annotation = annotation if annotation is not None else AnnotationStore([], [])

    @app.get("/health")
    def health():
        return {"status": "ok", "model_loaded": model is not None,
                "annotation_instances": len(annotation.order)}

    @app.get("/config")
    def config():
        return config_echo or {}

    @app.post("/predict")
    def predict(req: PredictRequest):
        if model is None or store is None:
            raise HTTPException(status_code=503, detail="no checkpoint loaded")
        try:
            inst = ContextInstance(tokens=req.tokens,
                                   compound_index=req.compound_index).validate()
        except DatasetError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            report = model.predict(store, inst, heatmap_layer=req.heatmap_layer,
                                   heatmap_head=req.heatmap_head)
        except IndexError as exc:
            raise HTTPException(status_code=400, detail=f"field heatmap: {exc}")
        return report.to_json()

    @app.get("/annotation/next")
    def annotation_next(annotator: str):
        return annotation.next_for(annotator)

    @app.get("/annotation/export")
    def annotation_export():
        return annotation.export()

    @app.post("/annotation/import")
    def annotation_import(req: ImportRequest):
        try:
            added = annotation.import_records(req.records)
        except (TypeError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=f"malformed record: {exc}")
        return {"added": added}

    # keep the path-parameter route after the fixed /annotation/* paths
    @app.post("/annotation/{uid}")
    def annotation_submit(uid: str, req: SubmitRequest):
        try:
            record = annotation.submit(uid, req.annotator_id, req.choice,
                                       comment=req.comment,
                                       idempotency_key=req.idempotency_key)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown instance {uid!r}")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return record.to_json()

    @app.get("/admin/labels")
    def get_labels():
        return {"labels": list(annotation.labels)}

    @app.post("/admin/labels")
    def set_labels(req: LabelsRequest):
        annotation.labels = list(req.labels)
        return {"labels": list(annotation.labels)}

    return app


def app_from_files(checkpoint_path=None, queue_path=None, journal_path=None,
                   labels: list[str] | None = None) -> FastAPI:
    """Build the service from on-disk artifacts (the `serve` CLI entry)."""
    model = store = None
    config_echo: dict = {}
    if checkpoint_path:
        store, config_echo = load_checkpoint(checkpoint_path)
        model = Model.from_echo(config_echo)
    instances: list[ContextInstance] = []
    if queue_path:
        from .data import load_jsonl_dataset
        instances = load_jsonl_dataset(queue_path)
    if labels is None:
        if model is not None:
            labels = list(model.type_vocab.names)
        else:
            labels = sorted({i.label for i in instances if i.label is not None})
    annotation = AnnotationStore(instances, labels, journal_path)
    return create_app(model=model, store=store, annotation=annotation,
                      config_echo=config_echo)
