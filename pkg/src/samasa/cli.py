"""Command-line entry points.

Every subcommand validates its inputs, writes results under --out, never
mutates input files, and exits non-zero with a single machine-parsable
``error: <kind>: <message>`` line on failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .data import ContextInstance, dataset_stats, load_jsonl_dataset, load_splits
from .model import Model, apply_context_mode
from .training import GridCell, TrainConfig, evaluate, run_experiment_grid, train


def _write_json(path, payload):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, sort_keys=True, indent=2)
        f.write("\n")


def _load_model(checkpoint_path):
    store, echo = load_checkpoint(checkpoint_path)
    return Model.from_echo(echo), store, echo


def _train_config(args) -> TrainConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            cfg = TrainConfig.from_json(json.load(f))
    else:
        cfg = TrainConfig()
    overrides = {}
    for name in ("epochs", "batch_size", "lr", "seed", "dropout", "context_mode"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "heads", None):
        overrides["heads"] = tuple(args.heads.split(","))
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return cfg


# -- subcommands ---------------------------------------------------------------


def cmd_train(args) -> int:
    config = _train_config(args)
    train_set = load_jsonl_dataset(args.data)
    dev_set = load_jsonl_dataset(args.dev) if args.dev else None
    result = train(train_set, config, dev_set=dev_set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "model.ckpt", result.store, config=result.checkpoint_config())
    with open(out / "train_log.jsonl", "w", encoding="utf-8") as f:
        for entry in result.epoch_log:
            f.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"wrote {out / 'model.ckpt'} ({len(result.epoch_log)} epochs)")
    return 0


def cmd_eval(args) -> int:
    model, store, echo = _load_model(args.checkpoint)
    dataset = load_jsonl_dataset(args.data)
    context_mode = echo.get("train", {}).get("context_mode", "with")
    report, confusion = evaluate(model, store, dataset, context_mode=context_mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "metrics.json", report.to_json())
    _write_json(out / "confusion.json", confusion.to_json())
    with open(out / "confusion.csv", "w", encoding="utf-8") as f:
        f.write("gold\\pred," + ",".join(confusion.labels) + "\n")
        for label, row in zip(confusion.labels, confusion.counts):
            f.write(label + "," + ",".join(str(int(v)) for v in row) + "\n")
    print(f"accuracy={report.accuracy:.4f} macro_f1={report.macro_f1:.4f}")
    return 0


def cmd_predict(args) -> int:
    model, store, echo = _load_model(args.checkpoint)
    dataset = load_jsonl_dataset(args.data)
    context_mode = echo.get("train", {}).get("context_mode", "with")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as f:
        for inst in dataset:
            inst = apply_context_mode(inst, context_mode)
            report = model.predict(store, inst, heatmap_layer=args.layer,
                                   heatmap_head=args.head)
            f.write(json.dumps(report.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
    print(f"wrote {args.out} ({len(dataset)} reports)")
    return 0


def cmd_grid(args) -> int:
    with open(args.config, encoding="utf-8") as f:
        spec = json.load(f)
    base = TrainConfig.from_json(spec.get("train", {}))
    datasets = {}
    for name, paths in spec["datasets"].items():
        datasets[name] = {
            split: (load_jsonl_dataset(p) if p else None)
            for split, p in (("train", paths.get("train")), ("dev", paths.get("dev")),
                             ("test", paths.get("test")))
        }
    cells = [GridCell.from_json(c) for c in spec["cells"]]
    rows = run_experiment_grid(base, cells, datasets)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "grid.json", rows)
    with open(out / "grid.csv", "w", encoding="utf-8") as f:
        f.write("name,accuracy,macro_precision,macro_recall,macro_f1,total\n")
        for row in rows:
            m = row["metrics"]
            f.write(f"{row['name']},{m['accuracy']:.4f},{m['macro_precision']:.4f},"
                    f"{m['macro_recall']:.4f},{m['macro_f1']:.4f},{m['total']}\n")
    print(f"wrote {out / 'grid.csv'} ({len(rows)} cells)")
    return 0


def cmd_heatmap(args) -> int:
    model, store, _ = _load_model(args.checkpoint)
    inst = ContextInstance(tokens=args.tokens.split(),
                           compound_index=args.compound_index).validate()
    report = model.predict(store, inst, heatmap_layer=args.layer, heatmap_head=args.head)
    _write_json(args.out, {"tokens": report.tokens + [inst.compound],
                           "heatmaps": report.heatmaps})
    if args.svg:
        _render_heatmap_svg(args.svg, report.heatmaps, report.tokens + [inst.compound])
    print(f"wrote {args.out}")
    return 0


def _render_heatmap_svg(path, heatmaps, labels, cell=28):
    """Minimal SVG rendering: one colored grid per heatmap."""
    parts = ['<svg xmlns="http://www.w3.org/2000/svg" '
             f'width="{(len(labels) + 2) * cell * len(heatmaps)}" '
             f'height="{(len(labels) + 2) * cell}">']
    x_base = 0
    for name, matrix in sorted(heatmaps.items()):
        parts.append(f'<text x="{x_base + cell}" y="{cell - 10}" font-size="12">{name}</text>')
        for i, row in enumerate(matrix):
            for j, value in enumerate(row):
                shade = int(255 * (1 - value))
                parts.append(
                    f'<rect x="{x_base + (j + 1) * cell}" y="{(i + 1) * cell}" '
                    f'width="{cell}" height="{cell}" '
                    f'fill="rgb({shade},{shade},255)"><title>{value:.4f}</title></rect>')
        x_base += (len(labels) + 2) * cell
    parts.append("</svg>")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(parts), encoding="utf-8")


def cmd_data_stats(args) -> int:
    splits = load_splits(train=args.train, dev=args.dev, test=args.test)
    if not splits:
        raise FileNotFoundError("no dataset files found among --train/--dev/--test")
    stats = dataset_stats(splits)
    print(json.dumps(stats, ensure_ascii=False, sort_keys=True, indent=2))
    if args.out:
        _write_json(args.out, stats)
    return 0


def cmd_annotate_export(args) -> int:
    from .service import AnnotationStore

    store = AnnotationStore([], [], journal_path=args.journal)
    payload = store.export()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.jsonl", "w", encoding="utf-8") as f:
        for record in payload["records"]:
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    _write_json(out / "summary.json", payload["summary"])
    print(f"wrote {out / 'records.jsonl'} ({len(payload['records'])} records)")
    return 0


def cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service import app_from_files

    app = app_from_files(checkpoint_path=args.checkpoint, queue_path=args.queue,
                         journal_path=args.journal)
    host = args.host or os.environ.get("SAMASA_HOST", "127.0.0.1")
    port = args.port or int(os.environ.get("SAMASA_PORT", "8570"))
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="samasa",
        description="Context-sensitive compound semantic-type identification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--dev")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="TrainConfig JSON file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--heads", help="comma-separated head list, e.g. sacti,morph,dep")
    p.add_argument("--context-mode", dest="context_mode", choices=("with", "without"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write one prediction report per instance")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--layer", type=int, default=None, help="attention heatmap layer")
    p.add_argument("--head", type=int, default=0, help="attention heatmap head")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("grid", help="run an experiment grid from a JSON spec")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("heatmap", help="heatmap matrices for one sentence")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokens", required=True, help="space-separated tokens")
    p.add_argument("--compound-index", dest="compound_index", type=int, required=True)
    p.add_argument("--layer", type=int, default=None)
    p.add_argument("--head", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", help="also render an SVG grid")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("data-stats", help="split/label counts and unique compounds")
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_data_stats)

    p = sub.add_parser("annotate-export", help="export annotation journal + summary")
    p.add_argument("--journal", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate_export)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--checkpoint")
    p.add_argument("--queue", help="JSONL instances to annotate")
    p.add_argument("--journal", help="annotation journal path")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # single-line, machine-parsable failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
