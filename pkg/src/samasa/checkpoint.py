"""Versioned checkpoint container.

Byte layout (documented here and in docs/checkpoint_format.md):

    bytes 0..7    magic  b"SAMASA\\x00\\x01"
    bytes 8..15   little-endian uint64: header length H
    bytes 16..16+H JSON header, UTF-8, sorted keys
    then          raw little-endian C-order arrays, at header-given offsets
                  relative to the start of this data section

Header fields: ``format_version``, ``seed``, ``step``, ``dtype``, ``config``
(opaque echo supplied by the caller: model/train config plus vocabularies),
``params`` and ``opt_state`` manifests, each entry carrying name / shape /
dtype / offset / nbytes. Save then load reproduces every array bit-exactly.
"""

from __future__ import annotations

import json

import numpy as np

from .optim import ParameterStore

MAGIC = b"SAMASA\x00\x01"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def checkpoint_bytes(store: ParameterStore, config: dict | None = None,
                     include_opt_state: bool = True) -> bytes:
    entries = []
    blobs = []
    offset = 0

    def push(kind_list, name, arr):
        nonlocal offset
        raw = np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        kind_list.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": arr.dtype.str if arr.dtype.str.startswith("<") else "<" + arr.dtype.str[1:],
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)

    for name in store.names():
        push(entries, name, store[name].data)

    opt_entries = []
    if include_opt_state:
        for name in store.names():
            state = store.opt_state.get(name)
            if not state:
                continue
            for slot in sorted(state):
                push(opt_entries, f"{name}.{slot}", state[slot])

    header = {
        "format_version": FORMAT_VERSION,
        "seed": store.seed,
        "step": store.step_count,
        "dtype": np.dtype(store.dtype).str,
        "config": config or {},
        "params": entries,
        "opt_state": opt_entries,
    }
    header_raw = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += len(header_raw).to_bytes(8, "little")
    out += header_raw
    for raw in blobs:
        out += raw
    return bytes(out)


def save_checkpoint(path, store: ParameterStore, config: dict | None = None,
                    include_opt_state: bool = True):
    with open(path, "wb") as f:
        f.write(checkpoint_bytes(store, config, include_opt_state))


def load_checkpoint(path) -> tuple[ParameterStore, dict]:
    """Rebuild a ParameterStore (values, step, optimizer slots) plus the config echo."""
    with open(path, "rb") as f:
        raw = f.read()
    return checkpoint_from_bytes(raw)


def checkpoint_from_bytes(raw: bytes) -> tuple[ParameterStore, dict]:
    if raw[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    hlen = int.from_bytes(raw[8:16], "little")
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {header.get('format_version')}")
    data = raw[16 + hlen:]

    def pull(entry) -> np.ndarray:
        start, nbytes = entry["offset"], entry["nbytes"]
        arr = np.frombuffer(data[start:start + nbytes], dtype=np.dtype(entry["dtype"]))
        return arr.reshape(entry["shape"]).copy()

    store = ParameterStore(seed=header["seed"], dtype=np.dtype(header["dtype"]))
    store.step_count = header["step"]
    for entry in header["params"]:
        arr = pull(entry)
        p = store.parameter(entry["name"], arr.shape, init="zeros")
        p.data = arr
    for entry in header["opt_state"]:
        name, slot = entry["name"].rsplit(".", 1)
        store.opt_state.setdefault(name, {})[slot] = pull(entry)
    return store, header.get("config", {})
