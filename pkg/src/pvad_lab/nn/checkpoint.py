"""Checkpoint format: one JSON header line, then little-endian float blobs.

Round-tripping is bitwise stable for float64 parameters.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .params import ModelParams

_MAGIC = "pvad-ckpt-v1"


def save_checkpoint(path, params: ModelParams, metadata: dict | None = None,
                    step: int = 0) -> None:
    header = {
        "format": _MAGIC,
        "dtype": "<f8",
        "step": int(step),
        "metadata": metadata or {},
        "params": [
            {
                "name": name,
                "shape": list(value.shape),
                "trainable": params.trainable[name],
            }
            for name, value in params.values.items()
        ],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for value in params.values.values():
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (params, metadata, step)."""
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != _MAGIC:
        raise ValueError(f"{path}: not a {_MAGIC} checkpoint")
    params = ModelParams()
    offset = 0
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        raw = blob[offset : offset + 8 * count]
        if len(raw) != 8 * count:
            raise ValueError(f"{path}: truncated blob for {entry['name']!r}")
        value = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        params.add(entry["name"], value, entry["trainable"])
        offset += 8 * count
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} trailing bytes")
    return params, header.get("metadata", {}), header.get("step", 0)
