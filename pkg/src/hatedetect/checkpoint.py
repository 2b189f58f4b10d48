"""Versioned JSON checkpoints mapping named parameter sections to arrays.

Floats are serialized through Python's repr (the json module's default),
which round-trips float64 exactly, so save/load is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

FORMAT = "hatedetect-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    """Malformed or incompatible checkpoint file."""


def _encode_array(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def _decode_array(obj: dict) -> np.ndarray:
    arr = np.array(obj["data"], dtype=np.float64).reshape(obj["shape"])
    return arr


def save_checkpoint(path: Union[str, Path], sections: dict, meta: dict | None = None) -> None:
    """Write {section: {name: ndarray}} plus optional JSON-safe metadata."""
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "meta": meta or {},
        "sections": {
            sec: {name: _encode_array(np.asarray(arr, dtype=np.float64))
                  for name, arr in group.items()}
            for sec, group in sections.items()
        },
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: Union[str, Path]) -> tuple[dict, dict]:
    """Read a checkpoint; returns (sections, meta)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"not a checkpoint file: {path}: {exc}") from exc
    if doc.get("format") != FORMAT:
        raise CheckpointError(f"unrecognized checkpoint format in {path}")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')}")
    sections = {
        sec: {name: _decode_array(obj) for name, obj in group.items()}
        for sec, group in doc["sections"].items()
    }
    return sections, doc.get("meta", {})
