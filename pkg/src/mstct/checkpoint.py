"""Checkpoints: ``<stem>.json`` index plus ``<stem>.bin`` little-endian float64 blob.

The index holds the model config and, per parameter in enumeration order,
``{name, shape, offset, count}`` with offsets in elements.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import numerics as nx
from .model import ModelConfig, ModelParams, param_shapes

CKPT_VERSION = 1
BLOB_DTYPE = np.dtype("<f8")


class CheckpointError(ValueError):
    """Checkpoint missing, malformed, or incompatible with the config."""


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    stem = p.with_suffix("") if p.suffix in (".json", ".bin") else p
    return stem.with_suffix(".json"), stem.with_suffix(".bin")


def save_checkpoint(path, params: ModelParams, cfg: ModelConfig, extra: dict | None = None) -> Path:
    index_path, blob_path = _paths(path)
    index_path.parent.mkdir(parents=True, exist_ok=True)
    entries, offset, chunks = [], 0, []
    for name, t in params.items():
        entries.append({"name": name, "shape": list(t.shape), "offset": offset, "count": int(t.size)})
        chunks.append(np.ascontiguousarray(t.data, dtype=BLOB_DTYPE).reshape(-1))
        offset += t.size
    blob = np.concatenate(chunks) if chunks else np.zeros(0, BLOB_DTYPE)
    blob_path.write_bytes(blob.tobytes())
    index = {"format_version": CKPT_VERSION, "dtype": "float64", "byte_order": "little",
             "blob": blob_path.name, "config": cfg.to_dict(), "params": entries}
    if extra:
        index["extra"] = extra
    index_path.write_text(json.dumps(index, indent=1))
    return index_path


def read_index(path) -> dict:
    index_path, _ = _paths(path)
    if not index_path.is_file():
        raise CheckpointError(f"checkpoint index not found: {index_path}")
    try:
        return json.loads(index_path.read_text())
    except json.JSONDecodeError as e:
        raise CheckpointError(f"malformed checkpoint index {index_path}: {e}") from None


def load_checkpoint(path, cfg: ModelConfig | None = None) -> tuple[ModelParams, ModelConfig]:
    """Load parameters; with ``cfg`` given, shapes must match it exactly."""
    index_path, blob_path = _paths(path)
    index = read_index(index_path)
    stored_cfg = ModelConfig.from_dict(index["config"])
    cfg = cfg or stored_cfg
    blob_path = index_path.parent / index.get("blob", blob_path.name)
    if not blob_path.is_file():
        raise CheckpointError(f"checkpoint blob not found: {blob_path}")
    blob = np.frombuffer(blob_path.read_bytes(), dtype=BLOB_DTYPE)
    stored = {e["name"]: e for e in index["params"]}
    expected = {name: shape for name, shape, _ in param_shapes(cfg)}
    diff = []
    for name, shape in expected.items():
        if name not in stored:
            diff.append(f"missing {name} {shape}")
        elif tuple(stored[name]["shape"]) != tuple(shape):
            diff.append(f"{name}: checkpoint {tuple(stored[name]['shape'])} vs config {tuple(shape)}")
    diff += [f"unexpected {n}" for n in stored if n not in expected]
    if diff:
        raise CheckpointError("checkpoint/config mismatch:\n  " + "\n  ".join(diff))
    params = ModelParams()
    for name, shape in expected.items():
        e = stored[name]
        end = e["offset"] + e["count"]
        if end > blob.size:
            raise CheckpointError(f"blob too short for {name}: need {end} values, have {blob.size}")
        params[name] = nx.parameter(blob[e["offset"] : end].reshape(shape), name=name)
    return params, cfg
