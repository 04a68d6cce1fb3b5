"""Versioned JSON checkpoints: architecture descriptor + flat weight arrays.

Floats go through python's shortest-repr JSON encoding, which round-trips
IEEE doubles exactly, so save/load is bit-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def state_dict(module):
    """Flat {name: {shape, data}} mapping of a module's parameters."""
    out = {}
    for name, p in module.parameters():
        out[name] = {"shape": list(p.data.shape), "data": p.data.ravel().tolist()}
    return out


def load_state_dict(module, state):
    params = dict(module.parameters())
    if set(params) != set(state):
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}")
    for name, entry in state.items():
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != params[name].data.shape:
            raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {params[name].data.shape}")
        params[name].data = arr


def save_checkpoint(path, blocks, metadata=None):
    """Write {block_name: (architecture, module)} plus metadata to JSON."""
    doc = {"format_version": FORMAT_VERSION, "metadata": metadata or {}, "models": {}}
    for name, (architecture, module) in blocks.items():
        doc["models"][name] = {"architecture": architecture, "params": state_dict(module)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version: {version!r}")
    return doc
