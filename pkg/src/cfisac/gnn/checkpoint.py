"""Plain-text parameter checkpoints.

Layout (UTF-8, one record per line)::

    cfisac-gnn-checkpoint 1
    meta <json object>
    tensor <name> <ndim> <dim_1> ... <dim_n>
    <all values, C order, space separated, float repr>
    ...

Values are written with ``repr`` so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

MAGIC = "cfisac-gnn-checkpoint"
VERSION = 1


def save_checkpoint(path, params: dict, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MAGIC} {VERSION}\n")
        fh.write("meta " + json.dumps(meta or {}, sort_keys=True) + "\n")
        for name in sorted(params):
            arr = np.asarray(params[name], dtype=np.float64)
            fh.write(f"tensor {name} {arr.ndim} {' '.join(map(str, arr.shape))}".rstrip() + "\n")
            fh.write(" ".join(repr(float(v)) for v in arr.ravel()) + "\n")


def load_checkpoint(path):
    """Returns ``(params, meta)``."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    if int(head[1]) != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {head[1]}")
    if not lines[1].startswith("meta "):
        raise ValueError(f"{path}: missing meta record")
    meta = json.loads(lines[1][5:])
    params = {}
    i = 2
    while i < len(lines):
        parts = lines[i].split()
        if parts[0] != "tensor":
            raise ValueError(f"{path}:{i + 1}: expected tensor header")
        name, ndim = parts[1], int(parts[2])
        shape = tuple(int(s) for s in parts[3:3 + ndim])
        values = np.array([float(v) for v in lines[i + 1].split()], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise ValueError(f"{path}:{i + 2}: {name} expects {int(np.prod(shape))} values")
        params[name] = values.reshape(shape)
        i += 2
    return params, meta
