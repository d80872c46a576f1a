"""Plain-text model checkpoints.

Layout (UTF-8, ``\\n`` line ends)::

    cascade-forensics-detector <version>
    meta <one-line JSON: threshold, config, history, accounts>
    tensor <name> <ndim> <dim_1> ... <dim_ndim>
    <values, row-major, space separated, shortest round-trip repr>
    ...

A 0-d tensor has ``ndim`` 0 and a single value line; a 1-d tensor writes
one line; an n-d tensor writes one line per leading-axis slice (flattened).
Tensors: every network parameter, ``feature_mean``, ``feature_scale``,
``user_vectors`` and ``user_singular_values``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import PARAM_ORDER, DetectorModel
from .users import UserVectors

MAGIC = "cascade-forensics-detector"
VERSION = 1


def _write_tensor(fh, name: str, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=float)
    fh.write(f"tensor {name} {arr.ndim}{''.join(' ' + str(d) for d in arr.shape)}\n")
    rows = [arr.reshape(1)] if arr.ndim == 0 else ([arr] if arr.ndim == 1 else list(arr.reshape(arr.shape[0], -1)))
    if arr.ndim >= 1 and arr.shape[0] == 0:
        return
    for row in rows:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def save_model(model: DetectorModel, path: str | Path) -> None:
    meta = {
        "threshold": model.threshold,
        "config": model.config,
        "history": model.history,
        "accounts": model.user_vectors.accounts,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{MAGIC} {VERSION}\n")
        fh.write("meta " + json.dumps(meta, sort_keys=True) + "\n")
        for k in PARAM_ORDER:
            _write_tensor(fh, k, model.params[k])
        _write_tensor(fh, "feature_mean", model.feature_mean)
        _write_tensor(fh, "feature_scale", model.feature_scale)
        _write_tensor(fh, "user_vectors", model.user_vectors.vectors)
        _write_tensor(fh, "user_singular_values", model.user_vectors.singular_values)


def load_model(path: str | Path) -> DetectorModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise ValueError(f"{path}: not a detector checkpoint")
    if int(head[1]) != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {head[1]}")
    meta = json.loads(lines[1][len("meta "):])
    tensors: dict[str, np.ndarray] = {}
    i = 2
    while i < len(lines) and lines[i]:
        parts = lines[i].split()
        if parts[0] != "tensor":
            raise ValueError(f"{path}:{i + 1}: expected tensor header")
        name, ndim = parts[1], int(parts[2])
        shape = tuple(int(d) for d in parts[3:3 + ndim])
        n_lines = 1 if ndim <= 1 else shape[0]
        if ndim >= 1 and shape[0] == 0:
            n_lines = 0
        values = [float(v) for line in lines[i + 1:i + 1 + n_lines] for v in line.split()]
        tensors[name] = np.array(values, dtype=float).reshape(shape)
        i += 1 + n_lines
    uv = UserVectors(list(meta["accounts"]), tensors["user_vectors"], tensors["user_singular_values"])
    params = {k: tensors[k] for k in PARAM_ORDER}
    return DetectorModel(params, tensors["feature_mean"], tensors["feature_scale"], uv,
                         threshold=meta["threshold"], config=meta["config"], history=list(meta["history"]))
