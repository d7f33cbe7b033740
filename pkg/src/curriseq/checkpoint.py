"""Deterministic named-tensor checkpoint files.

Layout (all little-endian, no timestamps, so identical state produces
byte-identical files):

    magic line  b"CSEQCKPT 1\\n"
    header      one JSON line: model config, seed, format version, package
                version, extra metadata, and the tensor table
                [[name, shape], ...] in storage order
    payload     the tensors' float64 bytes, concatenated in table order

Round trips are bit-exact; ``content_hash`` is just the SHA-256 of the file
bytes.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from . import __version__
from . import autodiff as ad
from .model import ModelConfig

MAGIC = b"CSEQCKPT 1\n"


def save_checkpoint(path, config: ModelConfig, params, extra: dict | None = None) -> None:
    """Write model config plus named tensors; ``extra`` may hold more arrays
    (e.g. optimizer moments) under string keys mapping to float64 arrays,
    and scalar metadata under ``extra['meta']``."""
    extra = extra or {}
    meta = extra.get("meta", {})
    tensors: dict[str, np.ndarray] = {f"param/{k}": t.data for k, t in params.items()}
    for key, value in extra.items():
        if key == "meta":
            continue
        tensors[key] = np.asarray(value, dtype=np.float64)
    table = [[name, list(tensors[name].shape)] for name in sorted(tensors)]
    header = {
        "format": 1,
        "toolkit_version": __version__,
        "config": config.to_dict(),
        "seed": config.seed,
        "meta": meta,
        "tensors": table,
    }
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for name, _ in table:
            f.write(np.ascontiguousarray(tensors[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (config, params, extra_arrays, meta)."""
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a curriseq checkpoint")
        header = json.loads(f.readline())
        tensors = {}
        for name, shape in header["tensors"]:
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path}: truncated tensor {name}")
            tensors[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    config = ModelConfig(**header["config"])
    params = {
        name[len("param/") :]: ad.parameter(arr)
        for name, arr in tensors.items()
        if name.startswith("param/")
    }
    extra = {name: arr for name, arr in tensors.items() if not name.startswith("param/")}
    return config, params, extra, header.get("meta", {})


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
