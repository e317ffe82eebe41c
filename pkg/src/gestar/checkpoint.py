"""Versioned binary checkpoints for flat parameter vectors.

Layout: 8 magic bytes, little-endian uint32 version, little-endian uint64
parameter count, then the raw little-endian float64 parameters. A JSON
sidecar next to the binary maps named sub-modules to (offset, length)
ranges inside the vector and carries free-form metadata.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError

MAGIC = b"GESTCKPT"
VERSION = 1


def sidecar_path(path: Path | str) -> Path:
    return Path(path).with_suffix(".json")


def save_checkpoint(
    path: Path | str,
    vector: np.ndarray,
    modules: dict[str, tuple[int, int]],
    meta: dict | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vec = np.ascontiguousarray(np.asarray(vector, dtype=np.float64))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", vec.size))
        fh.write(vec.astype("<f8").tobytes())
    sidecar = {
        "version": VERSION,
        "n_params": int(vec.size),
        "modules": {name: {"offset": int(o), "length": int(n)} for name, (o, n) in modules.items()},
        "meta": meta or {},
    }
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_checkpoint(path: Path | str) -> tuple[np.ndarray, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValidationError(f"{path}: bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ValidationError(f"{path}: unsupported checkpoint version {version}")
        (count,) = struct.unpack("<Q", fh.read(8))
        payload = fh.read(count * 8)
    if len(payload) != count * 8:
        raise ValidationError(f"{path}: truncated checkpoint payload")
    vector = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    side = sidecar_path(path)
    sidecar = {}
    if side.exists():
        with open(side, "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    return vector, sidecar


def file_digest(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
