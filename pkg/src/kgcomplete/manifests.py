"""Manifest and binary-block persistence helpers.

Every pipeline artifact directory carries a manifest.json binding its
outputs to the sha256 of its inputs; downstream stages refuse inputs whose
recorded hashes disagree with the files on disk.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import HashMismatch


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def dump_json(obj, path):
    """Stable, human-readable JSON: sorted keys, trailing newline."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def load_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def manifest_hash(manifest_path) -> str:
    return sha256_file(manifest_path)


def check_hash(path, expected, what="artifact"):
    actual = sha256_file(path)
    if actual != expected:
        raise HashMismatch(f"{what}: {path} has hash {actual[:12]}…, expected {expected[:12]}…")


def write_f32(path, array):
    """Little-endian IEEE-754 float32 block, C order."""
    np.asarray(array, dtype="<f4").tofile(path)


def read_f32(path, shape):
    arr = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(shape))
    if arr.size != expected:
        raise HashMismatch(f"{path}: expected {expected} float32 values, found {arr.size}")
    return arr.reshape(shape)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
