"""Wire-format helpers shared with the kgcomplete toolkit.

Artifact directories carry a manifest.json with sha256 hashes of their
files; float blocks are little-endian IEEE-754 float32 in C order. These
mirror the consumer's conventions byte for byte.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ManifestMismatch


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def load_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def check_hash(path, expected, what="file"):
    path = Path(path)
    if not path.exists():
        raise ManifestMismatch(f"{what} {path} is missing")
    actual = sha256_file(path)
    if actual != expected:
        raise ManifestMismatch(f"{what} {path}: sha256 {actual} != recorded {expected}")


def write_f32(path, array):
    np.asarray(array, dtype="<f4").tofile(path)


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
