"""Seed derivation, hashing and atomic file helpers."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def derive_seed(*parts) -> int:
    """Deterministic 63-bit seed from an arbitrary tuple of labels.

    Uses SHA-256 over the stringified parts, so the result is stable across
    processes and platforms (unlike ``hash()``).
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def seed_state(*parts) -> np.ndarray:
    """Expand labels into a nonzero 2-word xorshift128 state."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    state = np.frombuffer(digest[:16], dtype=np.uint64).copy()
    if state[0] == 0 and state[1] == 0:
        state[0] = np.uint64(0x9E3779B97F4A7C15)
    return state


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj) -> str:
    """JSON text with sorted keys and fixed separators (byte-reproducible)."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
