"""Stable seed derivation shared by every stochastic stage."""
from __future__ import annotations

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(seed: int, *keys: object) -> int:
    """Derive a child seed from ``seed`` and arbitrary hashable ``keys``.

    Python's ``hash`` is salted per process, so the derivation goes through
    sha256 of the repr to stay identical across runs and worker processes.
    """
    h = hashlib.sha256(repr((int(seed),) + tuple(keys)).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little") & _MASK
