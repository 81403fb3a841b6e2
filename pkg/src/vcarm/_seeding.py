"""Stable sub-seed derivation for reproducible, parallelizable pipelines."""

from __future__ import annotations

import hashlib

_MASK63 = (1 << 63) - 1


def derive_seed(master: int, *tags) -> int:
    """Derive a 63-bit sub-seed from a master seed and a tag tuple.

    The derivation is a SHA-256 hash of the canonical string form of
    (master, *tags), so it is stable across processes and sessions.
    Tags are typically stage names, fold indices, column names, etc.
    """
    key = repr((int(master),) + tuple(tags)).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big") & _MASK63
