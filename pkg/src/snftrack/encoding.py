"""Canonical byte encoding and domain-separated hashing.

Every structure that gets signed or hashed goes through :func:`canonical`.
Dict keys are emitted in lexicographic order and every scalar carries a
one-byte type tag plus a 4-byte big-endian length, so two independent
encoders agree byte for byte.
"""

from __future__ import annotations

import hashlib
import struct
from collections import Counter
from enum import Enum
from typing import Any

# Domain separation prefixes.
LEAF = b"\x00"
NODE = b"\x01"
HEADER = b"\x02"
TX = b"\x03"
COMMIT_LEAF = b"\x05"
RECORD_SET = b"\x06"

ZERO_HASH = bytes(32)

# Deterministic operation counters (hashes, signature checks, bytes written).
OPS: Counter = Counter()


def _len(n: int) -> bytes:
    return struct.pack(">I", n)


def canonical(value: Any) -> bytes:
    if value is None:
        return b"N"
    if isinstance(value, Enum):
        return canonical(value.value)
    if isinstance(value, bool):
        return b"T" if value else b"F"
    if isinstance(value, int):
        s = str(value).encode()
        return b"I" + _len(len(s)) + s
    if isinstance(value, float):
        s = repr(value).encode()
        return b"R" + _len(len(s)) + s
    if isinstance(value, str):
        s = value.encode("utf-8")
        return b"S" + _len(len(s)) + s
    if isinstance(value, (bytes, bytearray)):
        return b"B" + _len(len(value)) + bytes(value)
    if isinstance(value, (list, tuple)):
        return b"L" + _len(len(value)) + b"".join(canonical(v) for v in value)
    if isinstance(value, (set, frozenset)):
        items = sorted(canonical(v) for v in value)
        return b"L" + _len(len(items)) + b"".join(items)
    if isinstance(value, dict):
        keys = sorted(value)
        for k in keys:
            if not isinstance(k, str):
                raise TypeError(f"canonical dict keys must be str, got {type(k).__name__}")
        return b"D" + _len(len(keys)) + b"".join(canonical(k) + canonical(value[k]) for k in keys)
    raise TypeError(f"cannot canonically encode {type(value).__name__}")


def sha256(data: bytes) -> bytes:
    OPS["hashes"] += 1
    return hashlib.sha256(data).digest()


def tagged_hash(tag: bytes, data: bytes) -> bytes:
    return sha256(tag + data)


def length_prefixed(*parts: bytes) -> bytes:
    return b"".join(_len(len(p)) + p for p in parts)
