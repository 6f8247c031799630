"""Content and key hashing for instrumented containers.

Keys and string contents are summarized by FNV-1a 64 truncated to 32 bits.
Keys are first turned into a canonical byte encoding so equal keys always
hash equally, independent of process or hash randomization.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from typing import Any

FNV64_OFFSET_BASIS = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


def fnv1a_64(data: bytes) -> int:
    """Return the 64-bit FNV-1a hash of ``data``.

    Examples:
        >>> hex(fnv1a_64(b""))
        '0xcbf29ce484222325'
        >>> hex(fnv1a_64(b"a"))
        '0xaf63dc4c8601ec8c'
    """
    h = FNV64_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def hash32(data: bytes) -> int:
    """FNV-1a 64 truncated to its low 32 bits."""
    return fnv1a_64(data) & _MASK32


def canonical_key_bytes(key: Any) -> bytes:
    """Serialize a map key to a canonical byte string.

    Strings and bytes encode as themselves; everything else goes through a
    sorted, whitespace-free JSON rendering tagged with the type name so that
    ``1`` and ``"1"`` do not collide. Keys that compare equal as dict keys
    across numeric types (``True``, ``1`` and ``1.0``) encode as the int.

    Objects without a JSON form fall back to ``repr``. When that ``repr``
    embeds the object address, equal keys of such types hash differently.

    Examples:
        >>> canonical_key_bytes(True) == canonical_key_bytes(1.0) == b"int:1"
        True
    """
    if isinstance(key, str):
        return b"s:" + key.encode("utf-8")
    if isinstance(key, (bytes, bytearray, memoryview)):
        return b"b:" + bytes(key)
    key = _normalize_number(key)
    rendered = json.dumps(
        _coerce_json_value(key),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return f"{type(key).__name__}:{rendered}".encode()


def key_hash(key: Any) -> int:
    """32-bit summary of a map key, deterministic per key value."""
    return hash32(canonical_key_bytes(key))


def _coerce_json_value(value: Any) -> Any:
    value = _normalize_number(value)
    if isinstance(value, Mapping):
        return {str(key): _coerce_json_value(item) for key, item in value.items()}

    if isinstance(value, (list, tuple)):
        return [_coerce_json_value(item) for item in value]

    if isinstance(value, (set, frozenset)):
        return sorted((_coerce_json_value(item) for item in value), key=repr)

    if isinstance(value, (str, int, float, bool)) or value is None:
        return value

    if isinstance(value, (bytes, bytearray, memoryview)):
        return bytes(value).decode("utf-8", errors="replace")

    return repr(value)


def _normalize_number(value: Any) -> Any:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value
