"""Canonical byte encoding shared by task files, traces, reports and checksums."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable
from typing import Any


class EncodingError(ValueError):
    """Raised for values that have no canonical encoding."""


def _plain(value: Any) -> Any:
    to_dict = getattr(value, "to_dict", None)
    if callable(to_dict):
        return to_dict()
    if isinstance(value, tuple):
        return list(value)
    raise EncodingError(f"cannot encode value of type {type(value).__name__}")


def canonical_bytes(value: Any) -> bytes:
    """Sorted keys, no whitespace, UTF-8, shortest round-trip floats.

    Objects exposing ``to_dict()`` are encoded through it, so any task-model
    value can be passed directly.
    """
    try:
        text = json.dumps(
            value,
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
            allow_nan=False,
            default=_plain,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, EncodingError):
            raise
        raise EncodingError(str(exc)) from exc
    return text.encode("utf-8")


def canonical_lines(values: Iterable[Any]) -> bytes:
    """One canonical record per line, each terminated by LF."""
    return b"".join(canonical_bytes(v) + b"\n" for v in values)


def parse(data: bytes | str) -> Any:
    return json.loads(data)


def parse_lines(data: bytes | str) -> list[Any]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return [json.loads(line) for line in data.split("\n") if line]


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest(value: Any) -> str:
    return sha256_hex(canonical_bytes(value))


def strict_equal(a: Any, b: Any) -> bool:
    """Deep equality that keeps ``True``, ``1`` and ``1.0`` apart."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, dict):
        return (
            isinstance(b, dict)
            and a.keys() == b.keys()
            and all(strict_equal(a[k], b[k]) for k in a)
        )
    if isinstance(a, (list, tuple)):
        return (
            isinstance(b, (list, tuple))
            and len(a) == len(b)
            and all(strict_equal(x, y) for x, y in zip(a, b))
        )
    if isinstance(a, int) and isinstance(b, int):
        return a == b
    if type(a) is not type(b):
        return False
    return a == b
