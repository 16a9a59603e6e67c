"""Hash-counter random streams that replay bit-for-bit on every platform.

Each draw is ``SHA-256(seed_le8 || 0x00 || label || 0x00 || counter_le8)``
truncated to its first 8 bytes (big-endian). No stock PRNG is involved, so any
language with a SHA-256 primitive reproduces the same sequence.

Label conventions::

    gen/<split>/<index>/<field>     dataset generation
    fault/<task_id>/<fault_index>   probabilistic fault triggers
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from typing import TypeVar

T = TypeVar("T")

U64_MASK = (1 << 64) - 1


class SeededStream:
    """A deterministic stream of unsigned 64-bit integers.

    Copying a stream (:meth:`fork`) gives an independent cursor over the same
    sequence; advancing one never affects the other.
    """

    __slots__ = ("seed", "label", "counter")

    def __init__(self, seed: int, label: str | bytes = b"", counter: int = 0) -> None:
        if not 0 <= seed <= U64_MASK:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        if not 0 <= counter <= U64_MASK:
            raise ValueError(f"counter out of range: {counter}")
        self.seed = seed
        self.label = label.encode("utf-8") if isinstance(label, str) else bytes(label)
        self.counter = counter

    def __repr__(self) -> str:
        return f"SeededStream(seed={self.seed}, label={self.label!r}, counter={self.counter})"

    def fork(self) -> SeededStream:
        return SeededStream(self.seed, self.label, self.counter)

    def peek_u64(self) -> int:
        msg = (
            self.seed.to_bytes(8, "little")
            + b"\x00"
            + self.label
            + b"\x00"
            + self.counter.to_bytes(8, "little")
        )
        return int.from_bytes(hashlib.sha256(msg).digest()[:8], "big")

    def next_u64(self) -> int:
        value = self.peek_u64()
        self.counter = (self.counter + 1) & U64_MASK
        return value

    def next_unit(self) -> float:
        """Next draw scaled into ``[0, 1)``.

        The top 53 bits are used so the result is the largest double not
        exceeding ``u64 / 2**64``; a plain float division can round up to 1.0.
        """
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def next_below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def choice(self, items: Sequence[T]) -> T:
        return items[self.next_below(len(items))]

    def shuffle(self, items: list[T]) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]


def stream(seed: int, *parts: object) -> SeededStream:
    """Build a stream whose label joins ``parts`` with ``/``."""
    return SeededStream(seed, "/".join(str(p) for p in parts))
