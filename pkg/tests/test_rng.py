from __future__ import annotations

import hashlib

from hypothesis import given
from hypothesis import strategies as st

from faultbench.rng import U64_MASK, SeededStream, stream

# first draws, computed with hashlib before the stream existed
ZERO_EMPTY = 6979070505787324960  # sha256(00 * 18)[:8], big-endian
ZERO_A = 3175711664071439258
ZERO_B = 1255792901529118776


def _oracle(seed: int, label: bytes, counter: int) -> int:
    msg = seed.to_bytes(8, "little") + b"\x00" + label + b"\x00" + counter.to_bytes(8, "little")
    return int.from_bytes(hashlib.sha256(msg).digest()[:8], "big")


def test_frozen_first_draws():
    assert hashlib.sha256(bytes(18)).hexdigest().startswith("60daa3a5f7dbfa20")
    assert SeededStream(0).next_u64() == ZERO_EMPTY
    assert SeededStream(0, "a").next_u64() == ZERO_A
    assert SeededStream(0, "b").next_u64() == ZERO_B


@given(st.integers(0, U64_MASK), st.binary(max_size=40), st.integers(0, 50))
def test_matches_construction(seed, label, skip):
    s = SeededStream(seed, label)
    for _ in range(skip):
        s.next_u64()
    assert s.next_u64() == _oracle(seed, label, skip)
    assert s.counter == skip + 1


def test_equal_streams_agree_for_1000_draws():
    a, b = SeededStream(42, "gen/train/0/x"), SeededStream(42, "gen/train/0/x")
    assert [a.next_u64() for _ in range(1000)] == [b.next_u64() for _ in range(1000)]


def test_labels_separate_streams():
    assert len({SeededStream(5, f"fault/t/{i}").next_u64() for i in range(200)}) == 200


def test_fork_is_independent():
    s = SeededStream(9, "x")
    s.next_u64()
    f = s.fork()
    first = f.next_u64()
    assert s.peek_u64() == first
    f.next_u64()
    assert s.next_u64() == first


@given(st.integers(0, U64_MASK), st.text(max_size=20))
def test_unit_range(seed, label):
    s = SeededStream(seed, label)
    for _ in range(20):
        assert 0.0 <= s.next_unit() < 1.0


def test_unit_never_reaches_one():
    class Saturated(SeededStream):
        def next_u64(self) -> int:
            return U64_MASK

    assert Saturated(0).next_unit() < 1.0


def test_unit_mean():
    s = SeededStream(2024, "mean")
    n = 100_000
    assert abs(sum(s.next_unit() for _ in range(n)) / n - 0.5) < 0.01


def test_unit_replays():
    a = SeededStream(3, "p", counter=17)
    b = a.fork()
    assert a.next_unit() == b.next_unit()


@given(st.lists(st.integers(), max_size=30), st.integers(0, U64_MASK))
def test_shuffle_is_permutation(items, seed):
    shuffled = list(items)
    SeededStream(seed, "shuffle").shuffle(shuffled)
    assert sorted(shuffled) == sorted(items)


def test_stream_label_joins_parts():
    assert stream(1, "gen", "train", 3, "content").label == b"gen/train/3/content"


def test_rejects_out_of_range_seed():
    import pytest

    with pytest.raises(ValueError):
        SeededStream(-1)
    with pytest.raises(ValueError):
        SeededStream(U64_MASK + 1)
    with pytest.raises(ValueError):
        SeededStream(0).next_below(0)
