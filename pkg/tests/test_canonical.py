from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from faultbench.canonical import (
    EncodingError,
    canonical_bytes,
    canonical_lines,
    parse,
    parse_lines,
    strict_equal,
)

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-(2**63), 2**63)
    | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=5), inner, max_size=4),
    max_leaves=20,
)


def test_sorted_keys_without_whitespace():
    assert canonical_bytes({"b": 1, "a": 2}) == b'{"a":2,"b":1}'


def test_unicode_is_literal_utf8():
    assert canonical_bytes({"k": "é"}) == '{"k":"é"}'.encode("utf-8")


def test_tuples_and_to_dict_objects():
    class Thing:
        def to_dict(self):
            return {"z": (1, 2)}

    assert canonical_bytes([Thing()]) == b'[{"z":[1,2]}]'


@pytest.mark.parametrize("bad", [math.nan, math.inf, {1, 2}, object(), b"raw"])
def test_unencodable_values(bad):
    with pytest.raises(EncodingError):
        canonical_bytes({"x": bad})


def test_lines_are_lf_terminated():
    data = canonical_lines([{"a": 1}, [2]])
    assert data == b'{"a":1}\n[2]\n'
    assert parse_lines(data) == [{"a": 1}, [2]]


@given(json_values)
def test_round_trip_is_stable(value):
    once = canonical_bytes(value)
    assert canonical_bytes(parse(once)) == once
    assert strict_equal(parse(once), value)


def test_strict_equal_keeps_types_apart():
    assert not strict_equal(True, 1)
    assert not strict_equal(1, 1.0)
    assert not strict_equal({"a": [1]}, {"a": [True]})
    assert strict_equal({"a": [1, {"b": None}]}, {"a": [1, {"b": None}]})
    assert not strict_equal({"a": 1}, {"a": 1, "b": 2})
