import math

import pytest
from hypothesis import given, settings, strategies as st

from surfdelta.convergence import error_ratios, observed_order, richardson
from surfdelta.records import config_hash, from_keyed_text, to_csv, to_keyed_text

finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(finite, finite, finite, st.floats(0.1, 2.0))
def test_richardson_exact_for_h2_h3(limit, c2, c3, h0):
    vals = [limit + c2 * (h0 / 2**k) ** 2 + c3 * (h0 / 2**k) ** 3 for k in range(3)]
    est, err = richardson(vals)
    assert est == pytest.approx(limit, abs=1e-9 * (1 + abs(c2) + abs(c3) + abs(limit)))
    assert err >= 0


def test_richardson_edge_cases():
    assert richardson([2.5]) == (2.5, pytest.approx(float("nan"), nan_ok=True))
    with pytest.raises(ValueError):
        richardson([])
    est, _ = richardson([1.0 + 0.25, 1.0 + 0.0625])
    assert est == pytest.approx(1.0)


def test_observed_order_and_ratios():
    vals = [1 + 0.1 * 2.0 ** (-2 * k) for k in range(3)]
    assert observed_order(vals) == pytest.approx(2.0)
    assert list(error_ratios(vals, 1.0)) == pytest.approx([0.25, 0.25])
    assert math.isinf(observed_order([1.0, 1.0, 1.0]))


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(
    st.text(alphabet="abcdefghij_", min_size=1, max_size=8),
    st.one_of(st.integers(-10**6, 10**6), st.floats(allow_nan=False, allow_infinity=False), st.booleans(),
              st.none()),
    max_size=6,
))
def test_keyed_text_roundtrip(record):
    text = to_keyed_text(record, header=["h1", "config_hash: abc"])
    assert text.startswith("# h1\n")
    back = from_keyed_text(text)
    assert back == record


def test_csv_and_hash():
    text = to_csv([{"a": 1, "b": 0.5}, {"a": 2, "b": None}], ["a", "b"], header=["x"])
    assert text.splitlines() == ["# x", "a,b", "1,0.5", "2,none"]
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
