import json
import math

import pytest

from onefractal.jsonio import dumps_canonical, format_float, loads


def test_floats_round_trip_exactly():
    values = [0.1, 1 / 3, 1e-300, 123456.789, 3.5, -0.0, 2**53 + 1.0]
    text = dumps_canonical(values)
    assert loads(text) == values


def test_serialization_is_canonical():
    doc = {"b": [1, 2.5], "a": {"x": None, "y": True}}
    assert dumps_canonical(doc) == dumps_canonical(doc)


def test_key_order_is_insertion_order():
    assert dumps_canonical({"z": 1, "a": 2}).index('"z"') < dumps_canonical(
        {"z": 1, "a": 2}
    ).index('"a"')


def test_output_is_valid_json():
    doc = {"maps": [{"a": 0.5}], "probs": [1.0], "seed": None, "ok": False}
    assert json.loads(dumps_canonical(doc)) == doc


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        format_float(math.nan)
    with pytest.raises(ValueError):
        dumps_canonical({"x": math.inf})


def test_seventeen_significant_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(3.5) == "3.5"
