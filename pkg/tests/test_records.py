import itertools
import math

import pytest
from hypothesis import given, strategies as st

from ictqkd.records import (
    LABELS,
    CapacityError,
    ProtocolParams,
    enumerate_records,
    normalize_label,
    parse_record,
    record_index,
    record_label,
    record_probability,
)


def test_counts():
    assert len(enumerate_records(3)) == 81
    assert enumerate_records(0) == [("m",), ("n",), ("w",)]
    recs = enumerate_records(1)
    assert len(recs) == 9 and recs[0] == ("m", "m") and recs[-1] == ("w", "w")
    assert len(enumerate_records(3, length_offset=1)) == 27
    assert enumerate_records(0, length_offset=1) == [()]


@pytest.mark.parametrize("xi", range(0, 5))
def test_sorted_unique_and_indexed(xi):
    recs = enumerate_records(xi)
    assert recs == sorted(recs, key=lambda r: [LABELS.index(c) for c in r])
    assert len(set(recs)) == len(recs)
    assert [record_index(r) for r in recs] == list(range(len(recs)))


def test_capacity_and_domain_errors():
    with pytest.raises(CapacityError):
        enumerate_records(9)
    with pytest.raises(ValueError):
        enumerate_records(-1)
    with pytest.raises(ValueError):
        enumerate_records(1, length_offset=2)


def test_labels():
    assert normalize_label("mu") == "m"
    assert normalize_label("ω") == "w"
    assert parse_record("mnw") == ("m", "n", "w")
    assert record_label(("w", "m")) == "wm"
    with pytest.raises(ValueError):
        normalize_label("x")
    with pytest.raises(ValueError):
        parse_record("")


def test_probability_examples():
    degenerate = ProtocolParams({"m": 0.5, "n": 0.1, "w": 0.0}, {"m": 1, "n": 0, "w": 0}, xi=3)
    assert record_probability(("m",) * 4, degenerate) == 1.0
    assert record_probability(("m", "n", "m", "m"), degenerate) == 0.0
    uniform = ProtocolParams({"m": 0.5, "n": 0.1, "w": 0.0})
    assert record_probability(("m", "w"), uniform) == pytest.approx(1 / 9)
    p = ProtocolParams({"m": 0.5, "n": 0.1, "w": 0.0}, {"m": 0.6, "n": 0.25, "w": 0.15})
    assert record_probability(("m", "n"), p) == pytest.approx(0.15)


@given(
    st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3),
    st.integers(0, 4),
)
def test_probabilities_sum_to_one(weights, xi):
    total = sum(weights)
    p = ProtocolParams({"m": 0.5, "n": 0.1, "w": 0.0}, dict(zip(LABELS, [w / total for w in weights])), xi=xi)
    s = math.fsum(record_probability(r, p) for r in enumerate_records(xi))
    assert abs(s - 1) < 1e-12


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(intensities={"m": 0.1, "n": 0.5, "w": 0.0}),
        dict(intensities={"m": 0.5, "n": 0.1, "w": 0.0}, probabilities={"m": 0.5, "n": 0.5, "w": 0.5}),
        dict(intensities={"m": 0.5, "n": 0.1, "w": 0.0}, q_z=1.5),
        dict(intensities={"m": 0.5, "n": 0.1}),
    ],
)
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        ProtocolParams(**kwargs)


def test_replace_and_q_x():
    p = ProtocolParams({"mu": 0.5, "nu": 0.1, "omega": 0.0}, q_z=0.7)
    assert p.q_x == pytest.approx(0.3)
    assert p.replace(xi=2).xi == 2 and p.mu == 0.5
    assert list(itertools.islice(p.intensities, 3)) == ["m", "n", "w"]
