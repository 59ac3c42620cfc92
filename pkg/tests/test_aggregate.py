import csv
import logging
import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rodiac.aggregate import (
    AggregationError,
    aps,
    build_report,
    mtas,
    pivot_report,
    render_text,
    rpr,
    summary_rows,
    tas,
)
from rodiac.metrics import EVALUATORS

TABLE5 = Path(__file__).parent / "fixtures" / "table5_mtas.csv"
unit = st.floats(0.0, 1.0, allow_nan=False)


def flat(value):
    return {ev: value for ev in EVALUATORS}


def test_table5_rpr_within_rounding():
    with open(TABLE5, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 13
    for row in rows:
        got = rpr(float(row["MTAS"]), 0.8100)
        assert abs(got - float(row["printed_RPR"])) <= 0.001, row["model"]


def test_aps_and_tas_cardinality():
    assert aps([0.5, 1.0]) == 0.75
    with pytest.raises(AggregationError):
        aps([])
    assert tas([0.5] * 16) == 0.5
    assert tas([0.25] * 8, n_datasets=1) == 0.25
    with pytest.raises(AggregationError):
        tas([0.5] * 15)
    with pytest.raises(AggregationError):
        tas([0.5] * 8)


def test_mtas_ties_and_rpr_guard():
    assert mtas({"b": 0.9, "a": 0.9, "c": 0.1}) == (0.9, "a")
    with pytest.raises(AggregationError):
        mtas({})
    with pytest.raises(AggregationError):
        rpr(0.5, 0.0)


@given(st.lists(unit, min_size=1, max_size=40))
def test_aps_bounds_and_order_independence(xs):
    a = aps(xs)
    assert min(xs) - 1e-15 <= a <= max(xs) + 1e-15
    assert a == aps(list(reversed(xs)))


@given(st.dictionaries(st.sampled_from("abcdef"), unit, min_size=1))
def test_mtas_is_max(mapping):
    best, template = mtas(mapping)
    assert best == max(mapping.values())
    assert mapping[template] == best


def _scores():
    return {
        ("echo", "none", "A"): [flat(0.8), flat(0.6)],
        ("echo", "none", "B"): [flat(0.9)],
        ("m", "t1", "A"): [flat(1.0)],
        ("m", "t1", "B"): [flat(0.8)],
        ("m", "t2", "A"): [flat(0.2)],
        ("m", "t2", "B"): [flat(0.4)],
    }


def test_build_report_end_to_end():
    report = build_report(_scores(), datasets=["A", "B"], developers={"m": "Acme"})
    assert report.aps[("echo", "none", "A", "RA_CS_CL")] == pytest.approx(0.7)
    assert report.tas[("echo", "none")] == pytest.approx(0.8)
    assert report.tas[("m", "t1")] == pytest.approx(0.9)
    assert report.mtas["m"] == (pytest.approx(0.9), "t1")
    assert report.rpr["m"] == pytest.approx(0.9 / 0.8)
    assert report.rpr["echo"] == 1.0
    assert report.developers == {"m": "Acme", "echo": "baseline"}
    assert report.counts[("echo", "none", "A")] == 2

    header, rows = pivot_report(report)
    assert header[:4] == ["developer", "model", "template", "A:RA_CS_CL"]
    assert header[-1] == "TAS" and len(header) == 3 + 16 + 1
    assert [r[1:3] for r in rows] == [["m", "t1"], ["m", "t2"], ["echo", "none"]]

    header, rows = summary_rows(report)
    assert [r[1] for r in rows] == ["m", "echo"]
    text = render_text(report)
    assert "0.9000" in text and "1.125" in text


def test_reduced_mode_and_missing_echo(caplog):
    scores = {("m", "t", "A"): [flat(0.5)]}
    with caplog.at_level(logging.WARNING, logger="rodiac"):
        report = build_report(scores)
    assert report.tas_datasets[("m", "t")] == 1
    assert not report.has_rpr and report.rpr == {}
    assert "Echo" in caplog.text
    assert "n/a" in render_text(report)


def test_rpr_of_echo_is_one():
    report = build_report(_scores())
    assert math.isclose(report.rpr["echo"], 1.0)


def test_empty_report_rejected():
    with pytest.raises(AggregationError):
        build_report({})
