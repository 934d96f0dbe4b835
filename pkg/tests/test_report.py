import io
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klcurves.montecarlo import McEstimate
from klcurves.report import (
    COLUMNS,
    ReportRow,
    ReportWriteError,
    RunReport,
    emit,
    format_number,
    parse_csv,
    parse_json,
    render,
)


def make_report(rows=None):
    rows = rows or [
        ReportRow(3, math.inf, math.inf, math.inf, 0, False, True),
        ReportRow(4, 0.36481857726926026, 0.3651, 0.0011, 100000, True, True),
    ]
    return RunReport("gaussian-known-mean(d=1)", "forward", rows, seed=42, kind="simulate")


finite_floats = st.floats(allow_nan=False, allow_infinity=False, width=64)
any_floats = st.floats(allow_nan=True, allow_infinity=True, width=64)


class TestCsv:
    def test_single_row(self):
        text = render(make_report([ReportRow(5, 1.0, 1.0, 0.0, 0, True, True)]), "csv")
        lines = text.splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(COLUMNS)

    def test_infinite_sentinel(self):
        line = render(make_report(), "csv").splitlines()[1]
        assert line == "3,inf,inf,inf,0,false,true"

    def test_seventeen_digits(self):
        assert format_number(0.1) == "0.10000000000000001"
        assert format_number(1 / 3) == "0.33333333333333331"
        assert format_number(-math.inf) == "-inf"
        assert format_number(math.nan) == "nan"
        assert format_number(7) == "7"

    def test_round_trip(self):
        r = make_report()
        assert parse_csv(render(r, "csv")) == list(r.rows)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 10**6), any_floats, any_floats, finite_floats, st.integers(0, 10**7), st.booleans()), min_size=1, max_size=5))
    def test_round_trip_property(self, raw):
        rows = [ReportRow(n, cf, m, abs(se), reps, math.isfinite(cf), ok) for n, cf, m, se, reps, ok in raw]
        back = parse_csv(render(make_report(rows), "csv"))
        for a, b in zip(rows, back):
            for name in ("n", "closed_form", "mc_mean", "mc_stderr", "reps"):
                x, y = getattr(a, name), getattr(b, name)
                assert (math.isnan(x) and math.isnan(y)) or x == y
            assert (a.finite, a.passed) == (b.finite, b.passed)

    def test_bad_header(self):
        with pytest.raises(ValueError):
            parse_csv("a,b\n1,2\n")


class TestJson:
    def test_infinite_marker_and_no_nulls(self):
        text = render(make_report(), "json")
        assert "null" not in text
        doc = json.loads(text)
        assert doc["rows"][0]["infinite"] is True
        assert doc["rows"][0]["closed_form"] == "inf"
        assert doc["rows"][1]["infinite"] is False

    def test_round_trip(self):
        r = make_report()
        assert parse_json(render(r, "json")) == r

    def test_same_numbers_as_csv(self):
        r = make_report([ReportRow(9, 0.1 + 0.2, 1 / 3, 2e-17, 10, True, False)])
        from_csv = parse_csv(render(r, "csv"))[0]
        from_json = parse_json(render(r, "json")).rows[0]
        assert from_csv == from_json


class TestEmit:
    def test_deterministic(self):
        assert render(make_report(), "csv") == render(make_report(), "csv")
        assert render(make_report(), "json") == render(make_report(), "json")

    def test_timing_not_emitted(self):
        a = RunReport("m", "forward", make_report().rows, elapsed=1.0)
        b = RunReport("m", "forward", make_report().rows, elapsed=99.0)
        assert render(a, "json") == render(b, "json")

    def test_stream_and_path(self, tmp_path):
        buf = io.StringIO()
        emit(make_report(), "csv", buf)
        path = tmp_path / "out.csv"
        emit(make_report(), "csv", path)
        assert path.read_text() == buf.getvalue()

    def test_unwritable(self, tmp_path):
        with pytest.raises(ReportWriteError):
            emit(make_report(), "csv", tmp_path / "missing" / "out.csv")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render(make_report(), "xml")


class TestPassFlag:
    def test_from_estimate(self):
        ok = ReportRow.from_estimate(5, 1.0, McEstimate(1.2, 0.1, 1000, 0))
        bad = ReportRow.from_estimate(5, 1.0, McEstimate(1.4, 0.1, 1000, 0))
        assert ok.passed and not bad.passed

    def test_both_infinite(self):
        est = McEstimate(12.0, 3.0, 1000, 0, divergent=True, reason="divergent-expectation")
        row = ReportRow.from_estimate(2, math.inf, est)
        assert row.passed and not row.finite

    def test_finite_target_with_divergent_estimate_fails(self):
        est = McEstimate(1.0, 0.1, 1000, 0, infinite_fraction=0.01)
        assert not ReportRow.from_estimate(2, 1.0, est).passed

    def test_report_pass(self):
        assert make_report().passed
        failing = make_report([ReportRow(1, 1.0, 2.0, 0.1, 10, True, False)])
        assert not failing.passed
