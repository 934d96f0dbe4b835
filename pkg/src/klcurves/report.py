"""Serialisation of curve tables, simulation results and verification outcomes.

CSV columns are fixed: ``n,closed_form,mc_mean,mc_stderr,reps,finite,pass``.
Floats are written with 17 significant digits (lossless for doubles) and
non-finite values as ``inf``, ``-inf`` or ``nan``.  JSON carries the same
fields per row plus an ``"infinite"`` marker for the closed form, encodes
non-finite numbers as those same strings and never contains ``null``.

Wall-clock timing is kept on the report object but never emitted, so equal
runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional, Sequence, Union

import numpy as np

from .errors import DomainError
from .montecarlo import CI_MULTIPLIER, McEstimate

__all__ = [
    "ReportRow",
    "RunReport",
    "ReportWriteError",
    "COLUMNS",
    "render",
    "emit",
    "parse_csv",
    "parse_json",
    "format_number",
    "TOOL_VERSION",
]

TOOL_VERSION = "0.1.0"
COLUMNS = ("n", "closed_form", "mc_mean", "mc_stderr", "reps", "finite", "pass")
FORMATS = ("csv", "json")


class ReportWriteError(OSError):
    """The output destination could not be written."""


def agreement(closed_form: float, mean: float, stderr: float, divergent: bool = False) -> bool:
    """``|mean - closed_form| <= 3 stderr``, or both sides flagged infinite."""
    if math.isinf(closed_form):
        return divergent or math.isinf(mean)
    if divergent or not (math.isfinite(mean) and math.isfinite(stderr)):
        return False
    return abs(mean - closed_form) <= CI_MULTIPLIER * stderr


@dataclass(frozen=True)
class ReportRow:
    """One grid point.

    ``n`` is usually a sample size but may be a real abscissa for quadrature
    checks.  ``passed`` is set by the producer; :meth:`from_estimate` derives it
    from the 3-standard-error agreement rule.
    """

    n: Union[int, float]
    closed_form: float
    mc_mean: float
    mc_stderr: float
    reps: int
    finite: bool
    passed: bool

    @classmethod
    def from_estimate(cls, n, closed_form: float, est: McEstimate) -> "ReportRow":
        ok = agreement(closed_form, est.mean, est.stderr, est.divergent)
        if math.isfinite(closed_form) and not est.reliable:
            ok = False
        return cls(n, closed_form, est.mean, est.stderr, est.replicates, math.isfinite(closed_form), ok)

    @classmethod
    def exact(cls, n, closed_form: float, check: float, passed: bool) -> "ReportRow":
        """A deterministic check: ``check`` is the numerical value compared to ``closed_form``."""
        return cls(n, closed_form, check, 0.0, 0, math.isfinite(closed_form), bool(passed))


@dataclass(frozen=True)
class RunReport:
    model: str
    direction: str
    rows: tuple
    seed: int = 0
    kind: str = "curve"
    tool_version: str = TOOL_VERSION
    elapsed: float = field(default=0.0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def format_number(x: Union[int, float]) -> str:
    """17 significant digits, or ``inf``/``-inf``/``nan``; integers verbatim."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _parse_number(s: str) -> Union[int, float]:
    s = s.strip()
    if s.lstrip("-").isdigit():
        return int(s)
    return float(s)


def _bool(b: bool) -> str:
    return "true" if b else "false"


def _parse_bool(s: str) -> bool:
    if s == "true":
        return True
    if s == "false":
        return False
    raise DomainError(f"expected true/false, got {s!r}")


def _row_fields(r: ReportRow) -> list[str]:
    return [
        format_number(r.n),
        format_number(float(r.closed_form)),
        format_number(float(r.mc_mean)),
        format_number(float(r.mc_stderr)),
        str(int(r.reps)),
        _bool(r.finite),
        _bool(r.passed),
    ]


def _render_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow(_row_fields(r))
    return buf.getvalue()


def _json_number(x: Union[int, float]):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else format_number(x)


def _render_json(report: RunReport) -> str:
    rows = []
    for r in report.rows:
        rows.append(
            {
                "n": _json_number(r.n),
                "closed_form": _json_number(float(r.closed_form)),
                "mc_mean": _json_number(float(r.mc_mean)),
                "mc_stderr": _json_number(float(r.mc_stderr)),
                "reps": int(r.reps),
                "finite": bool(r.finite),
                "pass": bool(r.passed),
                "infinite": math.isinf(r.closed_form),
            }
        )
    doc = {
        "tool_version": report.tool_version,
        "kind": report.kind,
        "model": report.model,
        "direction": report.direction,
        "seed": int(report.seed),
        "pass": report.passed,
        "columns": list(COLUMNS),
        "rows": rows,
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def render(report: RunReport, fmt: str = "csv") -> str:
    """The report as text in ``fmt`` (``"csv"`` or ``"json"``)."""
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "json":
        return _render_json(report)
    raise DomainError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def emit(report: RunReport, fmt: str = "csv", destination: Optional[Union[str, Path, IO[str]]] = None) -> str:
    """Render ``report`` and write it to ``destination`` (a path or text stream).

    With ``destination=None`` nothing is written.  Returns the rendered text.

    Raises:
        ReportWriteError: if the destination path cannot be written.
    """
    text = render(report, fmt)
    if destination is None:
        return text
    if hasattr(destination, "write"):
        destination.write(text)
        return text
    try:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportWriteError(f"cannot write {destination}: {exc.strerror or exc}") from exc
    return text


def _row_from_strings(values: Sequence[str]) -> ReportRow:
    n, cf, mean, se, reps, finite, passed = values
    return ReportRow(
        n=_parse_number(n),
        closed_form=float(cf),
        mc_mean=float(mean),
        mc_stderr=float(se),
        reps=int(reps),
        finite=_parse_bool(finite),
        passed=_parse_bool(passed),
    )


def parse_csv(text: str) -> list[ReportRow]:
    """Rows of a CSV emitted by :func:`emit`."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != COLUMNS:
        raise DomainError(f"unexpected CSV header {header!r}")
    return [_row_from_strings(rec) for rec in reader if rec]


def _from_json_number(v):
    if isinstance(v, str):
        return float(v)
    return v


def parse_json(text: str) -> RunReport:
    """Inverse of the JSON emission (``elapsed`` is not stored and comes back as 0)."""
    doc = json.loads(text)
    rows = tuple(
        ReportRow(
            n=_from_json_number(r["n"]),
            closed_form=float(_from_json_number(r["closed_form"])),
            mc_mean=float(_from_json_number(r["mc_mean"])),
            mc_stderr=float(_from_json_number(r["mc_stderr"])),
            reps=int(r["reps"]),
            finite=bool(r["finite"]),
            passed=bool(r["pass"]),
        )
        for r in doc["rows"]
    )
    return RunReport(
        model=doc["model"],
        direction=doc["direction"],
        rows=rows,
        seed=int(doc["seed"]),
        kind=doc["kind"],
        tool_version=doc["tool_version"],
    )
