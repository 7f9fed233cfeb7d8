"""Deterministic report files.

Every number is printed with 17 significant digits so reports are regression
baselines by textual diff, and files appear atomically: content is staged in
the target directory and moved into place, so a failed run leaves either no
file or the previous one.
"""

from __future__ import annotations

import os
import tempfile
from typing import Iterable, Sequence

from .errors import ConfigError

__all__ = [
    "fmt17",
    "format_cell",
    "write_csv",
    "error_report_rows",
    "crime_report_rows",
    "CONVERGE_COLUMNS",
    "CRIME_COLUMNS",
    "SOLVE_COLUMNS",
    "INTERP_CHECK_COLUMNS",
]

CONVERGE_COLUMNS = ("level", "h", "dofs", "err_l2", "err_curl", "err_hcurl",
                    "err_zeta_h1", "rate_hcurl")
CRIME_COLUMNS = ("level", "h", "dofs", "lambda_min", "lambda_max",
                 "crime_norm", "discrepancy", "solution_gap", "rate_gap")
SOLVE_COLUMNS = ("block", "index", "value")
INTERP_CHECK_COLUMNS = ("check", "name", "degree", "value")


def fmt17(x: float) -> str:
    """17-significant-digit decimal, enough to round-trip any double."""
    return "%.17g" % float(x)


def format_cell(value) -> str:
    if isinstance(value, bool):
        raise ConfigError("reports carry numbers and names, not booleans")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return fmt17(value)
    return str(value)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence],
              comments: Sequence[str] = ()) -> None:
    """Write a CSV atomically: stage next to the target, then replace."""
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ConfigError(
                f"row width {len(row)} does not match {len(columns)} columns")
        lines.append(",".join(format_cell(v) for v in row))
    text = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    try:
        fd, staged = tempfile.mkstemp(prefix=".feclab-", suffix=".csv",
                                      dir=directory)
        try:
            with os.fdopen(fd, "w", newline="\n") as handle:
                handle.write(text)
            os.replace(staged, path)
        except BaseException:
            if os.path.exists(staged):
                os.unlink(staged)
            raise
    except OSError as exc:
        raise ConfigError(f"cannot write report to '{path}': {exc}") from exc


def error_report_rows(report) -> list:
    """CSV rows of an ErrorReport; the rate column lags by one level."""
    rates = report.hcurl_rates()
    rows = []
    for i, row in enumerate(report.rows):
        rate = float("nan") if i == 0 else rates[i - 1]
        rows.append((row.level, row.h, row.dofs, row.err_l2, row.err_curl,
                     row.err_hcurl, row.err_zeta_h1, rate))
    return rows


def crime_report_rows(report) -> list:
    rates = report.gap_rates()
    rows = []
    for i, level in enumerate(report.levels):
        rate = float("nan") if i == 0 else rates[i - 1]
        rows.append((level.level, level.h, level.dofs, level.lambda_min,
                     level.lambda_max, level.crime_norm, level.discrepancy,
                     level.solution_gap, rate))
    return rows
