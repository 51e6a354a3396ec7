"""Plain-text renderings of convergence reports.

Markdown mirrors the usual error table layout (level, energy error, order,
L2 error, order) with errors in 4-decimal scientific notation.  CSV carries
the same formatted columns plus full-precision ``repr`` values so the numbers
round-trip exactly.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable

from .convergence import ConvergenceReport

FORMATS = ("markdown", "csv")
MISSING = "--"

CSV_FIELDS = ("case", "algorithm", "mu", "lambda", "level", "h", "energy_error", "energy_order",
              "l2_error", "l2_order", "energy_error_fmt", "energy_order_fmt", "l2_error_fmt",
              "l2_order_fmt", "solver", "iterations", "residual")


def fmt_error(value: float) -> str:
    return f"{value:.4e}"


def fmt_order(value: float | None) -> str:
    return MISSING if value is None else f"{value:.4f}"


def _num(value) -> str:
    """Shortest round-tripping text; also for numpy scalars, whose repr is not a bare number."""
    return "" if value is None else repr(float(value))


def _as_list(reports) -> list[ConvergenceReport]:
    return [reports] if isinstance(reports, ConvergenceReport) else list(reports)


def to_markdown(reports: ConvergenceReport | Iterable[ConvergenceReport]) -> str:
    blocks = []
    for rep in _as_list(reports):
        header = [rep.level_label, "energy error", "order", "L2 error", "order"]
        body = [[str(r.level), fmt_error(r.energy_error), fmt_order(r.energy_order),
                 fmt_error(r.l2_error), fmt_order(r.l2_order)] for r in rep.rows]
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]

        def line(cells):
            return "| " + " | ".join(c.rjust(w) for c, w in zip(cells, widths)) + " |"

        title = f"**{rep.case}**, {rep.algorithm} algorithm, mu = {rep.mu:g}, lambda = {rep.lam:g}"
        rule = "|" + "|".join("-" * (w + 1) + ":" for w in widths) + "|"
        blocks.append("\n".join([title, "", line(header), rule] + [line(b) for b in body]))
    return "\n\n".join(blocks) + "\n"


def to_csv(reports: ConvergenceReport | Iterable[ConvergenceReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rep in _as_list(reports):
        for r in rep.rows:
            writer.writerow({
                "case": rep.case, "algorithm": rep.algorithm, "mu": _num(rep.mu), "lambda": _num(rep.lam),
                "level": r.level, "h": _num(r.h),
                "energy_error": _num(r.energy_error), "energy_order": _num(r.energy_order),
                "l2_error": _num(r.l2_error), "l2_order": _num(r.l2_order),
                "energy_error_fmt": fmt_error(r.energy_error), "energy_order_fmt": fmt_order(r.energy_order),
                "l2_error_fmt": fmt_error(r.l2_error), "l2_order_fmt": fmt_order(r.l2_order),
                "solver": r.solver, "iterations": r.iterations, "residual": _num(r.residual),
            })
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    """Parse :func:`to_csv` output back into dicts with float error columns."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        for key in ("mu", "lambda", "h", "energy_error", "l2_error", "residual"):
            rec[key] = float(rec[key])
        for key in ("energy_order", "l2_order"):
            rec[key] = float(rec[key]) if rec[key] else None
        rec["level"] = int(rec["level"])
        rows.append(rec)
    return rows


def emit_table(reports, format: str = "markdown", destination=None) -> str:
    """Render ``reports`` and write them to ``destination`` (path or file object).

    Returns the rendered text.  ``destination=None`` only renders.

    Raises
    ------
    ValueError
        Unknown format.
    OSError
        The destination path cannot be written.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown table format {format!r}; expected one of {FORMATS}")
    text = to_markdown(reports) if format == "markdown" else to_csv(reports)
    if destination is None:
        return text
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text)
    return text
