"""Deterministic delimited output.

All numeric columns are written with 17 significant digits so byte-level
diffs of regression runs are meaningful; writes are atomic (temp file plus
rename) so partially written outputs never appear under a final name.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

FLOAT_FORMAT = ".17g"


def format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    if hasattr(value, "item"):  # numpy scalar
        return format_value(value.item())
    return str(value)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
    return path


def write_csv(path, header, rows) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_plot_data(path, header, rows) -> Path:
    """Gnuplot-friendly whitespace-delimited variant with a comment header."""
    lines = ["# " + " ".join(header)]
    for row in rows:
        lines.append(" ".join(format_value(v) for v in row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path, payload) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def csv_to_plot_data(src, dst) -> Path:
    """Mechanical conversion of an existing CSV to the whitespace variant."""
    header, rows = read_csv(src)
    lines = ["# " + " ".join(header)]
    lines.extend(" ".join(row) for row in rows)
    return atomic_write_text(dst, "\n".join(lines) + "\n")
