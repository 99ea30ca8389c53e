"""Shared CSV handling for the plot scripts.

The scripts are read-only consumers of the solver's CSV outputs: every
number drawn comes out of a CSV column, never from recomputed geometry.
"""

import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")


class SchemaError(Exception):
    """The CSV does not match the expected column schema."""


@dataclass(frozen=True)
class FigureSpec:
    input_paths: tuple
    kind: str
    output_path: str


def read_csv(path, required_columns):
    """Parse a solver CSV; returns {column: list of floats-or-strings}.

    Comment lines starting with '#' carry the run header and are skipped.
    Raises SchemaError naming the first missing column, or on an empty
    file.
    """
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    rows = [ln for ln in lines if ln and not ln.startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: empty CSV")
    header = rows[0].split(",")
    for col in required_columns:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    data = {col: [] for col in header}
    for ln in rows[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise SchemaError(f"{path}: row with {len(parts)} fields, expected {len(header)}")
        for col, val in zip(header, parts):
            try:
                data[col].append(float(val))
            except ValueError:
                data[col].append(val)
    if not data[header[0]]:
        raise SchemaError(f"{path}: no data rows")
    return data


def run_script(plot_fn, required_columns, argv=None):
    """Standard `<script>.py in.csv out.png` entry point."""
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: <script>.py <in.csv> <out.png>", file=sys.stderr)
        return 2
    in_csv, out_png = argv
    try:
        data = read_csv(in_csv, required_columns)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    plot_fn(data, out_png)
    return 0
