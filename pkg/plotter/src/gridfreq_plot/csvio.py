"""Strict readers for the simulator's CSV formats.

Malformed input is rejected with the offending file, row, and column named,
and nothing is rendered from it.
"""

from __future__ import annotations

import csv
from pathlib import Path


class CsvFormatError(ValueError):
    pass


def read_columns(path, required):
    """Read a CSV into {column: list[float]}, insisting on ``required``.

    Every cell of a required column must parse as a float; other columns are
    read as floats where possible and left out otherwise.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise CsvFormatError(
                f"{path}: missing column '{missing[0]}' "
                f"(columns present: {', '.join(header)})")
        idx = {name: i for i, name in enumerate(header)}
        cols = {name: [] for name in header}
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path} row {rownum}: expected {len(header)} cells, "
                    f"got {len(row)}")
            for name in header:
                cell = row[idx[name]]
                try:
                    cols[name].append(float(cell) if cell != "" else float("nan"))
                except ValueError:
                    if name in required:
                        raise CsvFormatError(
                            f"{path} row {rownum} column '{name}': "
                            f"not a number: {cell!r}") from None
                    cols[name].append(float("nan"))
    if not cols[required[0]]:
        raise CsvFormatError(f"{path}: no data rows")
    return cols
