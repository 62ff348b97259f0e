"""CSV ingestion and plain-text report writers."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .core import Dataset, Grid, InvalidArgument


class DataFileError(InvalidArgument):
    """An input file is missing, empty or malformed."""


def load_csv(path, response: str | None = None, standardize: bool = False) -> Dataset:
    """Read a numeric CSV with a header row.

    ``response`` names the response column (default: the last column). With
    ``standardize`` every column, response included, is divided by its
    sample standard deviation.
    """
    path = Path(path)
    if not path.is_file():
        raise DataFileError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataFileError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    dupes = sorted({h for h in header if header.count(h) > 1})
    if dupes:
        raise DataFileError(f"{path}: duplicate column names {dupes}")
    if len(rows) < 2:
        raise DataFileError(f"{path}: header but no data rows")
    values, bad = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            bad.append(f"line {lineno}: expected {len(header)} cells, found {len(row)}")
            continue
        try:
            parsed = [float(cell) for cell in row]
        except ValueError:
            bad.append(f"line {lineno}: non-numeric cell")
            continue
        if not all(math.isfinite(v) for v in parsed):
            bad.append(f"line {lineno}: non-finite value")
            continue
        values.append(parsed)
    if bad:
        raise DataFileError(f"{path}: " + "; ".join(bad))
    data = np.array(values)
    resp = header[-1] if response is None else response
    if resp not in header:
        raise DataFileError(f"{path}: response column {resp!r} not in header")
    j = header.index(resp)
    if standardize:
        sd = data.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise DataFileError(f"{path}: cannot standardize a constant column")
        data = data / sd
    x = np.delete(data, j, axis=1)
    names = tuple(h for i, h in enumerate(header) if i != j)
    return Dataset(x, data[:, j], names)


def fmt(v) -> str:
    """Shortest text that round-trips a float exactly."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, columns: list[str], rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_summary(path, items: dict) -> None:
    """``key = value`` lines, in insertion order."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for key, value in items.items():
            if isinstance(value, (list, tuple, np.ndarray)):
                value = " ".join(fmt(v) for v in value)
            else:
                value = fmt(value)
            fh.write(f"{key} = {value}\n")


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if " = " in line:
            key, value = line.split(" = ", 1)
            out[key] = value
    return out


def curve_table(curves) -> tuple[list[str], list[list[float]]]:
    """Columns ``u, pi_j, [m_j, sigma2_j]`` for every grid point."""
    k = curves.k
    cols = ["u"] + [f"pi_{j + 1}" for j in range(k)]
    blocks = [curves.grid.points[None, :], curves.pi]
    if curves.m is not None:
        cols += [f"m_{j + 1}" for j in range(k)] + [f"sigma2_{j + 1}" for j in range(k)]
        blocks += [curves.m, curves.sigma2]
    return cols, np.vstack(blocks).T.tolist()


def read_curve_table(path) -> tuple[Grid, dict[str, np.ndarray]]:
    """Load a curve table written by :func:`curve_table`; returns the grid and k x N families."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array([[float(c) for c in r] for r in rows[1:]])
    grid = Grid(data[:, 0])
    fams: dict[str, list] = {}
    for i, name in enumerate(header[1:], start=1):
        fam = name.rsplit("_", 1)[0]
        fams.setdefault(fam, []).append(data[:, i])
    return grid, {f: np.array(v) for f, v in fams.items()}
