"""Plain-text matrix and label files.

Matrices are written as header-less CSV with ``repr`` floats so that a
write/read round trip is bit-exact. Group files carry a ``node,group``
header. Parse failures raise :class:`CsvFormatError` with the 1-based line
and column of the offending cell.
"""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path
from typing import Sequence

import numpy as np

from fair_topo.graph_core import GroupAssignment

GROUPS_HEADER = ("node", "group")


class CsvFormatError(ValueError):
    def __init__(self, path, line: int, column: int, msg: str):
        self.path, self.line, self.column = str(path), line, column
        super().__init__(f"{path}:{line}:{column}: {msg}")


def _rows(path: Path | str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CsvFormatError(path, 1, 1, f"not UTF-8 ({exc.reason})") from None
    return list(csv.reader(io.StringIO(text)))


def read_matrix(path: Path | str) -> np.ndarray:
    """Read a rectangular header-less CSV of reals."""
    rows = [r for r in _rows(path)]
    while rows and not rows[-1]:
        rows.pop()
    if not rows:
        raise CsvFormatError(path, 1, 1, "empty matrix file")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise CsvFormatError(path, i + 1, min(len(row), width) + 1, f"expected {width} columns, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise CsvFormatError(path, i + 1, j + 1, f"not a number: {cell!r}") from None
            if not np.isfinite(out[i, j]):
                raise CsvFormatError(path, i + 1, j + 1, f"non-finite value: {cell!r}")
    return out


def write_matrix(path: Path | str, m: np.ndarray) -> Path:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in m:
        w.writerow([repr(float(v)) for v in row])
    p = Path(path)
    p.write_text(buf.getvalue(), encoding="utf-8")
    return p


def read_groups(path: Path | str, n: int | None = None) -> GroupAssignment:
    """Read ``node,group`` rows; nodes must be exactly ``0..N-1`` in any order."""
    rows = _rows(path)
    if not rows or tuple(c.strip() for c in rows[0]) != GROUPS_HEADER:
        raise CsvFormatError(path, 1, 1, "expected header 'node,group'")
    found: dict[int, int] = {}
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise CsvFormatError(path, i, min(len(row), 2) + 1, f"expected 2 columns, got {len(row)}")
        vals = []
        for j, cell in enumerate(row):
            try:
                vals.append(int(cell))
            except ValueError:
                raise CsvFormatError(path, i, j + 1, f"not an integer: {cell!r}") from None
        node, g = vals
        if node < 0 or node in found:
            raise CsvFormatError(path, i, 1, f"invalid or repeated node id {node}")
        found[node] = g
    count = len(found)
    if sorted(found) != list(range(count)):
        raise CsvFormatError(path, len(rows), 1, "node ids must be 0..N-1")
    if n is not None and count != n:
        raise CsvFormatError(path, len(rows), 1, f"expected {n} nodes, got {count}")
    try:
        return GroupAssignment.from_labels([found[i] for i in range(count)])
    except ValueError as exc:
        raise CsvFormatError(path, 2, 2, str(exc)) from None


def write_groups(path: Path | str, groups: GroupAssignment | Sequence[int]) -> Path:
    labels = groups.labels if isinstance(groups, GroupAssignment) else groups
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GROUPS_HEADER)
    for i, g in enumerate(labels):
        w.writerow((i, int(g)))
    p = Path(path)
    p.write_text(buf.getvalue(), encoding="utf-8")
    return p


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
