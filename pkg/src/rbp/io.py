"""CSV and edge-list readers/writers, and SVG rendering of 2-D partitions.

CSV dialect: comma separated, '.' decimal point, UTF-8, mandatory header.
Lines starting with '#' are comments (written files carry their config there).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .partition import Partition


class ParseError(ValueError):
    pass


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, next(csv.reader([line]))


def _number(cell: str, lineno: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"line {lineno}: non-numeric cell {cell!r}") from None


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body of a CSV file."""
    rows = _rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise ParseError(f"{path}: empty file, header required") from None
    body = []
    for lineno, cells in rows:
        if len(cells) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} cells, got {len(cells)}")
        body.append([_number(c, lineno) for c in cells])
    return header, np.array(body, dtype=float).reshape(len(body), len(header))


def read_regression_csv(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Feature columns then one label column; at least one row."""
    header, body = read_table(path)
    if len(header) < 2:
        raise ParseError(f"{path}: need at least one feature column and a label column")
    if len(body) == 0:
        raise ParseError(f"{path}: no data rows")
    return header, body[:, :-1], body[:, -1]


def read_edges(path, n_nodes: int | None = None) -> tuple[int, np.ndarray]:
    """Parse ``i,j,v`` lines (optional header) into an ``(n, n)`` 0/1 matrix.

    Pairs absent from the file are 0. Without ``n_nodes`` the node count is
    one more than the largest index.
    """
    triples = []
    for lineno, cells in _rows(path):
        if len(cells) != 3:
            raise ParseError(f"line {lineno}: expected 'i,j,v', got {len(cells)} cells")
        if not triples and not cells[0].strip().lstrip("-").isdigit():
            continue  # header
        try:
            i, j, v = (int(c) for c in cells)
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer cell in {cells}") from None
        if v not in (0, 1):
            raise ParseError(f"line {lineno}: value must be 0 or 1, got {v}")
        if i < 0 or j < 0 or (n_nodes is not None and (i >= n_nodes or j >= n_nodes)):
            raise ParseError(f"line {lineno}: node index out of range")
        triples.append((i, j, v))
    if n_nodes is None:
        n_nodes = 1 + max((max(i, j) for i, j, _ in triples), default=-1)
    if n_nodes < 1:
        raise ParseError(f"{path}: no edges and no node count")
    A = np.zeros((n_nodes, n_nodes), dtype=int)
    for i, j, v in triples:
        A[i, j] = v
    return n_nodes, A


def write_csv(path, header, rows, config: dict | None = None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if config is not None:
            fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def partition_svg(partition: Partition, scale: float = 100.0) -> str:
    """Boxes as stroked rectangles; fill opacity 0.2 scaled by cost / max cost."""
    if partition.domain.dim != 2:
        raise ValueError("SVG export needs a 2-D domain")
    W, H = (L * scale for L in partition.domain.lengths)
    top = max(partition.costs, default=1.0) or 1.0
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W!r} {H!r}">',
             f'<rect x="0" y="0" width="{W!r}" height="{H!r}" fill="none" stroke="black" stroke-width="1"/>']
    for k, (b, c) in enumerate(zip(partition.boxes, partition.costs)):
        x, y = b.starts[0] * scale, b.starts[1] * scale
        w = (partition.ends[k, 0] - b.starts[0]) * scale
        h = (partition.ends[k, 1] - b.starts[1]) * scale
        opacity = 0.2 * c / top
        parts.append(f'<rect x="{x!r}" y="{y!r}" width="{w!r}" height="{h!r}" '
                     f'fill="steelblue" fill-opacity="{opacity!r}" stroke="black" stroke-width="0.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
