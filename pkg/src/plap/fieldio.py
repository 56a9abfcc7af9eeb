"""Field dump format (PLAPFIELD v1) and CSV export.

A dump is a single ASCII header line

    PLAPFIELD v1; n=<n>; m=<m>; sizes=<s1,...,sn>; extents=<lo1:hi1,...>

followed by the row-major (C-order, y-axes fastest) field values as IEEE-754
binary64 little-endian.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .grid import Grid, ScalarField

MAGIC = "PLAPFIELD v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def header_line(grid: Grid) -> str:
    sizes = ",".join(str(s) for s in grid.sizes)
    extents = ",".join(f"{_fmt(lo)}:{_fmt(hi)}" for lo, hi in grid.extents)
    return f"{MAGIC}; n={grid.n}; m={grid.m}; sizes={sizes}; extents={extents}\n"


def write_field(path: str | Path, fld: ScalarField) -> None:
    data = fld.values.astype("<f8", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header_line(fld.grid).encode("ascii"))
        fh.write(data)


def parse_header(line: str) -> Grid:
    parts = [p.strip() for p in line.strip().split(";")]
    if not parts or parts[0] != MAGIC:
        raise ValueError(f"not a {MAGIC} dump (header {line!r})")
    kv = {}
    for p in parts[1:]:
        key, _, val = p.partition("=")
        kv[key.strip()] = val.strip()
    n = int(kv["n"])
    m = int(kv["m"])
    sizes = tuple(int(s) for s in kv["sizes"].split(","))
    extents = tuple(tuple(float(v) for v in e.split(":")) for e in kv["extents"].split(","))
    return Grid(m=m, n_minus_m=n - m, extents=extents, sizes=sizes)


def read_field(path: str | Path) -> ScalarField:
    with open(path, "rb") as fh:
        raw = fh.readline()
        grid = parse_header(raw.decode("ascii"))
        data = fh.read()
    expected = grid.num_points * 8
    if len(data) != expected:
        raise ValueError(f"payload has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8").reshape(grid.shape).astype(float)
    return ScalarField(grid, values)


def export_csv(path: str | Path, fld: ScalarField, value_name: str = "value") -> None:
    """Point coordinates plus value, one grid point per row."""
    grid = fld.grid
    coords = grid.coordinate_fields()
    names = [f"x{i + 1}" for i in range(grid.m)] + [f"y{j + 1}" for j in range(grid.n_minus_m)]
    buf = io.StringIO()
    buf.write(",".join(names + [value_name]) + "\n")
    cols = [c.ravel(order="C") for c in coords] + [fld.values.ravel(order="C")]
    for row in zip(*cols):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="ascii")
