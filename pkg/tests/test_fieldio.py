import numpy as np
import pytest

from plap.fieldio import export_csv, header_line, parse_header, read_field, write_field
from plap.grid import Grid, ScalarField


def test_roundtrip(tmp_path):
    g = Grid(1, 2, ((-8.0, 8.0), (0.0, 1.0), (-0.25, 0.75)), (5, 7, 9))
    rng = np.random.default_rng(11)
    fld = ScalarField(g, rng.standard_normal(g.shape))
    path = tmp_path / "field.fld"
    write_field(path, fld)
    back = read_field(path)
    assert back.grid == g
    assert np.array_equal(back.values, fld.values)


def test_header_format():
    g = Grid(1, 1, ((-8.0, 8.0), (-8.0, 8.0)), (3, 5))
    line = header_line(g)
    assert line.startswith("PLAPFIELD v1; n=2; m=1; sizes=3,5; extents=-8:8,-8:8")
    assert parse_header(line) == g


def test_reject_bad_magic(tmp_path):
    path = tmp_path / "bad.fld"
    path.write_bytes(b"NOTAFIELD v9; n=2\n" + b"\x00" * 16)
    with pytest.raises(ValueError):
        read_field(path)


def test_reject_truncated_payload(tmp_path):
    g = Grid(1, 1, ((0, 1), (0, 1)), (3, 3))
    path = tmp_path / "t.fld"
    write_field(path, ScalarField(g, np.zeros(g.shape)))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError):
        read_field(path)


def test_csv_export(tmp_path):
    g = Grid(1, 1, ((0.0, 1.0), (0.0, 1.0)), (3, 3))
    x, y = g.coordinate_fields()
    path = tmp_path / "f.csv"
    export_csv(path, ScalarField(g, x + 10 * y))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x1,y1,value"
    assert len(lines) == 1 + 9
    first = [float(v) for v in lines[1].split(",")]
    assert first == [0.0, 0.0, 0.0]
    last = [float(v) for v in lines[-1].split(",")]
    assert last == [1.0, 1.0, 11.0]
