import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from driftwave.cochain_io import (
    CochainFormatError,
    read_cochain,
    read_cochain_csv,
    write_cochain,
    write_cochain_csv,
    write_table,
)
from driftwave.exterior_calculus import Cochain, CylinderGrid, hodge_star

GRID = CylinderGrid(3, 2, 4, lz=1.7, axial="truncated")


def finite_cochain(k):
    return arrays(
        np.float64, GRID.n_cells(k), elements=st.floats(allow_nan=False, allow_infinity=False, width=64)
    ).map(lambda v: Cochain(k, GRID, v))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3).flatmap(finite_cochain))
def test_binary_roundtrip_is_exact(tmp_path_factory, c):
    path = tmp_path_factory.mktemp("io") / "c.bin"
    write_cochain(path, c)
    back = read_cochain(path, GRID)
    assert back.degree == c.degree and not back.dual
    assert back.values.tobytes() == c.values.tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3).flatmap(finite_cochain))
def test_csv_roundtrip_is_exact(tmp_path_factory, c):
    path = tmp_path_factory.mktemp("io") / "c.csv"
    write_cochain_csv(path, c)
    back = read_cochain_csv(path, GRID)
    assert back.values.tobytes() == c.values.tobytes()


def test_dual_cochain_roundtrip(tmp_path):
    c = hodge_star(Cochain.random(1, GRID, np.random.default_rng(0)))
    for writer, reader, name in ((write_cochain, read_cochain, "d.bin"), (write_cochain_csv, read_cochain_csv, "d.csv")):
        writer(tmp_path / name, c)
        back = reader(tmp_path / name, GRID)
        assert back.dual and back.degree == 2
        np.testing.assert_array_equal(back.values, c.values)


def test_binary_layout(tmp_path):
    c = Cochain(0, GRID, np.arange(GRID.n_cells(0), dtype=float))
    write_cochain(tmp_path / "c.bin", c)
    raw = (tmp_path / "c.bin").read_bytes()
    assert raw[:8] == b"DWCOCH01"
    assert raw[8] == 0 and raw[9] == 0 and raw[10:16] == bytes(6)
    assert raw[16:32].decode() == GRID.fingerprint
    assert int.from_bytes(raw[32:40], "little") == GRID.n_cells(0)
    assert len(raw) == 40 + 8 * GRID.n_cells(0)
    np.testing.assert_array_equal(np.frombuffer(raw[40:], "<f8"), c.values)


def test_grid_mismatch_rejected(tmp_path):
    c = Cochain.random(1, GRID, np.random.default_rng(1))
    write_cochain(tmp_path / "c.bin", c)
    write_cochain_csv(tmp_path / "c.csv", c)
    other = CylinderGrid(3, 2, 4, lz=1.7, axial="periodic")
    with pytest.raises(CochainFormatError, match="fingerprint"):
        read_cochain(tmp_path / "c.bin", other)
    with pytest.raises(CochainFormatError, match="fingerprint"):
        read_cochain_csv(tmp_path / "c.csv", other)


def test_corrupt_files_rejected(tmp_path):
    c = Cochain.random(2, GRID, np.random.default_rng(2))
    write_cochain(tmp_path / "c.bin", c)
    raw = (tmp_path / "c.bin").read_bytes()
    (tmp_path / "short.bin").write_bytes(raw[:20])
    (tmp_path / "magic.bin").write_bytes(b"XXXXXXXX" + raw[8:])
    (tmp_path / "trunc.bin").write_bytes(raw[:-8])
    for name, msg in (("short.bin", "shorter"), ("magic.bin", "magic"), ("trunc.bin", "payload")):
        with pytest.raises(CochainFormatError, match=msg):
            read_cochain(tmp_path / name, GRID)
    (tmp_path / "bad.csv").write_text("# degree=2\nindex,value\n0,1.0\n")
    with pytest.raises(CochainFormatError, match="header"):
        read_cochain_csv(tmp_path / "bad.csv", GRID)


def test_table_quoting_and_floats(tmp_path):
    write_table(tmp_path / "t.csv", ["name", "value"], [["a, b", 0.1], ["c", 1e-12]])
    assert (tmp_path / "t.csv").read_text() == 'name,value\n"a, b",0.1\nc,1e-12\n'
