"""Reading and writing cochains and trajectory tables.

Binary layout (little endian)::

    offset  size  content
    0       8     magic b"DWCOCH01"
    8       1     degree (uint8)
    9       1     dual flag (uint8, 0 or 1)
    10      6     reserved, zero
    16      16    grid fingerprint, ASCII hex
    32      8     number of values n (uint64)
    40      8n    values (float64)

CSV layout: three comment lines ``# degree=<k>``, ``# dual=<0|1>``,
``# grid=<fingerprint>``, a header ``index,value`` and one row per cell.
Values are written with ``repr`` so a round trip is exact.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .exterior_calculus import Cochain, CylinderGrid

MAGIC = b"DWCOCH01"
_HEADER = struct.Struct("<8sBB6x16sQ")


class CochainFormatError(ValueError):
    """Malformed file or header that does not match the target grid."""


def _check_grid(fingerprint: str, grid: CylinderGrid, degree: int, dual: bool, n: int) -> None:
    if fingerprint != grid.fingerprint:
        raise CochainFormatError(
            f"grid fingerprint {fingerprint} does not match target grid {grid.fingerprint}"
        )
    expected = grid.n_cells(3 - degree if dual else degree)
    if n != expected:
        raise CochainFormatError(f"expected {expected} values, found {n}")


def write_cochain(path, cochain: Cochain) -> None:
    """Write ``cochain`` in the binary layout."""
    values = np.ascontiguousarray(cochain.values, dtype="<f8")
    header = _HEADER.pack(
        MAGIC, cochain.degree, int(cochain.dual), cochain.grid.fingerprint.encode("ascii"), values.size
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.tobytes())


def read_cochain(path, grid: CylinderGrid) -> Cochain:
    """Read a binary cochain file and bind it to ``grid``.

    Raises
    ------
    CochainFormatError
        On a bad magic number, truncated payload or grid mismatch.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CochainFormatError("file shorter than the header")
    magic, degree, dual, fp, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CochainFormatError("not a cochain file (bad magic)")
    if dual not in (0, 1) or degree > 3:
        raise CochainFormatError("corrupt header")
    payload = data[_HEADER.size :]
    if len(payload) != 8 * n:
        raise CochainFormatError(f"payload holds {len(payload)} bytes, header announces {8 * n}")
    _check_grid(fp.decode("ascii"), grid, degree, bool(dual), n)
    values = np.frombuffer(payload, dtype="<f8").astype(float)
    return Cochain(degree, grid, values, dual=bool(dual))


def write_cochain_csv(path, cochain: Cochain) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# degree={cochain.degree}\n# dual={int(cochain.dual)}\n# grid={cochain.grid.fingerprint}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(cochain.values):
            w.writerow([i, repr(float(v))])


def read_cochain_csv(path, grid: CylinderGrid) -> Cochain:
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
        else:
            body.append(line)
    try:
        degree, dual, fp = int(meta["degree"]), bool(int(meta["dual"])), meta["grid"]
    except (KeyError, ValueError) as exc:
        raise CochainFormatError(f"missing or malformed header field: {exc}") from None
    reader = csv.reader(io.StringIO("\n".join(body)))
    if next(reader, None) != ["index", "value"]:
        raise CochainFormatError("expected header row 'index,value'")
    for i, row in enumerate(reader):
        if len(row) != 2 or int(row[0]) != i:
            raise CochainFormatError(f"bad row {i + 1}: {row}")
        rows.append(float(row[1]))
    _check_grid(fp, grid, degree, dual, len(rows))
    return Cochain(degree, grid, np.asarray(rows), dual=dual)


def format_float(x: float) -> str:
    """Shortest round-trip representation; identical on every platform."""
    return repr(float(x))


def write_table(path, header: Sequence[str], rows) -> None:
    """RFC-4180 style CSV with deterministic float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, float) else v for v in row])
