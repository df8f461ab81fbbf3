"""Binary snapshot format for spectral fields.

Layout (all integers little-endian):

    magic   4 bytes  b"SVF1"
    version uint32   format version (currently 1)
    n       uint32   truncation order
    points  uint32   default physical resolution of the grid
    nameln  uint32   byte length of the UTF-8 field name
    name    nameln bytes
    time    float64  simulation time stamp
    data    3 * (2n+1)^3 * 2 float64: (re, im) pairs, component-major,
            each component cube in C order over the wrapped axes
            (index order 0, 1, ..., n, -n, ..., -1 per axis)

Round trips are bit-exact: the payload is the raw IEEE-754 content of the
coefficient array.
"""

from __future__ import annotations

import struct

import numpy as np

from . import spectral as sp

MAGIC = b"SVF1"
VERSION = 1
_HEAD = struct.Struct("<III")


def save_field(path, field: sp.SpectralVectorField, name: str = "u", time: float = 0.0) -> None:
    grid = field.grid
    name_bytes = name.encode("utf-8")
    flat = np.ascontiguousarray(field.coeffs).view(np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEAD.pack(VERSION, grid.n, grid.physical_points))
        fh.write(struct.pack("<I", len(name_bytes)))
        fh.write(name_bytes)
        fh.write(struct.pack("<d", float(time)))
        fh.write(flat.astype("<f8", copy=False).tobytes())


def load_field(path) -> tuple[sp.SpectralVectorField, str, float]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a spectral field file (magic {magic!r})")
        version, n, points = _HEAD.unpack(fh.read(_HEAD.size))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        (name_len,) = struct.unpack("<I", fh.read(4))
        name = fh.read(name_len).decode("utf-8")
        (time,) = struct.unpack("<d", fh.read(8))
        m = 2 * n + 1
        count = 3 * m * m * m * 2
        payload = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
    coeffs = payload.astype(np.float64).view(np.complex128).reshape(3, m, m, m)
    grid = sp.get_grid(n, points)
    return sp.SpectralVectorField(grid, coeffs.copy()), name, time
