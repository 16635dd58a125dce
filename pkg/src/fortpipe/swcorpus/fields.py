"""Flat binary field dumps with a one-line text header.

Layout: an ASCII header line
    fortpipe-field 1 <name> <rows> <cols> float32 row-major little-endian\n
followed by rows*cols IEEE binary32 values, row-major, little-endian.
Golden files in the test suite use exactly this format.
"""

from __future__ import annotations

from pathlib import Path
from typing import Tuple

import numpy as np

from ..errors import ShapeMismatch

_MAGIC = "fortpipe-field"
_VERSION = 1


def write_field(path, name: str, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if arr.ndim != 2:
        raise ShapeMismatch(f"field '{name}' must be 2D, got shape {arr.shape}")
    header = f"{_MAGIC} {_VERSION} {name} {arr.shape[0]} {arr.shape[1]} float32 row-major little-endian\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(arr.astype("<f4").tobytes())


def read_field(path) -> Tuple[str, np.ndarray]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        parts = header.split()
        if len(parts) != 8 or parts[0] != _MAGIC or parts[1] != str(_VERSION):
            raise ShapeMismatch(f"'{path}' is not a fortpipe field file")
        name, rows, cols = parts[2], int(parts[3]), int(parts[4])
        raw = fh.read(rows * cols * 4)
        if len(raw) != rows * cols * 4:
            raise ShapeMismatch(f"'{path}' truncated")
        arr = np.frombuffer(raw, dtype="<f4").reshape(rows, cols).copy()
    return name, arr


def dump_state(state, names, outdir) -> list:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names:
        path = outdir / f"{name}.f32"
        write_field(path, name, state[name])
        written.append(path)
    return written
