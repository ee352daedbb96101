"""GraphField serialization: a plain-text node table and a raw float64 dump."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .surface import BaseGrid, GraphField

__all__ = ["read_binary", "read_field", "read_text", "write_binary", "write_text"]

_LE_F8 = np.dtype("<f8")


def write_text(field: GraphField, path) -> None:
    """One row per node: flat index, base coordinates, u (row-major node order)."""
    grid = field.grid
    coords = grid.coords.reshape(grid.n, -1).T
    names = ["theta", "phi"] if grid.is_sphere2 else [f"x{i + 1}" for i in range(grid.n)]
    with open(path, "w") as fh:
        fh.write(f"# grid {grid.base.value} n={grid.n} shape={'x'.join(map(str, grid.shape))}\n")
        fh.write("# node " + " ".join(names) + " u\n")
        for k, (xs, val) in enumerate(zip(coords, field.u.reshape(-1))):
            fh.write(f"{k} " + " ".join(repr(float(x)) for x in xs) + f" {float(val)!r}\n")


def read_text(path, grid: BaseGrid) -> GraphField:
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape != (grid.size, grid.n + 2):
        raise ValueError(f"{path}: expected {grid.size} rows of {grid.n + 2} columns, got {data.shape}")
    if not np.array_equal(data[:, 0], np.arange(grid.size)):
        raise ValueError(f"{path}: node indices out of order")
    return GraphField(data[:, -1].reshape(grid.shape), grid)


def write_binary(field: GraphField, path) -> None:
    """Little-endian float64, row-major, no header."""
    Path(path).write_bytes(np.ascontiguousarray(field.u, dtype=_LE_F8).tobytes(order="C"))


def read_binary(path, grid: BaseGrid) -> GraphField:
    raw = Path(path).read_bytes()
    if len(raw) != 8 * grid.size:
        raise ValueError(f"{path}: {len(raw)} bytes, expected {8 * grid.size} for grid {grid.label}")
    return GraphField(np.frombuffer(raw, dtype=_LE_F8).astype(float).reshape(grid.shape), grid)


def read_field(path, grid: BaseGrid) -> GraphField:
    """Dispatch on the suffix: ``.bin`` is the raw dump, anything else the text table."""
    if str(path).endswith(".bin"):
        return read_binary(path, grid)
    return read_text(path, grid)
