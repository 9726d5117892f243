"""Binary and CSV artifacts.

RDSG (sinogram), little-endian::

    b"RDSG" | u32 version=1 | u32 n | u32 p | u32 frame_count
    | per sigma axis: f64 lo, f64 hi, u32 count
    | frame tau matrices, f64 row-major, frame after frame
    | values, f64, frame-major (C order)

RDGR (reconstruction grid)::

    b"RDGR" | u32 version=1 | u32 n | per axis: f64 lo, f64 hi, u32 count
    | values, f64, C order over the axes
"""
from __future__ import annotations

import csv
import struct

import numpy as np

from .errors import FormatError
from .geometry import Dimensions, FrameSet, PlaneChart

SINOGRAM_MAGIC = b"RDSG"
GRID_MAGIC = b"RDGR"
VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def _read_exact(fh, size: int) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise FormatError("unexpected end of file")
    return data


def sinogram_to_bytes(s) -> bytes:
    dims = s.dims
    parts = [SINOGRAM_MAGIC, struct.pack("<4I", VERSION, dims.n, dims.p, len(s.frames))]
    for lo, hi, count in s.sigma_grid.axes:
        parts.append(struct.pack("<ddI", lo, hi, count))
    parts.append(np.ascontiguousarray(s.frames.taus(), dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(s.values, dtype="<f8").tobytes())
    return b"".join(parts)


def write_sinogram(s, path) -> None:
    with open(path, "wb") as fh:
        fh.write(sinogram_to_bytes(s))


def read_sinogram(path):
    from .transform import Sinogram, SigmaGrid

    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != SINOGRAM_MAGIC:
            raise FormatError(f"{path}: not an RDSG file")
        version, n, p, count = struct.unpack("<4I", _read_exact(fh, 16))
        if version != VERSION:
            raise FormatError(f"{path}: unsupported RDSG version {version}")
        dims = Dimensions(n, p)
        axes = [struct.unpack("<ddI", _read_exact(fh, 20)) for _ in range(dims.codim)]
        grid = SigmaGrid(tuple(axes))
        ntau = count * dims.codim * n
        taus = np.frombuffer(_read_exact(fh, 8 * ntau), dtype="<f8").reshape(count, dims.codim, n)
        nval = count * int(np.prod(grid.shape))
        values = np.frombuffer(_read_exact(fh, 8 * nval), dtype="<f8")
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes")
    frames = FrameSet(dims, [PlaneChart(np.zeros(dims.codim), t) for t in taus], None)
    return Sinogram(dims, frames, grid, values.reshape((count,) + grid.shape).astype(float))


def write_sinogram_csv(s, path) -> None:
    """One row per (frame, sigma cell): ``frame_id, sigma_1.., value``."""
    cells = s.sigma_grid.cells()
    flat = s.values.reshape(len(s.frames), -1)
    k = s.dims.codim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_id"] + [f"sigma_{i + 1}" for i in range(k)] + ["value"])
        for f in range(flat.shape[0]):
            for c in range(flat.shape[1]):
                w.writerow([f] + [_fmt(x) for x in cells[c]] + [_fmt(flat[f, c])])


def grid_to_bytes(g) -> bytes:
    parts = [GRID_MAGIC, struct.pack("<2I", VERSION, len(g.axes))]
    for lo, hi, count in g.axes:
        parts.append(struct.pack("<ddI", lo, hi, count))
    parts.append(np.ascontiguousarray(g.values, dtype="<f8").tobytes())
    return b"".join(parts)


def write_grid(g, path) -> None:
    with open(path, "wb") as fh:
        fh.write(grid_to_bytes(g))


def read_grid(path):
    from .inversion import ReconGrid

    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != GRID_MAGIC:
            raise FormatError(f"{path}: not an RDGR file")
        version, n = struct.unpack("<2I", _read_exact(fh, 8))
        if version != VERSION:
            raise FormatError(f"{path}: unsupported RDGR version {version}")
        axes = tuple(struct.unpack("<ddI", _read_exact(fh, 20)) for _ in range(n))
        shape = tuple(c for _, _, c in axes)
        values = np.frombuffer(_read_exact(fh, 8 * int(np.prod(shape))), dtype="<f8")
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes")
    return ReconGrid(axes, values.reshape(shape).astype(float))


def write_grid_csv(g, path) -> None:
    """``x, y, value`` triples; two-dimensional grids only."""
    if len(g.axes) != 2:
        raise ValueError("CSV export is only defined for 2-D grids")
    xs, ys = g.points(0), g.points(1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                w.writerow([_fmt(x), _fmt(y), _fmt(g.values[i, j])])
