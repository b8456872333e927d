"""Import/export of space-time fields.

Text layout (``.txt``)::

    # schauderlab-field v1
    d <d>
    n <n_1> [<n_2>]
    k <k>
    n_t <n_t>
    lower <x_1> [<x_2>]
    upper <x_1> [<x_2>]
    time <t_start> <t_end>
    <k values>            one line per (time level, node), row-major

Binary layout (``.bin``, little endian): magic ``b"SLF1"``, then int64
``d``, ``n[d]``, ``k``, ``n_t``, float64 ``lower[d]``, ``upper[d]``,
``t_start``, ``t_end``, followed by the float64 values in the same
row-major order (time, i_1, ..., i_d, component).
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .fields import SpaceTimeField
from .geometry import Grid

MAGIC = b"SLF1"
HEADER = "# schauderlab-field v1"


def save_field(u: SpaceTimeField, path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or ("bin" if path.suffix == ".bin" else "txt")
    g = u.grid
    if fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            ints = [g.d, *g.n, u.k, g.n_t]
            fh.write(struct.pack(f"<{len(ints)}q", *ints))
            floats = [*g.lower, *g.upper, g.t_start, g.t_end]
            fh.write(struct.pack(f"<{len(floats)}d", *floats))
            fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
        return path
    lines = [
        HEADER,
        f"d {g.d}",
        "n " + " ".join(str(v) for v in g.n),
        f"k {u.k}",
        f"n_t {g.n_t}",
        "lower " + " ".join(repr(v) for v in g.lower),
        "upper " + " ".join(repr(v) for v in g.upper),
        f"time {g.t_start!r} {g.t_end!r}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        np.savetxt(fh, u.values.reshape(-1, u.k), fmt="%.17g")
    return path


def load_field(path) -> SpaceTimeField:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return _load_binary(path)
    return _load_text(path)


def _load_binary(path: Path) -> SpaceTimeField:
    data = path.read_bytes()
    off = 4
    (d,) = struct.unpack_from("<q", data, off)
    off += 8
    ints = struct.unpack_from(f"<{d + 2}q", data, off)
    off += 8 * (d + 2)
    n, k, n_t = ints[:d], ints[d], ints[d + 1]
    floats = struct.unpack_from(f"<{2 * d + 2}d", data, off)
    off += 8 * (2 * d + 2)
    lower, upper, t0, t1 = floats[:d], floats[d:2 * d], floats[2 * d], floats[2 * d + 1]
    vals = np.frombuffer(data, dtype="<f8", offset=off)
    grid = Grid(lower, upper, n, t1, (t1 - t0) / (n_t - 1), t0)
    return SpaceTimeField(grid, vals.reshape(n_t, *n, k))


def _load_text(path: Path) -> SpaceTimeField:
    header = {}
    with open(path) as fh:
        first = fh.readline().strip()
        if first != HEADER:
            raise InvalidArgument(f"{path}: not a field file")
        for _ in range(7):
            key, *rest = fh.readline().split()
            header[key] = rest
        vals = np.loadtxt(fh, ndmin=2)
    d = int(header["d"][0])
    n = tuple(int(v) for v in header["n"])
    k, n_t = int(header["k"][0]), int(header["n_t"][0])
    t0, t1 = (float(v) for v in header["time"])
    if len(n) != d:
        raise InvalidArgument(f"{path}: header dimension mismatch")
    grid = Grid([float(v) for v in header["lower"]], [float(v) for v in header["upper"]], n,
                t1, (t1 - t0) / (n_t - 1), t0)
    return SpaceTimeField(grid, vals.reshape(n_t, *n, k))


def export_slice_csv(u: SpaceTimeField, t_index: int, path) -> Path:
    """Write one time level as CSV rows ``x[, y], u0, u1, ...``."""
    path = Path(path)
    g = u.grid
    coords = g.coords().reshape(-1, g.d)
    vals = u.values[t_index].reshape(-1, u.k)
    names = ["x", "y"][:g.d] + [f"u{c}" for c in range(u.k)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for xrow, vrow in zip(coords, vals):
            writer.writerow([f"{v:.12g}" for v in (*xrow, *vrow)])
    return path
