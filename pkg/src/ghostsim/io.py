"""CSV and PGM serialisation.

CSV files start with ``# key=value`` metadata rows.  Numbers are written with
``repr``, the shortest text that parses back to the same double, so a CSV
round trip is bit-exact.  Real maps and matrices are written wide (one grid
row per line); complex fields use a long ``index..., re, im`` layout.

PGM files are 16-bit binary (P5, big-endian) with a linear scale; the
``vmin``/``vmax`` that map to 0 and 65535 go into a ``.scale.txt`` sidecar.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, GridMismatchError
from .field import ComplexField, Grid, IntensityMap

__all__ = [
    "write_intensity_csv",
    "read_intensity_csv",
    "write_field_csv",
    "read_field_csv",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_table_csv",
    "read_table_csv",
    "write_pgm",
    "read_pgm",
    "load_map_csv",
]

PGM_MAX = 65535


def _fmt(v) -> str:
    return repr(float(v))


def _write_meta(fh, meta: Mapping):
    for k, v in meta.items():
        if isinstance(v, float):
            v = _fmt(v)
        fh.write(f"# {k}={v}\n")


def _read(path):
    meta, rows = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.rstrip("\r\n")
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            elif line:
                rows.append(line.split(","))
    return meta, rows


def _grid_meta(grid: Grid):
    return {"dims": grid.dims, "n": grid.n, "dx": grid.dx}


def _grid_from(meta) -> Grid:
    try:
        return Grid(int(meta["n"]), float(meta["dx"]), int(meta.get("dims", 1)))
    except KeyError as e:
        raise ConfigError(f"CSV header lacks grid metadata {e}") from None


def _write_wide(path, a2d, meta):
    with open(path, "w", newline="") as fh:
        _write_meta(fh, meta)
        for row in np.atleast_2d(a2d):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_intensity_csv(path, m: IntensityMap, **meta) -> Path:
    """Intensity map: one line per grid row (a single line in 1D)."""
    _write_wide(path, m.values, {"kind": "intensity", **_grid_meta(m.grid), **meta})
    return Path(path)


def read_intensity_csv(path) -> IntensityMap:
    meta, rows = _read(path)
    grid = _grid_from(meta)
    v = np.array([[float(x) for x in r] for r in rows])
    return IntensityMap(grid, v.reshape(grid.shape))


def write_field_csv(path, f: ComplexField, **meta) -> Path:
    """Complex field in long format: ``i,re,im`` (1D) or ``iy,ix,re,im`` (2D)."""
    grid = f.grid
    with open(path, "w", newline="") as fh:
        _write_meta(fh, {"kind": "field", **_grid_meta(grid), "wavelength": f.wavelength, **meta})
        for idx in np.ndindex(*grid.shape):
            v = f.samples[idx]
            fh.write(",".join([*(str(i) for i in idx), _fmt(v.real), _fmt(v.imag)]) + "\n")
    return Path(path)


def read_field_csv(path) -> ComplexField:
    meta, rows = _read(path)
    grid = _grid_from(meta)
    s = np.zeros(grid.shape, dtype=np.complex128)
    d = grid.dims
    for r in rows:
        idx = tuple(int(i) for i in r[:d])
        s[idx] = complex(float(r[d]), float(r[d + 1]))
    return ComplexField(grid, s, float(meta["wavelength"]))


def write_matrix_csv(path, G, **meta) -> Path:
    """Real matrix, one line per row (first index)."""
    G = np.asarray(G, dtype=float)
    _write_wide(path, G, {"kind": "matrix", "rows": G.shape[0], "cols": G.shape[-1], **meta})
    return Path(path)


def read_matrix_csv(path) -> tuple[np.ndarray, dict]:
    meta, rows = _read(path)
    return np.array([[float(x) for x in r] for r in rows]), meta


def write_table_csv(path, columns: Mapping[str, Sequence], **meta) -> Path:
    """Named columns of equal length.  Floats round-trip; other values are ``str``."""
    names = list(columns)
    cols = [list(columns[k]) for k in names]
    if len({len(c) for c in cols}) > 1:
        raise ValueError("table columns differ in length")
    with open(path, "w", newline="") as fh:
        _write_meta(fh, meta)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return Path(path)


def read_table_csv(path) -> tuple[dict, dict]:
    """Returns ``(columns, meta)``; numeric columns come back as float arrays."""
    meta = {}
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            else:
                lines.append(line)
    rows = list(csv.reader(lines))
    names, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(names):
        vals = [r[j] for r in body]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = vals
    return cols, meta


def write_pgm(path, values, vmin: float | None = None, vmax: float | None = None) -> Path:
    """16-bit greyscale image with a linear scale recorded in ``<path>.scale.txt``.

    1D data become a one-row image.
    """
    a = np.atleast_2d(np.asarray(values, dtype=float))
    if a.ndim != 2:
        raise ValueError("PGM export needs 1D or 2D data")
    lo = float(np.min(a)) if vmin is None else float(vmin)
    hi = float(np.max(a)) if vmax is None else float(vmax)
    span = hi - lo if hi > lo else 1.0
    q = np.rint(np.clip((a - lo) / span, 0.0, 1.0) * PGM_MAX).astype(">u2")
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{PGM_MAX}\n".encode("ascii"))
        fh.write(q.tobytes())
    with open(str(path) + ".scale.txt", "w") as fh:
        fh.write(f"vmin={_fmt(lo)}\nvmax={_fmt(hi)}\nlevels={PGM_MAX}\n")
    return Path(path)


def read_pgm(path) -> tuple[np.ndarray, float, float]:
    """Returns ``(values, vmin, vmax)`` with values rescaled to physical units."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    q = np.frombuffer(data, dtype=">u2" if maxval > 255 else "u1", count=w * h, offset=pos).reshape(h, w)
    scale = {}
    sidecar = str(path) + ".scale.txt"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            for line in fh:
                k, _, v = line.strip().partition("=")
                scale[k] = float(v)
    lo, hi = scale.get("vmin", 0.0), scale.get("vmax", float(maxval))
    span = hi - lo if hi > lo else 1.0
    return lo + q.astype(float) / maxval * span, lo, hi


def load_map_csv(path, grid: Grid) -> np.ndarray:
    """Real map for custom objects: a wide CSV (``#`` lines ignored).

    A single row on a 2D grid is extruded along y by the object factory.
    """
    _, rows = _read(path)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    a = np.array([[float(x) for x in r] for r in rows])
    if a.shape[0] == 1:
        a = a[0]
    if a.shape not in (grid.shape, (grid.n,)):
        raise GridMismatchError(f"{path}: map shape {a.shape} does not fit grid {grid.shape}")
    return a
