"""On-disk formats: raw cubes with JSON sidecars, CSV map grids."""

from __future__ import annotations

import csv
import io as _io
import json
import os

import numpy as np

from .hyperspectral import HyperCube, NonlinearityMap

CUBE_DTYPE = "f64le"
CUBE_LAYOUT = "pixel-major"


class FormatError(ValueError):
    """Malformed file; ``field`` names the offending entry."""

    def __init__(self, field, msg):
        super().__init__(f"{field}: {msg}")
        self.field = field


def sidecar_path(path):
    return str(path) + ".json"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise FormatError(os.path.basename(str(path)), f"invalid JSON ({exc.msg})") from exc


def write_cube(path, cube, extra=None):
    """Raw little-endian float64, pixel-major, plus ``<path>.json``."""
    np.ascontiguousarray(cube.pixels, dtype="<f8").tofile(path)
    meta = {"width": cube.width, "height": cube.height, "bands": cube.bands,
            "dtype": CUBE_DTYPE, "layout": CUBE_LAYOUT}
    if extra:
        meta.update(extra)
    write_json(sidecar_path(path), meta)


def _int_field(meta, name):
    if name not in meta:
        raise FormatError(name, "missing from sidecar")
    v = meta[name]
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise FormatError(name, f"must be a positive integer, got {v!r}")
    return v


def read_cube(path):
    side = sidecar_path(path)
    if not os.path.exists(side):
        raise FileNotFoundError(f"missing sidecar {side}")
    meta = read_json(side)
    if not isinstance(meta, dict):
        raise FormatError("sidecar", "must be a JSON object")
    width, height, bands = (_int_field(meta, k) for k in ("width", "height", "bands"))
    if meta.get("dtype") != CUBE_DTYPE:
        raise FormatError("dtype", f"expected {CUBE_DTYPE!r}, got {meta.get('dtype')!r}")
    if meta.get("layout") != CUBE_LAYOUT:
        raise FormatError("layout", f"expected {CUBE_LAYOUT!r}, got {meta.get('layout')!r}")
    raw = np.fromfile(path, dtype="<f8")
    expected = width * height * bands
    if raw.size != expected or os.path.getsize(path) != 8 * expected:
        raise FormatError("bands", f"data holds {os.path.getsize(path)} bytes, sidecar implies "
                                   f"{8 * expected} (width*height*bands*8)")
    pixels = raw.reshape(width * height, bands).astype(float)
    if not np.all(np.isfinite(pixels)):
        raise FormatError("data", "cube contains non-finite values")
    return HyperCube(pixels, width, height), meta


def grid_csv_string(values):
    values = np.asarray(values, dtype=float)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"c{j}" for j in range(values.shape[1])])
    for row in values:
        w.writerow([repr(round(float(v), 12)) for v in row])
    return buf.getvalue()


def read_grid_csv(path):
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise FormatError("header", "empty grid file")
    try:
        return np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise FormatError("values", str(exc)) from exc


def write_map(path, nmap, extra=None):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(grid_csv_string(nmap.values))
    h, w = nmap.values.shape
    meta = {"width": w, "height": h, "eta": nmap.eta, "k": nmap.k, "p": nmap.p,
            "sigma2_n": nmap.sigma2_n, "layout": "row-major grid"}
    if extra:
        meta.update(extra)
    write_json(sidecar_path(path), meta)


def read_map(path):
    meta = read_json(sidecar_path(path))
    values = read_grid_csv(path)
    if values.shape != (meta.get("height"), meta.get("width")):
        raise FormatError("width", f"grid shape {values.shape} disagrees with sidecar")
    return NonlinearityMap(values, meta["eta"], meta["k"], meta["p"], meta["sigma2_n"])
