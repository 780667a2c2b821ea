"""On-disk artifacts of a run: binary snapshots, CSV tables, manifest, images.

Snapshot layout (documented for external readers): magic bytes "BQP1", then
little-endian u32 n, f64 L, f64 t, followed by n*n f64 sample values per
stored field, fields in the declared order theta, omega, u_x, u_y, X_x, X_y,
levelset (subset and order recorded in the manifest).  Floats in CSV files
are written with repr (shortest round-trip), which makes reruns byte-stable.
"""

import struct
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .fields import Grid, ScalarField

MAGIC = b"BQP1"
_HEADER = struct.Struct("<4sIdd")

# field name -> number of planes
FIELD_PLANES = {"theta": 1, "omega": 1, "u": 2, "x": 2, "levelset": 1}


def write_snapshot(path, state, fields):
    planes = []
    for name in fields:
        if name == "theta":
            planes.append(state.theta.values)
        elif name == "omega":
            planes.append(state.omega.values)
        elif name == "u":
            planes += [state.u.x_comp.values, state.u.y_comp.values]
        elif name == "x":
            if state.X is None:
                raise ConfigError("snapshot requests X but the run carries none")
            planes += [state.X.x_comp.values, state.X.y_comp.values]
        elif name == "levelset":
            if state.levelset is None:
                raise ConfigError("snapshot requests the level set but the run carries none")
            planes.append(state.levelset.f.values)
        else:
            raise ConfigError(f"unknown snapshot field {name!r}")
    g = state.omega.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.n, g.length, state.t))
        for p in planes:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def read_snapshot(path, fields):
    with open(path, "rb") as fh:
        magic, n, length, t = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise ConfigError(f"{path}: not a BQP1 snapshot")
        count = sum(FIELD_PLANES[f] for f in fields)
        raw = np.frombuffer(fh.read(count * n * n * 8), dtype="<f8")
    if raw.size != count * n * n:
        raise ConfigError(f"{path}: truncated snapshot")
    grid = Grid(n, length)
    planes = [ScalarField(grid, raw[i * n * n:(i + 1) * n * n].reshape(n, n).copy())
              for i in range(count)]
    out = {"t": t, "grid": grid}
    i = 0
    for name in fields:
        k = FIELD_PLANES[name]
        out[name] = planes[i] if k == 1 else (planes[i], planes[i + 1])
        i += k
    return out


def fmt(x):
    """Canonical float formatting for CSV cells (shortest round-trip repr)."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


class CsvWriter:
    def __init__(self, path, columns):
        self.path = Path(path)
        self.columns = list(columns)
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self._fh.write(",".join(self.columns) + "\n")

    def row(self, values):
        if len(values) != len(self.columns):
            raise ValueError("row length mismatch")
        self._fh.write(",".join(fmt(v) for v in values) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_manifest(path, cfg, extra=None, fields=None):
    lines = [
        f"config_hash={cfg.hash()}",
        f"version={__version__}",
        f"grid_n={cfg.get('grid', 'n')}",
        f"grid_length={fmt(cfg.get('grid', 'length'))}",
        f"scheme={cfg.get('stepper', 'scheme')}",
        f"record_every={cfg.get('outputs', 'record_every')}",
        f"snapshot_every={cfg.get('outputs', 'snapshot_every')}",
        f"fields={','.join(fields if fields is not None else cfg.field_list())}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path):
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, _, v = line.partition("=")
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# images
# ---------------------------------------------------------------------------

def write_pgm(path, values, overlay_pts=None, grid=None):
    """Binary PGM (P5) with a fixed linear [min, max] -> [0, 255] value map.

    Rows run along decreasing y so the image is upright; the sidecar text
    file records the value map.  overlay_pts (in physical coordinates) are
    rasterized white.
    """
    vmin = float(values.min())
    vmax = float(values.max())
    span = vmax - vmin if vmax > vmin else 1.0
    img = np.round((values - vmin) / span * 255.0).astype(np.uint8)
    img = img.T[::-1, :]  # rows = y descending, cols = x
    if overlay_pts is not None and grid is not None:
        for seg in _raster_polyline(overlay_pts, grid):
            img[seg[:, 0], seg[:, 1]] = 255
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())
    Path(str(path) + ".txt").write_text(
        f"vmin={fmt(vmin)}\nvmax={fmt(vmax)}\nmap=linear [vmin,vmax] -> [0,255]\n",
        encoding="utf-8")


def _raster_polyline(pts, grid):
    n = grid.n
    segs = []
    pix = np.round(np.asarray(pts) / grid.h).astype(int) % n
    for a, b in zip(pix[:-1], pix[1:]):
        steps = int(max(np.abs(b - a).max(), 1))
        line = np.round(np.linspace(a, b, steps + 1)).astype(int) % n
        rows = (n - 1 - line[:, 1]) % n
        cols = line[:, 0]
        segs.append(np.stack([rows, cols], axis=-1))
    return segs
