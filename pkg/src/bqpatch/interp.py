"""Periodic bicubic interpolation of gridded fields at scattered points.

Cubic B-spline interpolation with a periodic prefilter: exact at the nodes
and on cubic polynomials, O(h^4) on smooth fields.  Prefiltered coefficient
arrays are cached on the immutable ScalarField objects, so repeated sampling
of one field (Runge-Kutta stages, marker clouds, departure feet) filters
once.  The monotone variant clamps the result to the bilinear corner
envelope of the containing cell, which keeps transported indicator data
inside [min, max] pointwise at the cost of formal order near extrema.
"""

import numpy as np
from scipy import ndimage

_COEFF_CACHE_ATTR = "_cubic_coeffs"


def spline_coeffs(values):
    """Periodic cubic-spline coefficient array for a sample array."""
    return ndimage.spline_filter(values, order=3, mode="grid-wrap",
                                 output=np.float64)


def _field_coeffs(f):
    if f._spline is None:
        coeffs = spline_coeffs(f.values)
        coeffs.flags.writeable = False
        f._spline = coeffs
    return f._spline


def _sample_coeffs(coeffs, grid, px, py):
    px = np.asarray(px, dtype=np.float64)
    coords = np.stack([np.ravel(px) / grid.h, np.ravel(py) / grid.h])
    out = ndimage.map_coordinates(coeffs, coords, order=3, mode="grid-wrap",
                                  prefilter=False)
    return out.reshape(px.shape)


def cell_envelope(values, grid, px, py):
    """Bilinear corner bounds (lo, hi) of the cells containing the points."""
    n = grid.n
    ix = np.floor(np.asarray(px) / grid.h).astype(np.int64) % n
    iy = np.floor(np.asarray(py) / grid.h).astype(np.int64) % n
    jx = (ix + 1) % n
    jy = (iy + 1) % n
    c00 = values[ix, iy]
    c10 = values[jx, iy]
    c01 = values[ix, jy]
    c11 = values[jx, jy]
    lo = np.minimum(np.minimum(c00, c10), np.minimum(c01, c11))
    hi = np.maximum(np.maximum(c00, c10), np.maximum(c01, c11))
    return lo, hi


def _clamp_to_cell(values, grid, px, py, out):
    lo, hi = cell_envelope(values, grid, px, py)
    return np.clip(out, lo, hi)


def restore_clamped_mass(clamped, raw, lo, hi, passes=3):
    """Return the mass the clamp removed, without violating the envelope.

    Distributes the defect sum(raw) - sum(clamped) over clamp-active entries
    proportionally to the clamp magnitude, capped by the local headroom;
    a couple of passes absorb it to roundoff for transported indicator data.
    """
    out = clamped.copy()
    weight = np.abs(raw - clamped)
    defect = float(raw.sum() - out.sum())
    scale = max(np.abs(raw).max(), 1e-300)
    for _ in range(passes):
        if abs(defect) <= 1e-14 * scale:
            break
        cap = (hi - out) if defect > 0 else (out - lo)
        active = (weight > 0) & (cap > 0)
        if not active.any():
            break
        w = np.where(active, weight, 0.0)
        share = np.minimum(cap, abs(defect) * w / w.sum())
        share = np.where(active, share, 0.0)
        out = out + np.sign(defect) * share
        defect -= np.sign(defect) * float(share.sum())
    return out


def sample_periodic(values, grid, px, py, monotone=False):
    """Interpolate a raw sample array (indexed [ix, iy]) at points (px, py).

    Prefilters on every call; prefer sample_field for repeated sampling.
    """
    out = _sample_coeffs(spline_coeffs(values), grid, px, py)
    if monotone:
        out = _clamp_to_cell(values, grid, px, py, out)
    return out


def sample_field(f, px, py, monotone=False):
    """Interpolate a ScalarField; spline coefficients are cached on f."""
    out = _sample_coeffs(_field_coeffs(f), f.grid, px, py)
    if monotone:
        out = _clamp_to_cell(f.values, f.grid, px, py, out)
    return out


def sample_vector(v, px, py):
    """Interpolate both components at points; returns (..., 2) array."""
    vx = sample_field(v.x_comp, px, py)
    vy = sample_field(v.y_comp, px, py)
    return np.stack([vx, vy], axis=-1)
