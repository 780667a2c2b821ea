"""Marker tracking, flow-map Jacobians, level-set transport, and the two
equivalent evolutions of a transported vector field.

Markers sit on a uniform parameter grid of the circle; tangents are spectral
derivatives along the closed marker curve.  Per-marker 2x2 Jacobians follow
the variational equation dV/dt = grad_u(psi) V along trajectories.
"""

import logging

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial.distance import directed_hausdorff

from .errors import ArgumentError, DegenerateTangentError, DomainEscapeError, FieldDataError
from .fields import ScalarField, VectorField2
from .interp import (cell_envelope, restore_clamped_mass, sample_field,
                     sample_periodic, sample_vector)
from .spectral import advection_term, dealiased_product, gradient
from .velocity import GriddedVelocity

log = logging.getLogger(__name__)


def _curve_derivative(pts):
    """Spectral d/dsigma of a closed curve sampled at uniform sigma."""
    m = pts.shape[0]
    k = np.fft.fftfreq(m, d=1.0 / m) * 1j  # d/dsigma with sigma in [0, 2*pi)
    out = np.empty_like(pts)
    for c in range(2):
        out[:, c] = np.fft.ifft(k * np.fft.fft(pts[:, c])).real
    return out


def _polygon_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


class PatchState:
    """Ordered boundary markers with tangent and Jacobian data.

    markers : (m, 2) positions; closed polygon in order.
    jacobians : (m, 2, 2) flow-map derivative along each trajectory.
    x0_samples : (m, 2) initial tangential field at the seed points, kept for
        the Lagrangian representation Dpsi * X0.
    """

    def __init__(self, markers, jacobians=None, x0_samples=None):
        markers = np.asarray(markers, dtype=float)
        if markers.ndim != 2 or markers.shape[1] != 2 or markers.shape[0] < 8:
            raise ArgumentError("markers must be an (m, 2) array with m >= 8")
        self.markers = markers
        m = markers.shape[0]
        self.sigma = 2.0 * np.pi * np.arange(m) / m
        self.jacobians = (np.broadcast_to(np.eye(2), (m, 2, 2)).copy()
                          if jacobians is None else np.asarray(jacobians, dtype=float))
        self.x0_samples = x0_samples
        self.events = []

    @property
    def m(self):
        return self.markers.shape[0]

    def tangents(self):
        return _curve_derivative(self.markers)

    def area(self):
        return _polygon_area(self.markers)

    def det_jacobians(self):
        j = self.jacobians
        return j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 1, 0]

    def spacing_ratio(self):
        d = np.linalg.norm(np.roll(self.markers, -1, axis=0) - self.markers, axis=1)
        return float(d.max() / d.min())

    def copy(self):
        p = PatchState(self.markers.copy(), self.jacobians.copy(),
                       None if self.x0_samples is None else self.x0_samples.copy())
        p.events = list(self.events)
        return p


class LevelSet:
    """Transported scalar whose zero contour tracks the patch boundary."""

    def __init__(self, f, band_cells=8):
        self.f = f
        self.band_cells = band_cells

    def band_mask(self):
        grad_max = gradient(self.f).max_norm()
        width = self.band_cells * self.f.grid.h * max(grad_max, 1e-30)
        return np.abs(self.f.values) <= width

    def zero_contour(self):
        return marching_squares(self.f, level=0.0, mask=self.band_mask())


# ---------------------------------------------------------------------------
# marker advection
# ---------------------------------------------------------------------------

def _safe_region_check(markers, grid, margin_cells=4):
    margin = margin_cells * grid.h
    lo, hi = margin, grid.length - margin
    if (markers < lo).any() or (markers > hi).any():
        raise DomainEscapeError(
            "marker left the central safe region; periodic wrap-around would "
            "corrupt the patch geometry")


def advect_markers(patch, velocity, t, dt, order=3, grid=None,
                   redistribution_ratio=3.0):
    """Advance markers and Jacobians one step of size dt from time t.

    velocity must implement at_points / grad_at_points.  order selects RK2
    (midpoint) or RK3 (Kutta).  Markers are redistributed by arc length when
    adjacent spacing degrades beyond ``redistribution_ratio``.
    """
    x = patch.markers
    v = patch.jacobians

    def f(pts, tau):
        return velocity.at_points(pts, tau)

    def g(pts, tau, mat):
        return np.einsum("mij,mjk->mik", velocity.grad_at_points(pts, tau), mat)

    if order == 2:
        k1 = f(x, t)
        j1 = g(x, t, v)
        xm = x + 0.5 * dt * k1
        k2 = f(xm, t + 0.5 * dt)
        j2 = g(xm, t + 0.5 * dt, v + 0.5 * dt * j1)
        x_new = x + dt * k2
        v_new = v + dt * j2
    elif order == 3:
        k1 = f(x, t)
        j1 = g(x, t, v)
        x2 = x + 0.5 * dt * k1
        k2 = f(x2, t + 0.5 * dt)
        j2 = g(x2, t + 0.5 * dt, v + 0.5 * dt * j1)
        x3 = x - dt * k1 + 2.0 * dt * k2
        k3 = f(x3, t + dt)
        j3 = g(x3, t + dt, v - dt * j1 + 2.0 * dt * j2)
        x_new = x + dt * (k1 + 4.0 * k2 + k3) / 6.0
        v_new = v + dt * (j1 + 4.0 * j2 + j3) / 6.0
    else:
        raise ArgumentError("marker scheme order must be 2 or 3")

    if not np.isfinite(x_new).all():
        raise FieldDataError("marker positions became non-finite")
    out = PatchState(x_new, v_new, patch.x0_samples)
    out.events = list(patch.events)
    if grid is not None:
        _safe_region_check(x_new, grid)
    if out.spacing_ratio() > redistribution_ratio:
        out = redistribute_markers(out, t + dt)
    return out


def redistribute_markers(patch, t):
    """Resample markers at equal arc length with a periodic cubic spline.

    Jacobian entries and stored initial-field samples are spline-interpolated
    to the new parameter positions; the event is logged on the state.
    """
    pts = patch.markers
    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    targets = total * np.arange(patch.m) / patch.m

    def spline_resample(data):
        data_closed = np.vstack([data, data[:1]])
        cs = CubicSpline(arc, data_closed, bc_type="periodic", axis=0)
        return cs(targets)

    new_pts = spline_resample(pts)
    new_jac = spline_resample(patch.jacobians.reshape(patch.m, 4)).reshape(patch.m, 2, 2)
    new_x0 = (spline_resample(patch.x0_samples)
              if patch.x0_samples is not None else None)
    out = PatchState(new_pts, new_jac, new_x0)
    out.events = list(patch.events)
    out.events.append(("redistribute", float(t), patch.spacing_ratio()))
    log.info("marker redistribution at t=%.6g (spacing ratio %.3g)",
             t, patch.spacing_ratio())
    return out


def x_from_jacobian(patch):
    """Lagrangian representation Dpsi(t, x0) X0(x0) at each marker image."""
    if patch.x0_samples is None:
        raise ArgumentError("patch carries no initial tangential-field samples")
    return np.einsum("mij,mj->mi", patch.jacobians, patch.x0_samples)


# ---------------------------------------------------------------------------
# semi-Lagrangian transport on the grid
# ---------------------------------------------------------------------------

def departure_points(grid, velocity, t, dt):
    """Backward-trajectory feet of grid nodes over [t, t+dt] (midpoint RK2)."""
    pts = np.stack([grid.x, grid.y], axis=-1)
    k1 = velocity.at_points(pts, t + dt)
    mid = pts - 0.5 * dt * k1
    k2 = velocity.at_points(mid, t + 0.5 * dt)
    return pts - dt * k2


def advect_scalar_semilag(f, velocity, t, dt, monotone=False, feet=None):
    """Transport a scalar one step along backward characteristics.

    In monotone mode the interpolant is clamped to the bilinear corner
    envelope at the departure cell (pointwise min/max principle) and the
    mass the clamp removed is restored within the envelope, so transported
    indicator data keeps both its range and its integral.
    """
    if feet is None:
        feet = departure_points(f.grid, velocity, t, dt)
    fx, fy = feet[..., 0], feet[..., 1]
    raw = sample_field(f, fx, fy)
    if not monotone:
        return ScalarField(f.grid, raw, check=False)
    lo, hi = cell_envelope(f.values, f.grid, fx, fy)
    vals = np.clip(raw, lo, hi)
    vals = restore_clamped_mass(vals, raw, lo, hi)
    return ScalarField(f.grid, vals, check=False)


def advect_level_set(levelset, velocity, t, dt, feet=None):
    f_new = advect_scalar_semilag(levelset.f, velocity, t, dt,
                                  monotone=False, feet=feet)
    return LevelSet(f_new, levelset.band_cells)


def evolve_X_eulerian(X, velocity, t, dt, order=3, advection="spectral"):
    """One step of the transported-field equation dX/dt + u.grad X = grad_u X.

    advection='spectral' evaluates u.grad X spectrally (smooth fields, high
    accuracy); 'semi_lagrangian' composes interpolation at backward feet with
    a Heun source correction (robust for rough fields).
    """
    grid = X.grid

    if advection == "spectral":
        def rhs(Xc, tau):
            u = velocity.field_at(grid, tau)
            gxx, gxy, gyx, gyy = velocity.grad_fields(grid, tau)
            sx = ScalarField(grid, Xc.x_comp.values * gxx + Xc.y_comp.values * gxy,
                             check=False).dealiased()
            sy = ScalarField(grid, Xc.x_comp.values * gyx + Xc.y_comp.values * gyy,
                             check=False).dealiased()
            return VectorField2(sx - advection_term(u, Xc.x_comp),
                                sy - advection_term(u, Xc.y_comp))

        if order == 2:
            k1 = rhs(X, t)
            k2 = rhs(X + dt * k1, t + dt)
            return X + (0.5 * dt) * (k1 + k2)
        if order == 3:
            k1 = rhs(X, t)
            k2 = rhs(X + (0.5 * dt) * k1, t + 0.5 * dt)
            k3 = rhs(X - dt * k1 + (2.0 * dt) * k2, t + dt)
            return X + (dt / 6.0) * (k1 + 4.0 * k2 + k3)
        raise ArgumentError("order must be 2 or 3")

    if advection != "semi_lagrangian":
        raise ArgumentError(f"unknown advection mode {advection!r}")

    feet = departure_points(grid, velocity, t, dt)
    fx, fy = feet[..., 0], feet[..., 1]

    def stretch(Xc, tau):
        gxx, gxy, gyx, gyy = velocity.grad_fields(grid, tau)
        return (Xc.x_comp.values * gxx + Xc.y_comp.values * gxy,
                Xc.x_comp.values * gyx + Xc.y_comp.values * gyy)

    sx0, sy0 = stretch(X, t)
    x_dep = sample_periodic(X.x_comp.values, grid, fx, fy)
    y_dep = sample_periodic(X.y_comp.values, grid, fx, fy)
    sx_dep = sample_periodic(sx0, grid, fx, fy)
    sy_dep = sample_periodic(sy0, grid, fx, fy)
    pred = VectorField2(ScalarField(grid, x_dep + dt * sx_dep, check=False),
                        ScalarField(grid, y_dep + dt * sy_dep, check=False))
    sx1, sy1 = stretch(pred, t + dt)
    new_x = x_dep + 0.5 * dt * (sx_dep + sx1)
    new_y = y_dep + 0.5 * dt * (sy_dep + sy1)
    if not (np.isfinite(new_x).all() and np.isfinite(new_y).all()):
        raise FieldDataError("transported field became non-finite")
    return VectorField2(ScalarField(grid, new_x, check=False),
                        ScalarField(grid, new_y, check=False))


# ---------------------------------------------------------------------------
# boundary regularity estimators
# ---------------------------------------------------------------------------

def boundary_c1eps_norm(patch, eps, max_markers=512, degeneracy_tol=1e-12):
    """C^1 norm plus the eps-Holder seminorm of the unit tangent.

    Pairs are restricted to parameter distance <= pi (subsampled to at most
    max_markers points; pair distances via Gram matrices).  Returns a dict
    with the combined norm, the seminorm alone, sup |gamma|, sup |dgamma|,
    and the arc-chord ratio.
    """
    if patch.m < 64:
        raise ArgumentError("boundary norm needs at least 64 markers")
    tan = patch.tangents()
    speed = np.hypot(tan[:, 0], tan[:, 1])
    if speed.min() < degeneracy_tol:
        raise DegenerateTangentError(
            f"marker tangent degenerated to |dgamma| = {speed.min():.3e}")
    stride = max(1, patch.m // max_markers)
    tau = tan[::stride] / speed[::stride, None]
    sig = patch.sigma[::stride]
    pts = patch.markers[::stride]

    dsig = np.abs(sig[:, None] - sig[None, :])
    dsig = np.minimum(dsig, 2.0 * np.pi - dsig)
    pair = dsig <= np.pi
    np.fill_diagonal(pair, False)
    # |tau_i - tau_j|^2 = 2 - 2 tau_i . tau_j for unit tangents
    dtau = np.sqrt(np.maximum(2.0 - 2.0 * (tau @ tau.T), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(pair, dtau / np.where(pair, dsig, 1.0) ** eps, 0.0)
    seminorm = float(quot.max())

    sq = (pts * pts).sum(axis=1)
    chord_sq = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T), 0.0)
    chord = np.sqrt(chord_sq)
    arc = dsig * float(speed.mean())  # uniform-parameter arc estimate
    with np.errstate(divide="ignore", invalid="ignore"):
        ac = np.where(pair & (chord > 0), arc / np.where(chord > 0, chord, 1.0), 1.0)
    c1 = float(np.abs(patch.markers).max() + speed.max())
    return {
        "norm": c1 + seminorm,
        "tangent_seminorm": seminorm,
        "sup_gamma": float(np.abs(patch.markers).max()),
        "sup_dgamma": float(speed.max()),
        "arc_chord_ratio": float(ac.max()),
    }


def tangency_sines(patch, X):
    """|sin(angle)| between the transported field at markers and the marker
    tangent; X may be a VectorField2 (interpolated) or an (m, 2) array."""
    tan = patch.tangents()
    if isinstance(X, VectorField2):
        vals = sample_vector(X, patch.markers[:, 0], patch.markers[:, 1])
    else:
        vals = np.asarray(X, dtype=float)
    cross = tan[:, 0] * vals[:, 1] - tan[:, 1] * vals[:, 0]
    denom = np.linalg.norm(tan, axis=1) * np.linalg.norm(vals, axis=1)
    denom = np.where(denom > 0, denom, 1.0)
    return np.abs(cross) / denom


def holder_quotient_norm(f, eps, max_cell_lag=8, dyadic_lags=6):
    """Direct Holder estimate of a grid field: sup|f| plus the sup over a
    family of lattice offsets of |f(x+d) - f(x)| / |d|^eps.

    Offsets cover all cells up to max_cell_lag plus dyadically growing lags,
    which is enough to bracket the dyadic-analysis norm on smooth fields.
    """
    vals = f.values
    h = f.grid.h
    n = f.grid.n
    best = 0.0
    lags = set()
    for a in range(0, max_cell_lag + 1):
        for b in range(0, max_cell_lag + 1):
            if a == 0 and b == 0:
                continue
            lags.add((a, b))
    lag = 2 * max_cell_lag
    for _ in range(dyadic_lags):
        if lag >= n // 2:
            break
        lags.update({(lag, 0), (0, lag), (lag, lag)})
        lag *= 2
    for a, b in sorted(lags):
        d = h * float(np.hypot(a, b))
        diff = np.abs(np.roll(vals, (-a, -b), axis=(0, 1)) - vals).max()
        best = max(best, diff / d**eps)
    return float(np.abs(vals).max() + best)


# ---------------------------------------------------------------------------
# contour extraction (marching squares with cell-average saddle rule)
# ---------------------------------------------------------------------------

def marching_squares(f, level=0.0, mask=None, floor_rel=1e-3):
    """Zero-contour polylines of a gridded scalar within the masked band.

    Candidate cells are classified with array operations; a relative
    amplitude floor discards cells whose corner values all sit within
    floor_rel * max|f| of the level, which filters roundoff-scale sign noise
    on flat plateaus.  Crossings are keyed by the lattice edge they live on
    (computed once per edge, so shared endpoints match exactly); saddle cells
    are disambiguated by the sign of the cell average.  Returns a list of
    (k, 2) polyline arrays, closed loops when the chain closes.
    """
    vals = f.values
    n = f.grid.n
    h = f.grid.h
    if mask is None:
        mask = np.ones((n, n), dtype=bool)

    v00 = vals[:-1, :-1]
    v10 = vals[1:, :-1]
    v11 = vals[1:, 1:]
    v01 = vals[:-1, 1:]
    above = [v00 > level, v10 > level, v11 > level, v01 > level]
    below = [v00 < level, v10 < level, v11 < level, v01 < level]
    any_above = above[0] | above[1] | above[2] | above[3]
    any_below = below[0] | below[1] | below[2] | below[3]
    amp = np.maximum.reduce([np.abs(v - level) for v in (v00, v10, v11, v01)])
    floor = floor_rel * max(np.abs(vals - level).max(), 1e-300)
    band = mask[:-1, :-1] | mask[1:, :-1] | mask[:-1, 1:] | mask[1:, 1:]
    candidates = np.argwhere(band & any_above & any_below & (amp > floor))

    def edge_id(e, i, j):
        # cell corners: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
        if e == 0:
            return ("x", i, j)
        if e == 1:
            return ("y", i + 1, j)
        if e == 2:
            return ("x", i, j + 1)
        return ("y", i, j)

    crossings = {}

    def crossing_point(eid):
        if eid not in crossings:
            kind, i, j = eid
            if kind == "x":
                v0, v1 = vals[i, j], vals[i + 1, j]
                p0 = np.array([i * h, j * h])
                p1 = np.array([(i + 1) * h, j * h])
            else:
                v0, v1 = vals[i, j], vals[i, j + 1]
                p0 = np.array([i * h, j * h])
                p1 = np.array([i * h, (j + 1) * h])
            t = (level - v0) / (v1 - v0)
            crossings[eid] = p0 + t * (p1 - p0)
        return crossings[eid]

    segments = []
    for i, j in candidates:
        v = (vals[i, j], vals[i + 1, j], vals[i + 1, j + 1], vals[i, j + 1])
        ab = [x > level for x in v]
        be = [x < level for x in v]
        cut = [e for e in range(4)
               if (ab[e] and be[(e + 1) % 4]) or (be[e] and ab[(e + 1) % 4])]
        eids = [edge_id(e, i, j) for e in cut]
        if len(cut) == 2:
            segments.append((eids[0], eids[1]))
        elif len(cut) == 4:
            # saddle: pair crossings according to the cell-average sign
            center_above = sum(v) / 4.0 > level
            if ab[0] == center_above:
                segments.append((eids[3], eids[0]))
                segments.append((eids[1], eids[2]))
            else:
                segments.append((eids[0], eids[1]))
                segments.append((eids[2], eids[3]))

    return [np.array([crossing_point(eid) for eid in chain])
            for chain in _chain_segments(segments)]


def _chain_segments(segments):
    """Link segments (pairs of hashable endpoint ids) into ordered chains."""
    if not segments:
        return []
    touching = {}
    for sid, (a, b) in enumerate(segments):
        touching.setdefault(a, []).append(sid)
        touching.setdefault(b, []).append(sid)

    used = [False] * len(segments)
    chains = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        a, b = segments[start]
        chain = [a, b]
        for _ in range(2):  # grow at the tail, then at the (reversed) head
            while True:
                tail = chain[-1]
                nxt = next((s for s in touching.get(tail, []) if not used[s]), None)
                if nxt is None:
                    break
                used[nxt] = True
                sa, sb = segments[nxt]
                chain.append(sb if sa == tail else sa)
            chain.reverse()
        chains.append(chain)
    return chains


def hausdorff_distance(a, b):
    """Symmetric point-set Hausdorff distance between two (m, 2) arrays."""
    d1 = directed_hausdorff(a, b)[0]
    d2 = directed_hausdorff(b, a)[0]
    return max(d1, d2)
