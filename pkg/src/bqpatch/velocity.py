"""Velocity samplers used by the transport machinery and the probe sweeps.

Two flavors implement the same small interface:

* ``GriddedVelocity`` wraps solver-produced fields at two consecutive times
  and interpolates linearly in t, cubically in space; gradients come from
  spectral differentiation of the gridded components.
* ``AnalyticVelocity`` wraps closed-form callables (and, when supplied, their
  exact gradient), which is what oracle tests and the bound sweeps want.

Interface: ``field_at(grid, t)``, ``at_points(pts, t)``,
``grad_at_points(pts, t)``, ``grad_fields(grid, t)``, ``max_speed(grid, t)``.
"""

import numpy as np

from .fields import ScalarField, VectorField2
from .interp import sample_field
from .lp import smoothstep
from .spectral import dx, dy


class GriddedVelocity:
    """Two-time-level gridded velocity, linear in time between the levels.

    Spatial interpolation happens per level (spline coefficients cache on the
    component fields) and the sampled values are blended, which commutes with
    the linear time interpolation.
    """

    def __init__(self, t0, u0, t1=None, u1=None, divergence_free=True):
        self.t0 = t0
        self.u0 = u0
        self.t1 = t1 if t1 is not None else t0
        self.u1 = u1 if u1 is not None else u0
        self.divergence_free = divergence_free
        self._grad_cache = {}

    def _blend(self, t):
        if self.t1 == self.t0:
            return 0.0
        return float(np.clip((t - self.t0) / (self.t1 - self.t0), 0.0, 1.0))

    def field_at(self, grid, t):
        a = self._blend(t)
        if a == 0.0:
            return self.u0
        if a == 1.0:
            return self.u1
        return VectorField2(
            self.u0.x_comp * (1 - a) + self.u1.x_comp * a,
            self.u0.y_comp * (1 - a) + self.u1.y_comp * a,
        )

    def at_points(self, pts, t):
        a = self._blend(t)
        px, py = pts[..., 0], pts[..., 1]
        parts = []
        if a < 1.0:
            parts.append((1.0 - a, self.u0))
        if a > 0.0:
            parts.append((a, self.u1))
        out = 0.0
        for w, u in parts:
            out = out + w * np.stack([sample_field(u.x_comp, px, py),
                                      sample_field(u.y_comp, px, py)], axis=-1)
        return out

    def _grads(self, which):
        if which not in self._grad_cache:
            u = self.u0 if which == 0 else self.u1
            self._grad_cache[which] = (dx(u.x_comp), dy(u.x_comp),
                                       dx(u.y_comp), dy(u.y_comp))
        return self._grad_cache[which]

    def grad_fields(self, grid, t):
        a = self._blend(t)
        g0 = self._grads(0)
        if a == 0.0:
            return tuple(c.values for c in g0)
        g1 = self._grads(1)
        return tuple((1 - a) * p.values + a * q.values for p, q in zip(g0, g1))

    def grad_at_points(self, pts, t):
        a = self._blend(t)
        px, py = pts[..., 0], pts[..., 1]
        out = np.zeros(pts.shape[:-1] + (2, 2))
        parts = []
        if a < 1.0:
            parts.append((1.0 - a, self._grads(0)))
        if a > 0.0:
            parts.append((a, self._grads(1)))
        for w, comps in parts:
            for slot, c in enumerate(comps):
                out[..., slot // 2, slot % 2] += w * sample_field(c, px, py)
        return out

    def max_speed(self, grid, t):
        return self.field_at(grid, t).max_norm()


class AnalyticVelocity:
    """Closed-form velocity (ux, uy)(x, y, t) with optional exact gradient.

    ``grad`` takes (x, y, t) and returns the four entries
    (dux/dx, dux/dy, duy/dx, duy/dy) as broadcastable arrays.
    """

    def __init__(self, ux, uy, grad=None, divergence_free=True, steady=False):
        self.ux = ux
        self.uy = uy
        self.grad = grad
        self.divergence_free = divergence_free
        self.steady = steady

    def field_at(self, grid, t):
        return VectorField2(
            ScalarField(grid, np.broadcast_to(self.ux(grid.x, grid.y, t),
                                              (grid.n, grid.n)).copy()),
            ScalarField(grid, np.broadcast_to(self.uy(grid.x, grid.y, t),
                                              (grid.n, grid.n)).copy()),
        )

    def at_points(self, pts, t):
        px, py = pts[..., 0], pts[..., 1]
        return np.stack([
            np.broadcast_to(self.ux(px, py, t), px.shape).astype(float),
            np.broadcast_to(self.uy(px, py, t), px.shape).astype(float),
        ], axis=-1)

    def grad_at_points(self, pts, t):
        px, py = pts[..., 0], pts[..., 1]
        if self.grad is not None:
            gxx, gxy, gyx, gyy = self.grad(px, py, t)
        else:
            eps = 1e-6
            gxx = (self.ux(px + eps, py, t) - self.ux(px - eps, py, t)) / (2 * eps)
            gxy = (self.ux(px, py + eps, t) - self.ux(px, py - eps, t)) / (2 * eps)
            gyx = (self.uy(px + eps, py, t) - self.uy(px - eps, py, t)) / (2 * eps)
            gyy = (self.uy(px, py + eps, t) - self.uy(px, py - eps, t)) / (2 * eps)
        out = np.empty(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = np.broadcast_to(gxx, px.shape)
        out[..., 0, 1] = np.broadcast_to(gxy, px.shape)
        out[..., 1, 0] = np.broadcast_to(gyx, px.shape)
        out[..., 1, 1] = np.broadcast_to(gyy, px.shape)
        return out

    def grad_fields(self, grid, t):
        if self.grad is None:
            u = self.field_at(grid, t)
            return (dx(u.x_comp).values, dy(u.x_comp).values,
                    dx(u.y_comp).values, dy(u.y_comp).values)
        gxx, gxy, gyx, gyy = self.grad(grid.x, grid.y, t)
        shape = (grid.n, grid.n)
        return tuple(np.broadcast_to(g, shape).astype(float)
                     for g in (gxx, gxy, gyx, gyy))

    def max_speed(self, grid, t):
        return self.field_at(grid, t).max_norm()


def steady(u):
    """Wrap a single gridded VectorField2 as a steady sampler."""
    return GriddedVelocity(0.0, u)


# ---------------------------------------------------------------------------
# divergence-free analytic families (periodic on the default box)
# ---------------------------------------------------------------------------

def _radial_taper(r, r_solid, r_outer):
    """1 inside r_solid, 0 beyond r_outer, smooth monotone in between."""
    return 1.0 - smoothstep((r - r_solid) / (r_outer - r_solid))


def cutoff_rotation(center, r_solid=1.1, r_outer=1.9, rate=1.0):
    """Rigid rotation about ``center`` tapered to zero before the box edge.

    Inside r_solid the flow is exactly rate*(-(y-cy), x-cx); the tapered ring
    keeps it periodic.  Divergence-free everywhere because the taper is
    radial.
    """
    cx, cy = center

    def taper(x, y):
        r = np.hypot(x - cx, y - cy)
        return _radial_taper(r, r_solid, r_outer), r

    def ux(x, y, t):
        a, _ = taper(x, y)
        return -rate * (y - cy) * a

    def uy(x, y, t):
        a, _ = taper(x, y)
        return rate * (x - cx) * a

    def grad(x, y, t):
        xx = np.asarray(x, dtype=float) - cx
        yy = np.asarray(y, dtype=float) - cy
        r = np.hypot(xx, yy)
        a, _ = taper(x, y)
        # d/dr of the taper via finite difference of the smooth profile
        eps = 1e-7
        da = (_radial_taper(r + eps, r_solid, r_outer)
              - _radial_taper(r - eps, r_solid, r_outer)) / (2 * eps)
        rr = np.where(r > 0, r, 1.0)
        gxx = -rate * yy * da * xx / rr
        gxy = -rate * (a + yy * da * yy / rr)
        gyx = rate * (a + xx * da * xx / rr)
        gyy = rate * xx * da * yy / rr
        return gxx, gxy, gyx, gyy

    return AnalyticVelocity(ux, uy, grad=grad, steady=True)


def shear_bump(length=2.0 * np.pi, amplitude=1.0, waves=1):
    """Horizontal shear u = (a sin(2*pi*waves*y/L), 0); trivially solenoidal."""
    k = 2.0 * np.pi * waves / length

    def ux(x, y, t):
        return amplitude * np.sin(k * y)

    def uy(x, y, t):
        return np.zeros_like(np.asarray(x, dtype=float))

    def grad(x, y, t):
        z = np.zeros_like(np.asarray(x, dtype=float))
        return z, amplitude * k * np.cos(k * y), z, z

    return AnalyticVelocity(ux, uy, grad=grad, steady=True)


def periodic_mixer(length=2.0 * np.pi, amplitude=0.8, omega=2.0):
    """Time-periodic cellular flow from the stream function
    a * [sin x sin y cos(w t) + cos(2x) cos(y) sin(w t)] (2*pi box)."""
    s = 2.0 * np.pi / length

    def psi_parts(x, y, t):
        return (np.sin(s * x) * np.sin(s * y) * np.cos(omega * t),
                np.cos(2 * s * x) * np.cos(s * y) * np.sin(omega * t))

    def ux(x, y, t):
        # u = (dpsi/dy, -dpsi/dx)
        a = amplitude
        return a * (np.sin(s * x) * s * np.cos(s * y) * np.cos(omega * t)
                    - np.cos(2 * s * x) * s * np.sin(s * y) * np.sin(omega * t))

    def uy(x, y, t):
        a = amplitude
        return -a * (s * np.cos(s * x) * np.sin(s * y) * np.cos(omega * t)
                     - 2 * s * np.sin(2 * s * x) * np.cos(s * y) * np.sin(omega * t))

    def grad(x, y, t):
        a = amplitude
        gxx = a * (s * s * np.cos(s * x) * np.cos(s * y) * np.cos(omega * t)
                   + 2 * s * s * np.sin(2 * s * x) * np.sin(s * y) * np.sin(omega * t))
        gxy = a * (-s * s * np.sin(s * x) * np.sin(s * y) * np.cos(omega * t)
                   - s * s * np.cos(2 * s * x) * np.cos(s * y) * np.sin(omega * t))
        gyx = a * (s * s * np.sin(s * x) * np.sin(s * y) * np.cos(omega * t)
                   + 4 * s * s * np.cos(2 * s * x) * np.cos(s * y) * np.sin(omega * t))
        gyy = -gxx
        return gxx, gxy, gyx, gyy

    return AnalyticVelocity(ux, uy, grad=grad)


VELOCITY_FAMILIES = {
    "rotation": lambda L: cutoff_rotation((L / 2, L / 2)),
    "shear": lambda L: shear_bump(length=L),
    "mixer": lambda L: periodic_mixer(length=L),
}
