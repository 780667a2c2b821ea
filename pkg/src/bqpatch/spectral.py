"""Spectral differential operators on periodic fields.

Derivatives multiply by i*k in Fourier space and are projected onto the
retained (dealiased) ball.  The velocity reconstruction fixes the orientation
convention curl u = d1 u2 - d2 u1, so curl(velocity_from_vorticity(w)) == w
on mean-free input.
"""

import warnings

import numpy as np

from .errors import MeanRemovalWarning
from .fields import ScalarField, VectorField2

MEAN_TOL = 1e-10


def _dx_spec(f):
    return f.grid.ikx_masked * f.spectrum


def _dy_spec(f):
    return f.grid.iky_masked * f.spectrum


def dx(f):
    return ScalarField.from_spectrum(f.grid, _dx_spec(f))


def dy(f):
    return ScalarField.from_spectrum(f.grid, _dy_spec(f))


def gradient(f):
    """Spectral gradient (d1 f, d2 f) of a scalar field."""
    f.require_finite("gradient input")
    return VectorField2(dx(f), dy(f))


def grad_perp(f):
    """Rotated gradient (-d2 f, d1 f); divergence-free by construction."""
    f.require_finite("grad_perp input")
    return VectorField2(-dy(f), dx(f))


def divergence(v):
    return dx(v.x_comp) + dy(v.y_comp)


def curl(v):
    """Scalar curl d1 v2 - d2 v1."""
    return dx(v.y_comp) - dy(v.x_comp)


def laplacian(f):
    g = f.grid
    return ScalarField.from_spectrum(g, -g.k2 * f.spectrum * g.dealias_mask)


def dealiased_product(a, b):
    """Pointwise product followed by the 2/3-rule projection."""
    return (a * b).dealiased()


def advection_term(v, f):
    """Convective derivative v . grad f, dealiased."""
    gf = gradient(f)
    vals = v.x_comp.values * gf.x_comp.values + v.y_comp.values * gf.y_comp.values
    return ScalarField(f.grid, vals, check=False).dealiased()


def divergence_form_term(v, f):
    """div(f v), dealiased; equals the convective form when div v = 0."""
    fv_x = dealiased_product(f, v.x_comp)
    fv_y = dealiased_product(f, v.y_comp)
    return divergence(VectorField2(fv_x, fv_y))


def velocity_from_vorticity(omega):
    """Reconstruct the divergence-free velocity with the given scalar curl.

    The stream function psi solves Lap psi = omega and u = grad_perp psi.  The
    zero mode of u is pinned to zero (mean-free Galilean frame).  A mean in
    omega beyond MEAN_TOL * ||omega||_L2 is removed with a warning.
    """
    omega.require_finite("vorticity")
    g = omega.grid
    spec = omega.spectrum * g.dealias_mask
    mean = abs(spec[0, 0]) / g.n**2
    if mean > MEAN_TOL * max(omega.l2_norm(), np.finfo(float).tiny):
        warnings.warn(
            f"vorticity mean {mean:.3e} removed before inversion",
            MeanRemovalWarning, stacklevel=2)
    spec = spec.copy()
    spec[0, 0] = 0.0
    psi_spec = -spec * g.inv_k2
    ux = ScalarField.from_spectrum(g, -1j * g.ky * psi_spec)
    uy = ScalarField.from_spectrum(g, 1j * g.kx * psi_spec)
    return VectorField2(ux, uy)


# the operation name used throughout the literature-facing API
biot_savart = velocity_from_vorticity


def heat_multiplier(f, nu, dt):
    """Apply the exact heat semigroup exp(nu*dt*Lap) mode by mode."""
    if nu < 0 or dt < 0:
        raise ValueError("diffusivity and time increment must be nonnegative")
    if nu == 0 or dt == 0:
        return f
    g = f.grid
    return ScalarField.from_spectrum(g, np.exp(-nu * g.k2 * dt) * f.spectrum)


def heat_factor(grid, nu, dt):
    """The semigroup symbol exp(-nu |k|^2 dt) as an array (for steppers)."""
    return np.exp(-nu * grid.k2 * dt)


def solve_poisson(rhs):
    """Solve Lap p = rhs with zero mean; the rhs mean mode is dropped."""
    g = rhs.grid
    spec = rhs.spectrum * g.dealias_mask
    p_spec = -spec * g.inv_k2
    return ScalarField.from_spectrum(g, p_spec)


def leray_project(v):
    """Remove the gradient part of a vector field (zero mode untouched)."""
    g = v.grid
    d = divergence(v)
    phi_spec = -d.spectrum * g.inv_k2
    px = ScalarField.from_spectrum(g, v.x_comp.spectrum * g.dealias_mask - 1j * g.kx * phi_spec)
    py = ScalarField.from_spectrum(g, v.y_comp.spectrum * g.dealias_mask - 1j * g.ky * phi_spec)
    return VectorField2(px, py)


def recover_pressure(u, theta, div_tol=1e-8):
    """Pressure from the balance Lap P = div(theta e2 - u.grad u), zero mean.

    grad P then equals minus the gradient part of (u.grad u + theta e2) to
    spectral accuracy.  A warning is issued if u is visibly not solenoidal.
    """
    u.x_comp.require_finite("velocity")
    u.y_comp.require_finite("velocity")
    theta.require_finite("temperature")
    g = u.grid
    div_u = divergence(u)
    scale = max(np.abs(gradient(u.x_comp).x_comp.values).max(), 1.0)
    if np.abs(div_u.values).max() > div_tol * scale:
        warnings.warn("recover_pressure called on non-solenoidal velocity",
                      MeanRemovalWarning, stacklevel=2)
    adv_x = advection_term(u, u.x_comp)
    adv_y = advection_term(u, u.y_comp)
    rhs = divergence(VectorField2(-adv_x, theta.dealiased() - adv_y))
    return solve_poisson(rhs)
