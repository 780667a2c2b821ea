"""Time integration of the buoyancy-coupled vorticity system and of the
linear transport-diffusion equation used by the bound sweeps.

The viscous part is integrated exactly with the heat semigroup as an
integrating factor; transport and buoyancy terms are explicit Runge-Kutta
stages (order 2 or 3).  Temperature can be advected spectrally (smooth data)
or semi-Lagrangian with monotone interpolation (patch data); in the latter
case the buoyancy source is read from a mollified copy of theta.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.fft

from .errors import ArgumentError, FieldDataError, StepFailureError
from .fields import ScalarField, VectorField2, fft_workers
from .lagrangian import (LevelSet, advect_level_set, advect_markers,
                         advect_scalar_semilag, departure_points,
                         evolve_X_eulerian)
from .spectral import (divergence, grad_perp, gradient, heat_factor,
                       velocity_from_vorticity)
from .velocity import GriddedVelocity

SCHEME_ORDER = {"ifrk2": 2, "ifrk3": 3}


@dataclass
class StepperConfig:
    dt: float = 2e-3
    cfl_target: float = 0.4
    scheme: str = "ifrk2"
    theta_advection: str = "semi_lagrangian"  # or "spectral"
    x_mode: str = "gradient_perp"  # "gradient_perp", "transport", or "none"
    mollifier_cells: float = 2.0  # Gaussian width for the buoyancy source, in h
    conservative_advection: bool = False
    advection_enabled: bool = True  # False freezes u = 0 in transport terms
    marker_order: int = 3
    max_dt_halvings: int = 10

    def __post_init__(self):
        if self.dt <= 0:
            raise ArgumentError("base step must be positive")
        if not (0 < self.cfl_target <= 0.5):
            raise ArgumentError("cfl_target must lie in (0, 0.5]")
        if self.scheme not in SCHEME_ORDER:
            raise ArgumentError(f"unknown scheme {self.scheme!r}")
        if self.theta_advection not in ("semi_lagrangian", "spectral"):
            raise ArgumentError(f"unknown theta advection {self.theta_advection!r}")
        if self.scheme == "ifrk3" and self.theta_advection == "semi_lagrangian":
            raise ArgumentError(
                "ifrk3 requires spectral theta advection (no half-stage "
                "semi-Lagrangian coupling)")
        if self.x_mode not in ("gradient_perp", "transport", "none"):
            raise ArgumentError(f"unknown x_mode {self.x_mode!r}")


@dataclass
class SimState:
    t: float
    theta: ScalarField
    omega: ScalarField
    u: VectorField2
    X: VectorField2 | None
    levelset: LevelSet | None
    nu: float

    @classmethod
    def initial(cls, theta, omega, nu, X=None, levelset=None):
        if nu <= 0:
            raise ArgumentError("viscosity must be positive")
        omega = _pin_mean(omega)
        u = velocity_from_vorticity(omega)
        return cls(0.0, theta, omega, u, X, levelset, nu)


def _pin_mean(f):
    spec = f.spectrum.copy()
    spec[0, 0] = 0.0
    return ScalarField.from_spectrum(f.grid, spec)


def _buoyancy_source_spec(theta, mollifier_cells):
    """Spectrum of d1 theta, optionally after Gaussian mollification."""
    g = theta.grid
    spec = theta.spectrum * g.dealias_mask
    if mollifier_cells > 0:
        width = mollifier_cells * g.h
        spec = spec * np.exp(-0.5 * g.k2 * width**2)
    return (1j * g.kx) * spec


def buoyancy_field(theta, mollifier_cells):
    """The temperature copy whose gradient actually forces the momentum."""
    g = theta.grid
    spec = theta.spectrum * g.dealias_mask
    if mollifier_cells > 0:
        width = mollifier_cells * g.h
        spec = spec * np.exp(-0.5 * g.k2 * width**2)
    return ScalarField.from_spectrum(g, spec)


def _advection_spec(u, f):
    """Spectrum of u.grad f (convective form), dealiased; 2 ifft + 1 fft."""
    g = f.grid
    spec = f.spectrum
    fx = scipy.fft.ifft2(g.ikx_masked * spec, workers=fft_workers()).real
    fy = scipy.fft.ifft2(g.iky_masked * spec, workers=fft_workers()).real
    vals = u.x_comp.values * fx + u.y_comp.values * fy
    return scipy.fft.fft2(vals, workers=fft_workers()) * g.dealias_mask


def _omega_rhs_spec(omega, theta, cfg, u=None):
    """Spectrum of the explicit vorticity tendency: -u.grad w + d1 theta."""
    g = omega.grid
    src = _buoyancy_source_spec(theta, cfg.mollifier_cells)
    if not cfg.advection_enabled:
        return src, None
    if u is None:
        u = velocity_from_vorticity(omega)
    if cfg.conservative_advection:
        adv_spec = divergence(VectorField2(
            (u.x_comp * omega).dealiased(),
            (u.y_comp * omega).dealiased())).spectrum * g.dealias_mask
    else:
        adv_spec = _advection_spec(u, omega)
    return src - adv_spec, u


def _check_finite_spec(spec, t):
    if not np.all(np.isfinite(spec)):
        raise StepFailureError("non-finite spectrum during step",
                               {"t": t})


def step(state, cfg):
    """Advance the coupled system one accepted step; returns the new state.

    The step size is min(cfg.dt, cfl_target*h/max|u|), recomputed from the
    current velocity (deterministic reduction).  Raises StepFailureError when
    the CFL constraint collapses the step below dt/2^max_dt_halvings.
    """
    g = state.omega.grid
    umax = state.u.max_norm()
    dt = cfg.dt
    if umax > 0:
        dt = min(dt, cfg.cfl_target * g.h / umax)
    if dt < cfg.dt / 2**cfg.max_dt_halvings:
        raise StepFailureError(
            "CFL constraint collapsed the step",
            {"t": state.t, "dt": dt, "max_speed": umax})

    order = SCHEME_ORDER[cfg.scheme]
    e_full = heat_factor(g, state.nu, dt)
    t = state.t
    w_spec = state.omega.spectrum * g.dealias_mask

    feet = None
    if order == 2:
        n1, _ = _omega_rhs_spec(state.omega, state.theta, cfg, u=state.u)
        w_star = ScalarField.from_spectrum(g, e_full * (w_spec + dt * n1))
        u_star = velocity_from_vorticity(w_star) if cfg.advection_enabled \
            else VectorField2.zeros(g)
        vel = GriddedVelocity(t, state.u, t + dt, u_star)

        if cfg.theta_advection == "semi_lagrangian":
            if cfg.advection_enabled:
                feet = departure_points(g, vel, t, dt)
                theta_new = advect_scalar_semilag(state.theta, vel, t, dt,
                                                  monotone=True, feet=feet)
            else:
                theta_new = state.theta
        else:
            if cfg.advection_enabled:
                a1 = _advection_spec(state.u, state.theta)
                th_star = ScalarField.from_spectrum(
                    g, state.theta.spectrum * g.dealias_mask - dt * a1)
                a2 = _advection_spec(u_star, th_star)
                theta_new = ScalarField.from_spectrum(
                    g, state.theta.spectrum * g.dealias_mask - 0.5 * dt * (a1 + a2))
            else:
                theta_new = state.theta

        n2, _ = _omega_rhs_spec(w_star, theta_new, cfg, u=u_star)
        w_new_spec = e_full * w_spec + 0.5 * dt * (e_full * n1 + n2)
    else:  # ifrk3, spectral theta only
        e_half = heat_factor(g, state.nu, 0.5 * dt)
        th_spec = state.theta.spectrum * g.dealias_mask

        def stage_rhs(theta_f, w_f, u_f=None):
            n_spec, u_f = _omega_rhs_spec(w_f, theta_f, cfg, u=u_f)
            if cfg.advection_enabled:
                m_spec = -_advection_spec(u_f, theta_f)
            else:
                m_spec = np.zeros_like(th_spec)
            return n_spec, m_spec

        n1, m1 = stage_rhs(state.theta, state.omega, state.u)
        w2 = ScalarField.from_spectrum(g, e_half * (w_spec + 0.5 * dt * n1))
        th2 = ScalarField.from_spectrum(g, th_spec + 0.5 * dt * m1)
        n2, m2 = stage_rhs(th2, w2)
        w3 = ScalarField.from_spectrum(
            g, e_full * w_spec - dt * e_full * n1 + 2.0 * dt * e_half * n2)
        th3 = ScalarField.from_spectrum(g, th_spec - dt * m1 + 2.0 * dt * m2)
        n3, m3 = stage_rhs(th3, w3)
        w_new_spec = e_full * w_spec + (dt / 6.0) * (
            e_full * n1 + 4.0 * e_half * n2 + n3)
        theta_new = ScalarField.from_spectrum(
            g, th_spec + (dt / 6.0) * (m1 + 4.0 * m2 + m3))

    _check_finite_spec(w_new_spec, t)
    w_new_spec = w_new_spec * g.dealias_mask
    w_new_spec[0, 0] = 0.0  # mean mode pinned
    omega_new = ScalarField.from_spectrum(g, w_new_spec)
    u_new = velocity_from_vorticity(omega_new)
    vel_pair = GriddedVelocity(t, state.u, t + dt, u_new)

    levelset_new = state.levelset
    if state.levelset is not None and cfg.advection_enabled:
        levelset_new = advect_level_set(state.levelset, vel_pair, t, dt,
                                        feet=feet)

    X_new = state.X
    if cfg.x_mode == "gradient_perp" and levelset_new is not None:
        X_new = grad_perp(levelset_new.f)
    elif cfg.x_mode == "transport" and state.X is not None:
        X_new = evolve_X_eulerian(state.X, vel_pair, t, dt, order=2,
                                  advection="semi_lagrangian")

    return SimState(t + dt, theta_new, omega_new, u_new, X_new,
                    levelset_new, state.nu), dt


def run(state, cfg, t_end, patch=None, on_record=None, record_every=1,
        on_step=None):
    """March from state.t to t_end, invoking marker advancement per step.

    ``on_step(state, patch, step_index)`` fires after every step (and once at
    the initial state); ``on_record`` fires every ``record_every`` steps plus
    at the initial and final states.  Returns (final state, final patch,
    number of steps).
    """
    if t_end < state.t:
        raise ArgumentError("t_end precedes the current time")
    k = 0
    if on_step is not None:
        on_step(state, patch, k)
    if on_record is not None:
        on_record(state, patch, k)
    while state.t < t_end - 1e-14:
        remaining = t_end - state.t
        cfg_step = cfg if cfg.dt <= remaining else replace(cfg, dt=remaining)
        t_before = state.t
        u_before = state.u
        state, dt = step(state, cfg_step)
        if patch is not None and cfg.advection_enabled:
            vel = GriddedVelocity(t_before, u_before, state.t, state.u)
            patch = advect_markers(patch, vel, t_before, dt,
                                   order=cfg.marker_order,
                                   grid=state.omega.grid)
        k += 1
        if on_step is not None:
            on_step(state, patch, k)
        if on_record is not None and (k % record_every == 0 or state.t >= t_end - 1e-14):
            on_record(state, patch, k)
    return state, patch, k


# ---------------------------------------------------------------------------
# linear transport-diffusion integrator
# ---------------------------------------------------------------------------

def _as_source(g, grid):
    if g is None:
        return lambda t: None
    if isinstance(g, ScalarField):
        return lambda t: g
    if callable(g):
        probe = g(0.0)
        if isinstance(probe, ScalarField):
            return g
    raise ArgumentError("source must be None, a ScalarField, or t -> ScalarField")


def solve_transport_diffusion(f0, velocity, source, nu, t_end, dt,
                              scheme="ifrk3", on_step=None, div_tol=1e-6):
    """Integrate df/dt + div(f v) - nu Lap f = g on [0, t_end].

    velocity: sampler with field_at(grid, t); must be divergence-free to
    ``div_tol`` (checked at t = 0).  on_step(t, f) fires after every step and
    at t = 0, letting callers accumulate time norms at step cadence.
    Returns the final field.
    """
    if nu < 0:
        raise ArgumentError("diffusivity must be nonnegative")
    g = f0.grid
    src = _as_source(source, g)
    order = SCHEME_ORDER[scheme]

    if not getattr(velocity, "divergence_free", False):
        v0 = velocity.field_at(g, 0.0)
        div_scale = max(np.abs(gradient(v0.x_comp).x_comp.values).max(), 1.0)
        if np.abs(divergence(v0).values).max() > div_tol * div_scale:
            raise ArgumentError("transport velocity is not divergence-free")

    def rhs(f, t):
        v = velocity.field_at(g, t)
        out = -divergence(VectorField2((f * v.x_comp).dealiased(),
                                       (f * v.y_comp).dealiased())).spectrum
        s = src(t)
        if s is not None:
            out = out + s.spectrum * g.dealias_mask
        return out * g.dealias_mask

    f_spec = f0.spectrum * g.dealias_mask
    t = 0.0
    if on_step is not None:
        on_step(t, ScalarField.from_spectrum(g, f_spec))
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    for k in range(n_steps):
        h = min(dt, t_end - t)
        e_full = heat_factor(g, nu, h)
        f_cur = ScalarField.from_spectrum(g, f_spec)
        n1 = rhs(f_cur, t)
        if order == 2:
            f_star = ScalarField.from_spectrum(g, e_full * (f_spec + h * n1))
            n2 = rhs(f_star, t + h)
            f_spec = e_full * f_spec + 0.5 * h * (e_full * n1 + n2)
        else:
            e_half = heat_factor(g, nu, 0.5 * h)
            f2 = ScalarField.from_spectrum(g, e_half * (f_spec + 0.5 * h * n1))
            n2 = rhs(f2, t + 0.5 * h)
            f3 = ScalarField.from_spectrum(
                g, e_full * f_spec - h * e_full * n1 + 2.0 * h * e_half * n2)
            n3 = rhs(f3, t + h)
            f_spec = e_full * f_spec + (h / 6.0) * (e_full * n1 + 4.0 * e_half * n2 + n3)
        if not np.all(np.isfinite(f_spec)):
            raise StepFailureError("transport-diffusion state became non-finite",
                                   {"t": t})
        t += h
        if on_step is not None:
            on_step(t, ScalarField.from_spectrum(g, f_spec))
    return ScalarField.from_spectrum(g, f_spec)
