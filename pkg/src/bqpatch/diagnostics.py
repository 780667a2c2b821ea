"""Conservation checks and striated-regularity time series.

The energy ledger accumulates the balance

    R(t) = ||u(t)||_L2^2 + 2 nu int_0^t ||grad u||_L2^2
           - ||u0||_L2^2 - 2 int_0^t int b u2 dx

with trapezoid quadrature at record cadence, where b is the buoyancy field
actually forcing the momentum (mollified theta in patch runs, theta itself
otherwise).  The striated tracker evaluates every named dyadic norm plus the
running quantities Z and W.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .fields import ScalarField, VectorField2
from .lp import (BesovSpec, besov_from_blocks, besov_norm, block_lp_norms,
                 directional_derivative, filter_bank, vector_besov_norm,
                 weak_directional_derivative)
from .solver import buoyancy_field
from .spectral import dealiased_product, divergence, gradient


def check_striated_exponents(eps, q):
    """Admissibility of (eps, q): eps in (0,1) and eps/2 + 1/q > 1."""
    if not (0.0 < eps < 1.0):
        raise ArgumentError(f"striation exponent eps={eps} outside (0, 1)")
    if not (q > 1.0):
        raise ArgumentError(f"integrability exponent q={q} must exceed 1")
    if not (eps / 2.0 + 1.0 / q > 1.0):
        raise ArgumentError(
            f"(eps, q)=({eps}, {q}) violates the constraint eps/2 + 1/q > 1")


def grad_u_components(u):
    g = gradient(u.x_comp)
    h = gradient(u.y_comp)
    return (g.x_comp, g.y_comp, h.x_comp, h.y_comp)


def grad_linf(u):
    return max(np.abs(c.values).max() for c in grad_u_components(u))


def grad_l2_sq(u):
    return sum(c.l2_norm() ** 2 for c in grad_u_components(u))


@dataclass
class DiagnosticsRecord:
    t: float
    energy_eq_residual: float
    l2_u: float
    grad_u_l2_sq: float
    theta_l1: float
    theta_l2: float
    theta_linf: float
    v_integral: float  # int_0^t ||grad u||_Linf
    norms: dict = field(default_factory=dict)

    def validate(self):
        for name, v in self.norms.items():
            if not np.isfinite(v) or v < -1e-12:
                raise ArgumentError(f"norm {name} is not a finite nonnegative value")


class EnergyLedger:
    """Trapezoid-accumulated energy balance along a trajectory."""

    def __init__(self, mollifier_cells=0.0):
        self.mollifier_cells = mollifier_cells
        self._last = None
        self.visc_integral = 0.0
        self.work_integral = 0.0
        self.v_integral = 0.0
        self.u0_sq = None

    def update(self, state):
        l2u_sq = state.u.x_comp.l2_norm() ** 2 + state.u.y_comp.l2_norm() ** 2
        gsq = grad_l2_sq(state.u)
        b = buoyancy_field(state.theta, self.mollifier_cells)
        work = (b * state.u.y_comp).integral()
        glinf = grad_linf(state.u)
        if self.u0_sq is None:
            self.u0_sq = l2u_sq
        if self._last is not None:
            t0, gsq0, work0, glinf0 = self._last
            dt = state.t - t0
            self.visc_integral += 0.5 * dt * (gsq0 + gsq)
            self.work_integral += 0.5 * dt * (work0 + work)
            self.v_integral += 0.5 * dt * (glinf0 + glinf)
        self._last = (state.t, gsq, work, glinf)
        return l2u_sq, gsq, glinf

    def residual(self, state, nu, l2u_sq=None):
        if self.u0_sq is None:
            raise ArgumentError("ledger has no history")
        if l2u_sq is None:
            l2u_sq = state.u.x_comp.l2_norm() ** 2 + state.u.y_comp.l2_norm() ** 2
        return (l2u_sq + 2.0 * nu * self.visc_integral
                - self.u0_sq - 2.0 * self.work_integral)


def energy_equality_residual(times, l2u_sq, grad_sq, work, nu):
    """Residual series from stored step data (trapezoid in time)."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise ArgumentError("need at least two stored states")
    visc = np.concatenate([[0.0], np.cumsum(
        0.5 * np.diff(times) * (np.asarray(grad_sq)[1:] + np.asarray(grad_sq)[:-1]))])
    wk = np.concatenate([[0.0], np.cumsum(
        0.5 * np.diff(times) * (np.asarray(work)[1:] + np.asarray(work)[:-1]))])
    l2 = np.asarray(l2u_sq, dtype=float)
    return l2 + 2.0 * nu * visc - l2[0] - 2.0 * wk


class StriatedTracker:
    """Named dyadic norms of (X, omega, theta) plus running Z and W.

    Z(t) = sup_{t' <= t} ||X||_{C^eps} + sup_{t' <= t} ||div(X w)||_{C^{eps-3}};
    W(t) = int_0^t ||grad u||_{B^{2/q}_{q,1}} + int_0^t (||w||_{B^{2/q}_{q,1}}
           + ||theta||_{B^{2/q-1}_{q,1}}).

    Feed ``step_update`` with every state (running sups and trapezoid
    integrals at step cadence); ``evaluate`` additionally returns the full
    named-norm map for a record row.
    """

    def __init__(self, grid, eps, q):
        check_striated_exponents(eps, q)
        self.eps = eps
        self.q = q
        self.bank = filter_bank(grid)
        self.spec_lo = BesovSpec(2.0 / q - 2.0, q, 1.0)
        self.spec_hi = BesovSpec(2.0 / q, q, 1.0)
        self.spec_th = BesovSpec(2.0 / q - 1.0, q, 1.0)
        self.x_sup = 0.0
        self.divxw_sup = 0.0
        self.u_q_integral = 0.0
        self.w_extra_integral = 0.0
        self._last = None

    def _div_xw(self, state):
        X = state.X
        xw = VectorField2(dealiased_product(X.x_comp, state.omega),
                          dealiased_product(X.y_comp, state.omega))
        return divergence(xw)

    def step_update(self, state):
        """Advance the running sups and time integrals by one state.

        Returns the step quantities reused by ``evaluate`` when a record is
        due at the same state.
        """
        eps, q = self.eps, self.q
        bank = self.bank
        out = {}
        if state.X is not None:
            x_blocks_inf = [block_lp_norms(c, np.inf, bank)
                            for c in (state.X.x_comp, state.X.y_comp)]
            out["x_ceps"] = max(besov_from_blocks(b, BesovSpec.holder(eps), bank)
                                for b in x_blocks_inf)
            div_xw = self._div_xw(state)
            dxw_blocks = block_lp_norms(div_xw, np.inf, bank)
            out["div_xw_ceps_m1"] = besov_from_blocks(
                dxw_blocks, BesovSpec.holder(eps - 1), bank)
            out["div_xw_ceps_m3"] = besov_from_blocks(
                dxw_blocks, BesovSpec.holder(eps - 3), bank)
        else:
            out["x_ceps"] = 0.0
            out["div_xw_ceps_m1"] = 0.0
            out["div_xw_ceps_m3"] = 0.0

        omega_blocks_q = block_lp_norms(state.omega, q, bank)
        out["omega_b_lo"] = besov_from_blocks(omega_blocks_q, self.spec_lo, bank)
        out["omega_b_hi"] = besov_from_blocks(omega_blocks_q, self.spec_hi, bank)
        out["theta_b"] = besov_norm(state.theta, self.spec_th, bank)
        out["grad_u_b_q"] = max(besov_norm(c, self.spec_hi, bank)
                                for c in grad_u_components(state.u))

        self.x_sup = max(self.x_sup, out["x_ceps"])
        self.divxw_sup = max(self.divxw_sup, out["div_xw_ceps_m3"])
        extra = out["omega_b_hi"] + out["theta_b"]
        if self._last is not None:
            t0, gq0, ex0 = self._last
            dt = state.t - t0
            self.u_q_integral += 0.5 * dt * (gq0 + out["grad_u_b_q"])
            self.w_extra_integral += 0.5 * dt * (ex0 + extra)
        self._last = (state.t, out["grad_u_b_q"], extra)
        return out

    def evaluate(self, state, step_norms=None):
        """Full named-norm map for a record row (advances the running
        quantities unless ``step_norms`` from the same state is supplied)."""
        eps = self.eps
        bank = self.bank
        norms = dict(step_norms) if step_norms is not None else self.step_update(state)
        if state.X is not None:
            dxt = weak_directional_derivative(state.X, state.theta)
            norms["dx_theta_ceps_m2"] = besov_norm(dxt, BesovSpec.holder(eps - 2), bank)
            dxu = VectorField2(directional_derivative(state.X, state.u.x_comp),
                               directional_derivative(state.X, state.u.y_comp))
            norms["dx_u_ceps"] = vector_besov_norm(dxu, BesovSpec.holder(eps), bank)
        else:
            norms["dx_theta_ceps_m2"] = 0.0
            norms["dx_u_ceps"] = 0.0
        norms["z"] = self.x_sup + self.divxw_sup
        norms["u_q"] = self.u_q_integral
        norms["w"] = self.u_q_integral + self.w_extra_integral
        return norms


def initial_compatibility(theta0, omega0, X0, eps, q):
    """The t = 0 compatibility quantities of the striated setup."""
    check_striated_exponents(eps, q)
    bank = filter_bank(theta0.grid)
    dxt = weak_directional_derivative(X0, theta0)
    xw = VectorField2(dealiased_product(X0.x_comp, omega0),
                      dealiased_product(X0.y_comp, omega0))
    div_xw = divergence(xw)
    return {
        "dx_theta0_ceps_m2": besov_norm(dxt, BesovSpec.holder(eps - 2), bank),
        "dx_theta0_cm2": besov_norm(dxt, BesovSpec.holder(-2.0), bank),
        "div_x0w0_ceps_m3": besov_norm(div_xw, BesovSpec.holder(eps - 3), bank),
        "div_x0w0_cm3": besov_norm(div_xw, BesovSpec.holder(-3.0), bank),
        "x0_ceps": vector_besov_norm(X0, BesovSpec.holder(eps), bank),
        "omega0_b_lo": besov_norm(omega0, BesovSpec(2.0 / q - 2.0, q, 1.0), bank),
        "theta0_b": besov_norm(theta0, BesovSpec(2.0 / q - 1.0, q, 1.0), bank),
    }
