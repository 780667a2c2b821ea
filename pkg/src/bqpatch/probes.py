"""Ensemble probes that exercise the a-priori inequalities numerically.

Each probe draws a fixed-seed ensemble of band-limited random fields,
evaluates left and right sides of its target inequality with unit constant,
and reports the ratio statistics.  The same trigonometric polynomial is then
re-evaluated on a doubled grid; the growth factor of the max ratio is the
numerical surrogate for "the constant does not depend on the cutoff".
Band limits sit at or below half the base grid's retained ball so products
remain fully resolved at both resolutions.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .fields import Grid, ScalarField, VectorField2
from .lp import (BesovSpec, TimeNormAccumulator, besov_norm, dyadic_block,
                 directional_derivative, filter_bank, para_vector_field,
                 paraproduct, smoothstep, vector_besov_norm,
                 weak_directional_derivative)
from .diagnostics import grad_linf, grad_u_components
from .solver import SimState, StepperConfig, solve_transport_diffusion, step
from .spectral import (advection_term, dealiased_product, divergence, dx, dy,
                       grad_perp, gradient, velocity_from_vorticity)
from .velocity import VELOCITY_FAMILIES

DEFAULT_ENSEMBLE_SIZE = 64


# ---------------------------------------------------------------------------
# reproducible band-limited random fields
# ---------------------------------------------------------------------------

def _half_lattice(kmax):
    """Integer modes with my > 0 or (my == 0 and mx > 0), |m| <= kmax."""
    modes = []
    km = int(np.floor(kmax))
    for mx in range(-km, km + 1):
        for my in range(0, km + 1):
            if my == 0 and mx <= 0:
                continue
            if np.hypot(mx, my) <= kmax:
                modes.append((mx, my))
    return modes


def random_coefficients(seed, sample, slot, kmax, alpha, kmin=1):
    """Deterministic complex coefficients over the half lattice.

    Gaussian draws scaled by |m|^-alpha and normalized so sum |c_m| = 1,
    which keeps sup-norms O(1) independently of the grid.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sample, slot)))
    modes = [m for m in _half_lattice(kmax) if np.hypot(*m) >= kmin]
    z = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    amps = np.array([np.hypot(*m) ** (-alpha) for m in modes])
    c = z * amps
    c /= np.abs(c).sum()
    return modes, c


def field_from_coefficients(grid, modes, coeffs):
    """Real field sum_m c_m e^{i m.x} + c.c. sampled on the grid."""
    n = grid.n
    spec = np.zeros((n, n), dtype=complex)
    for (mx, my), c in zip(modes, coeffs):
        spec[mx % n, my % n] += c
        spec[(-mx) % n, (-my) % n] += np.conj(c)
    return ScalarField.from_spectrum(grid, spec * n * n)


def random_field(grid, seed, sample, slot, kmax, alpha, kmin=1):
    modes, c = random_coefficients(seed, sample, slot, kmax, alpha, kmin)
    return field_from_coefficients(grid, modes, c)


def random_solenoidal(grid, seed, sample, slot, kmax, alpha):
    """grad-perp of a random stream function: exactly divergence-free."""
    psi = random_field(grid, seed, sample, slot, kmax, alpha)
    return grad_perp(psi)


def random_vector(grid, seed, sample, slot, kmax, alpha):
    return VectorField2(random_field(grid, seed, sample, 10 * slot, kmax, alpha),
                        random_field(grid, seed, sample, 10 * slot + 1, kmax, alpha))


# ---------------------------------------------------------------------------
# report container
# ---------------------------------------------------------------------------

@dataclass
class ProbeReport:
    probe_id: str
    ensemble_size: int
    base_n: int
    ratios: list
    ratios_doubled: list
    degenerate: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def max_ratio(self):
        return float(np.max(self.ratios)) if self.ratios else float("nan")

    @property
    def growth_factor(self):
        if not self.ratios or not self.ratios_doubled:
            return float("nan")
        return float(np.max(self.ratios_doubled) / np.max(self.ratios))

    def percentiles(self, qs=(50, 90, 99)):
        if not self.ratios:
            return {q: float("nan") for q in qs}
        return {q: float(np.percentile(self.ratios, q)) for q in qs}

    def validate(self):
        if any(not np.isfinite(r) for r in self.ratios + self.ratios_doubled):
            raise ArgumentError(f"probe {self.probe_id} produced a non-finite ratio")


# ---------------------------------------------------------------------------
# individual probes: each returns (ratio or None, reason) for one sample
# ---------------------------------------------------------------------------

def _homogeneous_multiplier(grid, m):
    """Symbol |xi|^m cut off smoothly near xi = 0 (exactly homogeneous
    beyond |xi| = 1 on the integer lattice)."""
    r = grid.kmod
    cut = smoothstep((r - 0.5) / 0.5)
    with np.errstate(divide="ignore"):
        a = np.where(r > 0, r, 1.0) ** m
    return a * cut * grid.dealias_mask


def _apply_symbol(f, symbol):
    return ScalarField.from_spectrum(f.grid, symbol * f.spectrum)


def _sample_multiplier_commutator(grid, seed, i, params):
    eps, s, m = params["eps"], params["s"], params["m"]
    kmax = params["kmax"]
    if params.get("constant_g"):
        g_f = ScalarField.constant(grid, 1.0)
    else:
        g_f = random_field(grid, seed, i, 0, kmax, params["alpha_g"])
    u_f = random_field(grid, seed, i, 1, kmax, params["alpha_u"])
    bank = filter_bank(grid)
    symbol = _homogeneous_multiplier(grid, m)
    au = _apply_symbol(u_f, symbol)
    lhs_f = paraproduct(g_f, au, bank) - _apply_symbol(paraproduct(g_f, u_f, bank), symbol)
    lhs = besov_norm(lhs_f, BesovSpec(s - m + eps, np.inf, np.inf), bank)
    gg = gradient(g_f)
    rhs = (max(besov_norm(gg.x_comp, BesovSpec(eps - 1, np.inf, np.inf), bank),
               besov_norm(gg.y_comp, BesovSpec(eps - 1, np.inf, np.inf), bank))
           * besov_norm(u_f, BesovSpec(s, np.inf, np.inf), bank))
    if rhs == 0.0:
        return None, "degenerate: grad g = 0"
    return lhs / rhs, None


def _sample_paravector_remainder(grid, seed, i, params):
    eps, s, p, r = params["eps"], params["s"], params["p"], params["r"]
    kmax = params["kmax"]
    X = random_vector(grid, seed, i, 2, kmax, params["alpha_x"])
    f = random_field(grid, seed, i, 3, kmax, params["alpha_f"])
    bank = filter_bank(grid)
    diff = para_vector_field(X, f, bank) - directional_derivative(X, f)
    target = s + eps - 2.0 / p - 1.0
    lhs = besov_norm(diff, BesovSpec.holder(target), bank)
    gf = gradient(f)
    rhs = (vector_besov_norm(X, BesovSpec.holder(eps), bank)
           * max(besov_norm(gf.x_comp, BesovSpec(s - 1, p, r), bank),
                 besov_norm(gf.y_comp, BesovSpec(s - 1, p, r), bank)))
    if rhs == 0.0:
        return None, "degenerate: zero right side"
    return lhs / rhs, None


def _evolve_pair_for_commutator(grid, seed, i, params):
    """Short viscous run producing (X, v) linked by the transport equation."""
    kmax, alpha = params["kmax"], params["alpha_v"]
    omega0 = random_field(grid, seed, i, 4, kmax, alpha)
    X = random_vector(grid, seed, i, 5, kmax, params["alpha_x"])
    state = SimState.initial(ScalarField.zeros(grid), omega0, nu=params["nu"])
    cfg = StepperConfig(dt=params["dt"], scheme="ifrk3",
                        theta_advection="spectral", x_mode="none",
                        mollifier_cells=0.0)
    from .velocity import GriddedVelocity
    from .lagrangian import evolve_X_eulerian
    for _ in range(params["n_steps"]):
        prev_t, prev_u = state.t, state.u
        state, dt = step(state, cfg)
        vel = GriddedVelocity(prev_t, prev_u, state.t, state.u)
        X = evolve_X_eulerian(X, vel, prev_t, dt, order=3, advection="spectral")
    return X, state.u


def _sample_advective_commutator(grid, seed, i, params):
    eps, p = params["eps"], params["p"]
    bank = filter_bank(grid)
    X, v = _evolve_pair_for_commutator(grid, seed, i, params)

    # dX/dt from the transport equation, then the commutator reduces to
    # T_X(v.grad v) - T_{dX/dt} v - v.grad(T_X v), all at one instant
    def para_vec(Y, f):
        return para_vector_field(Y, f, bank)

    dxv = VectorField2(directional_derivative(X, v.x_comp),
                       directional_derivative(X, v.y_comp))
    adv_x = VectorField2(advection_term(v, X.x_comp), advection_term(v, X.y_comp))
    x_dot = dxv - adv_x

    comps = []
    for comp in (v.x_comp, v.y_comp):
        conv = advection_term(v, comp)
        txv = para_vec(X, comp)
        term = para_vec(X, conv) - para_vec(x_dot, comp) - advection_term(v, txv)
        comps.append(term)
    lhs = max(besov_norm(c, BesovSpec.holder(eps - 2), bank) for c in comps)

    spec_hi = BesovSpec(2.0 / p + 1.0, p, 1.0)
    spec_lo = BesovSpec(2.0 / p - 1.0, p, 1.0)
    x_tilde = (vector_besov_norm(X, BesovSpec.holder(eps), bank)
               + besov_norm(divergence(X), BesovSpec.holder(eps), bank))
    v_hi = max(besov_norm(v.x_comp, spec_hi, bank), besov_norm(v.y_comp, spec_hi, bank))
    v_lo = max(besov_norm(v.x_comp, spec_lo, bank), besov_norm(v.y_comp, spec_lo, bank))
    v_cm1 = max(besov_norm(v.x_comp, BesovSpec.holder(-1.0), bank),
                besov_norm(v.y_comp, BesovSpec.holder(-1.0), bank))
    txv_all = VectorField2(para_vec(X, v.x_comp), para_vec(X, v.y_comp))
    rhs = (x_tilde * v_hi * v_lo
           + v_cm1 * vector_besov_norm(txv_all, BesovSpec.holder(eps), bank)
           + v_hi * vector_besov_norm(txv_all, BesovSpec.holder(eps - 2), bank))
    if rhs == 0.0:
        return None, "degenerate: zero right side"
    return lhs / rhs, None


def _sample_directional_velocity(grid, seed, i, params):
    eps = params["eps"]
    kmax = params["kmax"]
    bank = filter_bank(grid)
    omega = random_field(grid, seed, i, 6, kmax, params["alpha_w"])
    X = random_vector(grid, seed, i, 7, kmax, params["alpha_x"])
    u = velocity_from_vorticity(omega)
    dxu = VectorField2(directional_derivative(X, u.x_comp),
                       directional_derivative(X, u.y_comp))
    lhs = vector_besov_norm(dxu, BesovSpec.holder(eps), bank)
    xw = VectorField2(dealiased_product(X.x_comp, omega),
                      dealiased_product(X.y_comp, omega))
    rhs = (grad_linf(u) * vector_besov_norm(X, BesovSpec.holder(eps), bank)
           + besov_norm(divergence(xw), BesovSpec.holder(eps - 1), bank))
    if rhs == 0.0:
        return None, "degenerate: zero right side"
    return lhs / rhs, None


def _sample_patch_compatibility(grid, seed, i, params):
    eps, q = params["eps"], params["q"]
    kmax = params["kmax"]
    bank = filter_bank(grid)
    omega = random_field(grid, seed, i, 8, kmax, params["alpha_w"])
    theta = random_field(grid, seed, i, 9, kmax, params["alpha_t"])
    X = random_vector(grid, seed, i, 11, kmax, params["alpha_x"])
    x_eps = vector_besov_norm(X, BesovSpec.holder(eps), bank)
    xw = VectorField2(dealiased_product(X.x_comp, omega),
                      dealiased_product(X.y_comp, omega))
    r1_num = besov_norm(divergence(xw), BesovSpec.holder(-3.0), bank)
    r1_den = x_eps * besov_norm(omega, BesovSpec(2.0 / q - 2.0, q, 1.0), bank)
    dxt = weak_directional_derivative(X, theta)
    r2_num = besov_norm(dxt, BesovSpec.holder(-2.0), bank)
    r2_den = x_eps * besov_norm(theta, BesovSpec(2.0 / q - 1.0, q, 1.0), bank)
    if r1_den == 0.0 or r2_den == 0.0:
        return None, "degenerate: zero right side"
    return max(r1_num / r1_den, r2_num / r2_den), None


def _bad(msg):
    raise ArgumentError(msg)


def _check_eps(p):
    if not (0.0 < p["eps"] < 1.0):
        _bad("eps must lie in (0,1)")
    return True


def _check_paravector(p):
    if not (0.0 < p["eps"] < 1.0):
        _bad("eps must lie in (0,1)")
    if not (p["s"] + p["eps"] > 1.0 or (p["s"] + p["eps"] == 1.0 and p["r"] == 1.0)):
        _bad("need s + eps > 1 (or the endpoint with r = 1)")
    if not (p["s"] < 1.0 + 2.0 / p["p"]):
        _bad("need s < 1 + 2/p")
    return True


def _check_advective(p):
    if not (0.0 < p["eps"] < 1.0):
        _bad("eps must lie in (0,1)")
    if not (2.0 / p["p"] + p["eps"] >= 1.0):
        _bad("need 2/p + eps >= 1")
    return True


def _check_compat(p):
    if not (0.0 < p["eps"] < 1.0):
        _bad("eps must lie in (0,1)")
    if not (1.0 < p["q"] < 2.0 / (2.0 - p["eps"])):
        _bad("need q in (1, 2/(2-eps))")
    return True


PROBES = {
    "multiplier_commutator": {
        "sample": _sample_multiplier_commutator,
        "params": {"eps": 0.5, "s": 0.3, "m": 1.0, "alpha_g": 1.5, "alpha_u": 1.0},
        "check": _check_eps,
    },
    "paravector_remainder": {
        "sample": _sample_paravector_remainder,
        "params": {"eps": 0.5, "s": 1.2, "p": 2.0, "r": 1.0,
                   "alpha_x": 1.5, "alpha_f": 1.0},
        "check": _check_paravector,
    },
    "advective_commutator": {
        "sample": _sample_advective_commutator,
        "params": {"eps": 0.5, "p": 2.0, "alpha_x": 1.5, "alpha_v": 2.0,
                   "nu": 0.5, "dt": 2e-3, "n_steps": 4},
        "check": _check_advective,
    },
    "directional_velocity_bound": {
        "sample": _sample_directional_velocity,
        "params": {"eps": 0.5, "alpha_w": 1.0, "alpha_x": 1.5},
        "check": _check_eps,
    },
    "patch_compatibility": {
        "sample": _sample_patch_compatibility,
        "params": {"eps": 0.5, "q": 1.3, "alpha_w": 1.0, "alpha_t": 1.0,
                   "alpha_x": 1.5},
        "check": _check_compat,
    },
}


def inequality_probe(probe_id, seed=20240, size=DEFAULT_ENSEMBLE_SIZE,
                     base_n=256, length=2.0 * np.pi, params=None):
    """Run one ensemble probe at base_n and 2*base_n.

    Raises ArgumentError when the parameter set violates the target
    inequality's hypotheses; degenerate samples are recorded, not dropped
    silently.
    """
    if probe_id not in PROBES:
        raise ArgumentError(
            f"unknown probe {probe_id!r}; choose from {sorted(PROBES)}")
    if size < 32:
        raise ArgumentError("ensemble size must be at least 32")
    meta = PROBES[probe_id]
    p = dict(meta["params"])
    if params:
        p.update(params)
    meta["check"](p)
    p.setdefault("kmax", base_n // 6)

    report = ProbeReport(probe_id=probe_id, ensemble_size=size, base_n=base_n,
                         ratios=[], ratios_doubled=[], params=p)
    for n in (base_n, 2 * base_n):
        grid = Grid(n, length)
        sink = report.ratios if n == base_n else report.ratios_doubled
        for i in range(size):
            ratio, reason = meta["sample"](grid, seed, i, p)
            if ratio is None:
                if n == base_n:
                    report.degenerate.append((i, reason))
                continue
            sink.append(float(ratio))
    report.validate()
    return report


# ---------------------------------------------------------------------------
# transport-diffusion bound sweep
# ---------------------------------------------------------------------------

def _check_td_exponents(s, p, p1, rho, rho1):
    p_conj = p / (p - 1.0) if p != np.inf and p > 1 else (np.inf if p == 1 else 1.0)
    lo = -1.0 - min(2.0 / p1 if p1 != np.inf else 0.0,
                    2.0 / p_conj if p_conj != np.inf else 0.0)
    hi = 1.0 + min(2.0 / p if p != np.inf else 0.0,
                   2.0 / p1 if p1 != np.inf else 0.0)
    if not (lo < s < hi):
        raise ArgumentError(f"regularity s={s} outside the admissible range "
                            f"({lo}, {hi}) for (p, p1)=({p}, {p1})")
    if not rho1 <= rho:
        raise ArgumentError("need rho1 <= rho")


@dataclass
class TransportBoundCase:
    s: float
    p: float
    r: float
    rho: float
    rho1: float = 1.0
    nu: float = 1.0
    family: str = "rotation"
    variant: str = "smoothing"  # or "plain_transport" for the nu = 0 form


def _td_case_ratio(case, grid, seed, t_end, dt, kmax, alpha=1.0):
    bank = filter_bank(grid)
    vel = VELOCITY_FAMILIES[case.family](grid.length)
    f0 = random_field(grid, seed, 0, 20, kmax, alpha)
    if case.variant == "plain_transport":
        lhs_spec = BesovSpec(0.0, case.p, case.r)
        acc = TimeNormAccumulator(bank, lhs_spec, np.inf)
    else:
        acc = TimeNormAccumulator(bank, BesovSpec(case.s + 2.0 / case.rho, case.p, case.r),
                                  case.rho)
    v_hist = {"t": [], "v": []}
    steady_v = {}

    def v_norm(t):
        if getattr(vel, "steady", False) and steady_v:
            return steady_v["val"]
        u = vel.field_at(grid, t)
        val = max(grad_linf(u),
                  max(besov_norm(c, BesovSpec(0.0, np.inf, np.inf), bank)
                      for c in grad_u_components(u)))
        steady_v["val"] = val
        return val

    def on_step(t, f):
        acc.add(t, f)
        v_hist["t"].append(t)
        v_hist["v"].append(v_norm(t))

    solve_transport_diffusion(f0, vel, None, case.nu, t_end, dt,
                              scheme="ifrk3", on_step=on_step)
    tt = np.asarray(v_hist["t"])
    vv = np.asarray(v_hist["v"])
    v_int = float(np.trapezoid(vv, tt))

    if case.variant == "plain_transport":
        lhs = acc.value()
        rhs = besov_norm(f0, BesovSpec(0.0, case.p, case.r), bank) * (1.0 + v_int)
        return lhs / rhs
    inv_rho = 0.0 if case.rho == np.inf else 1.0 / case.rho
    lhs = case.nu**inv_rho * acc.value()
    growth = (1.0 + case.nu * t_end) ** inv_rho
    rhs = (np.exp(growth * v_int)
           * growth * besov_norm(f0, BesovSpec(case.s, case.p, case.r), bank))
    return lhs / rhs


def default_td_sweep():
    cases = []
    for family in ("rotation", "shear", "mixer"):
        for s, p, r, rho in ((0.0, 2.0, 2.0, 1.0), (0.5, np.inf, np.inf, 2.0),
                             (0.0, 2.0, 1.0, np.inf)):
            cases.append(TransportBoundCase(s=s, p=p, r=r, rho=rho, nu=1.0,
                                            family=family))
        cases.append(TransportBoundCase(s=0.0, p=2.0, r=1.0, rho=np.inf,
                                        rho1=1.0, nu=0.0, family=family,
                                        variant="plain_transport"))
    return cases


def trans_diff_bound_probe(cases=None, seed=20240, base_n=64,
                           length=2.0 * np.pi, t_end=0.5, dt=2.5e-3):
    """Evaluate the smoothing/transport bound ratios across a sweep.

    Each case is run at base_n and 2*base_n with the same initial data; the
    growth factor of the max ratio across the sweep is reported.
    """
    cases = cases if cases is not None else default_td_sweep()
    kmax = base_n // 6
    ratios, ratios2 = [], []
    rows = []
    for case in cases:
        if case.variant != "plain_transport" and case.nu == 0.0:
            raise ArgumentError("smoothing bound requires nu > 0")
        _check_td_exponents(case.s, case.p, np.inf, case.rho, case.rho1)
        r1 = _td_case_ratio(case, Grid(base_n, length), seed, t_end, dt, kmax)
        r2 = _td_case_ratio(case, Grid(2 * base_n, length), seed, t_end, dt, kmax)
        ratios.append(r1)
        ratios2.append(r2)
        rows.append((case, r1, r2))
    report = ProbeReport(probe_id="transport_smoothing_bound",
                         ensemble_size=len(cases), base_n=base_n,
                         ratios=ratios, ratios_doubled=ratios2,
                         params={"t_end": t_end, "dt": dt})
    report.validate()
    return report, rows
