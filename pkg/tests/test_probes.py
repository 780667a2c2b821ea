import numpy as np
import pytest

from bqpatch.errors import ArgumentError
from bqpatch.fields import Grid, ScalarField, VectorField2
from bqpatch.lp import (BesovSpec, TimeNormAccumulator, besov_norm,
                        directional_derivative, filter_bank,
                        para_vector_field)
from bqpatch.probes import (TransportBoundCase, field_from_coefficients,
                            inequality_probe, random_coefficients,
                            random_field, trans_diff_bound_probe)
from bqpatch.solver import solve_transport_diffusion
from bqpatch.velocity import steady


class TestEnsembleFields:
    def test_reproducible_coefficients(self):
        m1, c1 = random_coefficients(7, 3, 0, kmax=8, alpha=1.0)
        m2, c2 = random_coefficients(7, 3, 0, kmax=8, alpha=1.0)
        assert m1 == m2
        assert np.array_equal(c1, c2)
        _, c3 = random_coefficients(7, 4, 0, kmax=8, alpha=1.0)
        assert not np.array_equal(c1, c3)

    def test_same_function_across_resolutions(self):
        modes, coeffs = random_coefficients(11, 0, 0, kmax=8, alpha=1.5)
        f64 = field_from_coefficients(Grid(64), modes, coeffs)
        f128 = field_from_coefficients(Grid(128), modes, coeffs)
        # every second sample of the finer grid sits on the coarse grid
        assert np.abs(f128.values[::2, ::2] - f64.values).max() <= 1e-12

    def test_mean_free(self):
        f = random_field(Grid(64), 5, 0, 0, kmax=10, alpha=1.0)
        assert abs(f.mean()) <= 1e-15


class TestProbeGate:
    def test_unknown_probe(self):
        with pytest.raises(ArgumentError, match="unknown probe"):
            inequality_probe("nonexistent")

    def test_minimum_ensemble(self):
        with pytest.raises(ArgumentError, match="at least 32"):
            inequality_probe("directional_velocity_bound", size=8)

    def test_hypothesis_violations_named(self):
        with pytest.raises(ArgumentError, match="s \\+ eps"):
            inequality_probe("paravector_remainder", params={"s": 0.3, "r": 2.0})
        with pytest.raises(ArgumentError, match="2/p \\+ eps"):
            inequality_probe("advective_commutator", params={"p": 20.0, "eps": 0.5})
        with pytest.raises(ArgumentError, match="q in"):
            inequality_probe("patch_compatibility", params={"q": 1.5})
        with pytest.raises(ArgumentError, match="eps"):
            inequality_probe("directional_velocity_bound", params={"eps": 1.4})


class TestDegenerateSamples:
    def test_constant_g_recorded(self):
        report = inequality_probe("multiplier_commutator", size=32, base_n=64,
                                  params={"constant_g": True})
        assert len(report.degenerate) == 32
        assert all("degenerate" in reason for _, reason in report.degenerate)
        assert report.ratios == []

    def test_constant_x_ratio_below_ensemble_max(self):
        # Lemma-style check: constant X leaves only discarded low blocks in
        # the paravector/directional difference; its ratio sits inside the
        # random-ensemble envelope
        grid = Grid(64)
        bank = filter_bank(grid)
        eps, s, p, r = 0.5, 1.2, 2.0, 1.0
        X = VectorField2(ScalarField.constant(grid, 1.0),
                         ScalarField.constant(grid, -0.5))
        f = random_field(grid, 3, 1, 3, kmax=grid.n // 6, alpha=1.0)
        diff = para_vector_field(X, f, bank) - directional_derivative(X, f)
        lhs = besov_norm(diff, BesovSpec.holder(s + eps - 2.0 / p - 1.0), bank)
        from bqpatch.spectral import gradient
        gf = gradient(f)
        rhs = (max(abs(1.0), abs(-0.5))
               * max(besov_norm(gf.x_comp, BesovSpec(s - 1, p, r), bank),
                     besov_norm(gf.y_comp, BesovSpec(s - 1, p, r), bank)))
        report = inequality_probe("paravector_remainder", size=32, base_n=64)
        assert lhs / rhs <= max(report.max_ratio, 1.0) * 5.0


class TestTransportBounds:
    def test_inadmissible_exponents(self):
        bad = TransportBoundCase(s=1.5, p=2.0, r=2.0, rho=1.0)
        with pytest.raises(ArgumentError, match="admissible range"):
            trans_diff_bound_probe([bad], base_n=32, t_end=0.05, dt=5e-3)
        bad2 = TransportBoundCase(s=0.0, p=2.0, r=2.0, rho=1.0, rho1=2.0)
        with pytest.raises(ArgumentError, match="rho1"):
            trans_diff_bound_probe([bad2], base_n=32, t_end=0.05, dt=5e-3)

    def test_heat_tilde_norm_closed_form(self):
        # v = 0, g = 0, single mode k0: every block norm decays exactly like
        # exp(-nu k0^2 t), so the rho = 1 tilde norm has a closed form
        grid = Grid(32)
        bank = filter_bank(grid)
        nu, k0, t_end = 1.0, 2.0, 0.5
        f0 = ScalarField.from_function(grid, lambda x, y: np.cos(k0 * x))
        spec = BesovSpec(0.5 + 2.0, np.inf, np.inf)
        acc = TimeNormAccumulator(bank, spec, rho=1.0)
        solve_transport_diffusion(f0, steady(VectorField2.zeros(grid)), None,
                                  nu, t_end, 5e-5, scheme="ifrk3",
                                  on_step=acc.add)
        time_factor = (1.0 - np.exp(-nu * k0**2 * t_end)) / (nu * k0**2)
        js = np.arange(-1, bank.j_max + 1, dtype=float)
        block0 = np.array([np.abs(bank.block(f0, j).values).max()
                           for j in bank.block_indices])
        expected = ((2.0 ** (js * spec.s)) * block0 * time_factor).max()
        assert acc.value() == pytest.approx(expected, rel=1e-8)

    def test_t0_limit_ratio(self):
        # a vanishing window reduces both sides to the initial-data norm
        case = TransportBoundCase(s=0.0, p=2.0, r=1.0, rho=np.inf, nu=0.0,
                                  family="shear", variant="plain_transport")
        report, rows = trans_diff_bound_probe([case], base_n=32,
                                              t_end=1e-6, dt=1e-6)
        assert rows[0][1] == pytest.approx(1.0, abs=1e-4)

    def test_degenerate_smoothing_requires_viscosity(self):
        bad = TransportBoundCase(s=0.0, p=2.0, r=2.0, rho=1.0, nu=0.0)
        with pytest.raises(ArgumentError, match="nu > 0"):
            trans_diff_bound_probe([bad], base_n=32, t_end=0.05, dt=5e-3)
