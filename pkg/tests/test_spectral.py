import numpy as np
import pytest

from bqpatch.errors import FieldDataError, MeanRemovalWarning
from bqpatch.fields import Grid, ScalarField, VectorField2
from bqpatch.spectral import (biot_savart, curl, divergence, gradient,
                              grad_perp, heat_multiplier, laplacian,
                              leray_project, recover_pressure,
                              velocity_from_vorticity)

from conftest import band_limited


class TestGrid:
    def test_power_of_two_required(self):
        for bad in (15, 17, 24, 8):
            with pytest.raises(ValueError):
                Grid(bad)

    def test_positive_length(self):
        with pytest.raises(ValueError):
            Grid(32, length=-1.0)

    def test_wavenumber_layout(self):
        g = Grid(32, length=2 * np.pi)
        assert g.kx[1, 0] == pytest.approx(1.0)
        assert g.kx[16, 0] == pytest.approx(-16.0)
        assert g.ky[0, 31] == pytest.approx(-1.0)


class TestTransforms:
    def test_roundtrip(self, grid64):
        f = band_limited(grid64, 1, kmax=grid64.kcut)
        back = ScalarField.from_spectrum(grid64, f.spectrum)
        err = np.abs(back.values - f.values).max()
        assert err <= 1e-12 * np.abs(f.values).max()

    def test_hermitian_symmetry(self, grid64):
        f = band_limited(grid64, 2)
        spec = f.spectrum
        flipped = np.conj(spec[(-np.arange(64)) % 64][:, (-np.arange(64)) % 64])
        assert np.abs(spec - flipped).max() <= 1e-9 * np.abs(spec).max()

    def test_dealias_idempotent(self, grid64):
        f = band_limited(grid64, 3, kmax=grid64.n / 2)
        once = f.dealiased()
        twice = once.dealiased()
        assert np.array_equal(once.values, twice.values)

    def test_nonfinite_rejected(self, grid64):
        vals = np.zeros((64, 64))
        vals[3, 5] = np.nan
        with pytest.raises(FieldDataError):
            ScalarField(grid64, vals)


class TestGradient:
    def test_constant(self, grid64):
        f = ScalarField.constant(grid64, 4.2)
        grad = gradient(f)
        assert np.abs(grad.x_comp.values).max() == 0.0
        assert np.abs(grad.y_comp.values).max() == 0.0

    def test_single_mode(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: np.sin(x))
        grad = gradient(f)
        assert np.abs(grad.x_comp.values - np.cos(grid64.x)).max() <= 1e-12
        assert np.abs(grad.y_comp.values).max() <= 1e-12

    def test_mixed_partials_commute(self, grid64):
        f = band_limited(grid64, 4)
        gx = gradient(f).x_comp
        gy = gradient(f).y_comp
        dxy = gradient(gx).y_comp
        dyx = gradient(gy).x_comp
        assert np.abs(dxy.values - dyx.values).max() <= 1e-12 * max(
            1.0, np.abs(dxy.values).max())


class TestBiotSavart:
    def test_zero(self, grid64):
        u = biot_savart(ScalarField.zeros(grid64))
        assert u.max_norm() == 0.0

    def test_single_mode_closed_form(self, grid64):
        # stream function psi with Lap psi = -sin(x)sin(y) gives psi = sin x sin y / 2
        w = ScalarField.from_function(grid64, lambda x, y: np.sin(x) * np.sin(y))
        u = biot_savart(w)
        ux = 0.5 * np.sin(grid64.x) * np.cos(grid64.y)
        uy = -0.5 * np.cos(grid64.x) * np.sin(grid64.y)
        assert np.abs(u.x_comp.values - ux).max() <= 1e-12
        assert np.abs(u.y_comp.values - uy).max() <= 1e-12

    def test_right_inverse(self, grid128):
        w = band_limited(grid128, 5).dealiased()
        u = biot_savart(w)
        err = np.abs(curl(u).values - w.values).max()
        assert err <= 1e-10 * np.abs(w.values).max()

    def test_divergence_free(self, grid128):
        w = band_limited(grid128, 6)
        u = biot_savart(w)
        grad_scale = max(np.abs(gradient(u.x_comp).x_comp.values).max(),
                         np.abs(gradient(u.y_comp).y_comp.values).max())
        assert np.abs(divergence(u).values).max() <= 1e-10 * grad_scale

    def test_mean_removed_with_warning(self, grid64):
        w = band_limited(grid64, 7) + 0.5
        with pytest.warns(MeanRemovalWarning):
            u = velocity_from_vorticity(w)
        # output is unaffected by the constant offset
        u2 = velocity_from_vorticity(band_limited(grid64, 7))
        assert np.abs(u.x_comp.values - u2.x_comp.values).max() <= 1e-13

    def test_grad_perp_is_solenoidal(self, grid64):
        f = band_limited(grid64, 8)
        X = grad_perp(f)
        assert np.abs(divergence(X).values).max() <= 1e-11 * max(
            1.0, X.max_norm())


class TestHeatMultiplier:
    def test_zero_time_identity(self, grid64):
        f = band_limited(grid64, 9)
        out = heat_multiplier(f, 1.0, 0.0)
        assert np.array_equal(out.values, f.values)

    def test_single_mode_decay(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: np.cos(x))
        out = heat_multiplier(f, 1.0, 0.5)
        expected = np.exp(-0.5) * np.cos(grid64.x)
        assert np.abs(out.values - expected).max() <= 1e-14

    def test_semigroup_composition(self, grid64):
        f = band_limited(grid64, 10)
        a = heat_multiplier(heat_multiplier(f, 0.7, 0.3), 0.7, 0.2)
        b = heat_multiplier(f, 0.7, 0.5)
        assert np.abs(a.values - b.values).max() <= 1e-13

    def test_negative_arguments_rejected(self, grid64):
        f = ScalarField.zeros(grid64)
        with pytest.raises(ValueError):
            heat_multiplier(f, -1.0, 0.1)
        with pytest.raises(ValueError):
            heat_multiplier(f, 1.0, -0.1)


class TestPressure:
    def test_zero(self, grid64):
        p = recover_pressure(VectorField2.zeros(grid64), ScalarField.zeros(grid64))
        assert np.abs(p.values).max() == 0.0

    def test_hydrostatic_balance(self, grid64):
        # u = 0, theta = sin(y): d2 P = sin(y), so P = -cos(y) with zero mean
        theta = ScalarField.from_function(grid64, lambda x, y: np.sin(y))
        p = recover_pressure(VectorField2.zeros(grid64), theta)
        assert np.abs(p.values - (-np.cos(grid64.y))).max() <= 1e-12

    def test_gradient_annihilated_by_leray(self, grid128):
        w = band_limited(grid128, 11)
        u = biot_savart(w)
        p = recover_pressure(u, ScalarField.zeros(grid128))
        gp = gradient(p)
        proj = leray_project(gp)
        assert proj.max_norm() <= 1e-10 * max(1.0, gp.max_norm())

    def test_laplacian_consistency(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: np.sin(2 * x) * np.cos(y))
        lap = laplacian(f)
        assert np.abs(lap.values - (-5.0) * f.values).max() <= 1e-11
