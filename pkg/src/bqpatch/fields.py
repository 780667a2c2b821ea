"""Periodic grid and field containers with paired Fourier representation.

All fields live on a uniform n-by-n grid over the box [0, L)^2 with points
x_i = i*h, h = L/n.  Arrays are indexed values[ix, iy], i.e. the first axis
runs along x.  Spectra use the unnormalized numpy FFT convention and satisfy
Hermitian symmetry because the sample values are real.
"""

import os

import numpy as np
import scipy.fft

from .errors import FieldDataError


def fft_workers():
    """Worker count for FFT calls, capped by the BQP_THREADS env var (default 1)."""
    try:
        return max(1, int(os.environ.get("BQP_THREADS", "1")))
    except ValueError:
        return 1


class Grid:
    """Uniform periodic grid with cached wavenumber tables.

    Parameters
    ----------
    n : int
        Points per axis; must be a power of two, at least 16.
    length : float
        Box side length L (default 2*pi).
    dealias_fraction : float
        Radial spectral cutoff as a fraction of the Nyquist index (default 2/3).
        Modes with |k|*L/(2*pi) > dealias_fraction*n/2 are discarded after
        every nonlinear product.
    """

    def __init__(self, n, length=2.0 * np.pi, dealias_fraction=2.0 / 3.0):
        if n < 16 or (n & (n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 16, got {n}")
        if length <= 0:
            raise ValueError("box length must be positive")
        self.n = int(n)
        self.length = float(length)
        self.h = self.length / self.n
        self.dealias_fraction = float(dealias_fraction)

        idx = np.fft.fftfreq(self.n, d=1.0 / self.n)  # integer mode indices
        scale = 2.0 * np.pi / self.length
        self.kx = (scale * idx)[:, None] * np.ones((1, self.n))
        self.ky = (scale * idx)[None, :] * np.ones((self.n, 1))
        self.k2 = self.kx**2 + self.ky**2
        self.inv_k2 = np.zeros_like(self.k2)
        nz = self.k2 > 0
        self.inv_k2[nz] = 1.0 / self.k2[nz]

        # |k| in units of 2*pi/L, i.e. on the integer lattice
        self.kmod = np.hypot(idx[:, None], idx[None, :])
        self.kcut = self.dealias_fraction * self.n / 2.0
        self.dealias_mask = self.kmod <= self.kcut
        self.ikx_masked = 1j * self.kx * self.dealias_mask
        self.iky_masked = 1j * self.ky * self.dealias_mask

        coords = self.h * np.arange(self.n)
        self.x = coords[:, None] * np.ones((1, self.n))
        self.y = coords[None, :] * np.ones((self.n, 1))

        for arr in (self.kx, self.ky, self.k2, self.inv_k2, self.kmod,
                    self.dealias_mask, self.ikx_masked, self.iky_masked,
                    self.x, self.y):
            arr.flags.writeable = False

    def __eq__(self, other):
        return (isinstance(other, Grid) and other.n == self.n
                and other.length == self.length
                and other.dealias_fraction == self.dealias_fraction)

    def __hash__(self):
        return hash((self.n, self.length, self.dealias_fraction))

    def __repr__(self):
        return f"Grid(n={self.n}, length={self.length:g})"


def _check_finite(values, what="field"):
    if not np.all(np.isfinite(values)):
        raise FieldDataError(f"{what} contains non-finite values")


class ScalarField:
    """Real scalar samples on a Grid plus a lazily cached spectrum.

    Instances are value-like: the sample array is frozen on construction and
    every operation returns a new field.  The spectrum cache is computed on
    first access; with the single-threaded default this needs no locking.
    """

    __slots__ = ("grid", "values", "_spec", "_spline")

    def __init__(self, grid, values, spectrum=None, check=True):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise FieldDataError(f"expected shape {(grid.n, grid.n)}, got {values.shape}")
        if check:
            _check_finite(values)
        if values.flags.writeable:
            values = values.copy()
            values.flags.writeable = False
        self.grid = grid
        self.values = values
        self._spec = spectrum
        self._spline = None

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(grid.x, grid.y))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n, grid.n)), check=False)

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full((grid.n, grid.n), float(c)), check=False)

    @classmethod
    def from_spectrum(cls, grid, spec):
        values = scipy.fft.ifft2(spec, workers=fft_workers()).real
        f = cls(grid, values, check=False)
        f._spec = np.array(spec, copy=True)
        f._spec.flags.writeable = False
        return f

    @property
    def spectrum(self):
        if self._spec is None:
            spec = scipy.fft.fft2(self.values, workers=fft_workers())
            spec.flags.writeable = False
            self._spec = spec
        return self._spec

    def dealiased(self):
        """Project onto the retained spectral ball (idempotent)."""
        return ScalarField.from_spectrum(self.grid, self.spectrum * self.grid.dealias_mask)

    def require_finite(self, what="field"):
        _check_finite(self.values, what)
        return self

    # quadrature norms on the uniform grid
    def integral(self):
        return self.grid.h**2 * float(self.values.sum())

    def mean(self):
        return float(self.values.mean())

    def lp_norm(self, p):
        if p == np.inf:
            return float(np.abs(self.values).max())
        return float((self.grid.h**2 * (np.abs(self.values) ** p).sum()) ** (1.0 / p))

    def l2_norm(self):
        return self.lp_norm(2)

    # value-like arithmetic; products are NOT auto-dealiased
    def _wrap(self, values):
        return ScalarField(self.grid, values, check=False)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return self._wrap(self.values + other.values)
        return self._wrap(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return self._wrap(self.values - other.values)
        return self._wrap(self.values - other)

    def __rsub__(self, other):
        return self._wrap(other - self.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return self._wrap(self.values * other.values)
        return self._wrap(self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)

    def __repr__(self):
        return f"ScalarField(n={self.grid.n}, max|f|={np.abs(self.values).max():.3e})"


class VectorField2:
    """Pair of scalar components sharing one grid."""

    __slots__ = ("x_comp", "y_comp")

    def __init__(self, x_comp, y_comp):
        if x_comp.grid != y_comp.grid:
            raise FieldDataError("vector components must share a grid")
        self.x_comp = x_comp
        self.y_comp = y_comp

    @classmethod
    def zeros(cls, grid):
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid))

    @classmethod
    def from_functions(cls, grid, fx, fy):
        return cls(ScalarField.from_function(grid, fx), ScalarField.from_function(grid, fy))

    @property
    def grid(self):
        return self.x_comp.grid

    def max_norm(self):
        return float(np.hypot(self.x_comp.values, self.y_comp.values).max())

    def dealiased(self):
        return VectorField2(self.x_comp.dealiased(), self.y_comp.dealiased())

    def __add__(self, other):
        return VectorField2(self.x_comp + other.x_comp, self.y_comp + other.y_comp)

    def __sub__(self, other):
        return VectorField2(self.x_comp - other.x_comp, self.y_comp - other.y_comp)

    def __mul__(self, a):
        return VectorField2(self.x_comp * a, self.y_comp * a)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField2(-self.x_comp, -self.y_comp)

    def __repr__(self):
        return f"VectorField2(n={self.grid.n}, max|v|={self.max_norm():.3e})"
