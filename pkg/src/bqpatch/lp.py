"""Dyadic frequency decomposition, Besov-type norms, and paraproducts.

The low-pass symbol chi equals 1 for |xi| <= 3/4 and 0 for |xi| >= 4/3 with a
smooth exp(-1/t) transition; the annular symbols are differences
phi_j(xi) = chi(xi/2^{j+1}) - chi(xi/2^j), supported in 3/4*2^j <= |xi| <=
8/3*2^j.  The partition chi + sum_j phi_j telescopes, so it equals 1 exactly
(to roundoff) at every retained wavenumber.  Symbols are evaluated on the
integer lattice |k| * L / (2*pi).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import ArgumentError
from .fields import ScalarField, VectorField2, fft_workers
from .spectral import dx, dy, divergence, gradient, laplacian, dealiased_product


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, exp(-1/t)-based between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def low_pass_profile(r):
    """Radial symbol: 1 on [0, 3/4], 0 beyond 4/3, smooth monotone between."""
    return 1.0 - smoothstep((np.asarray(r, dtype=float) - 0.75) / (4.0 / 3.0 - 0.75))


@dataclass(frozen=True)
class BesovSpec:
    """Exponent triple (s, p, r) of a Besov norm; p = r = inf gives Holder."""

    s: float
    p: float
    r: float

    def __post_init__(self):
        if not np.isfinite(self.s):
            raise ArgumentError("regularity index must be finite")
        for name, v in (("p", self.p), ("r", self.r)):
            if not (v >= 1):
                raise ArgumentError(f"exponent {name} must lie in [1, inf]")

    @classmethod
    def holder(cls, s):
        return cls(s, np.inf, np.inf)


class DyadicFilterBank:
    """Frequency-block filters for one grid, shared and immutable.

    Blocks run from j = -1 (low pass) to j_max, the largest index whose
    annulus meets the retained spectral ball; the top one or two blocks are
    only partially resolved.  ``j_full`` is the largest index whose annulus
    lies entirely inside the cutoff.  N0 is the paraproduct lag.
    """

    def __init__(self, grid, n0=4):
        if n0 < 2:
            raise ArgumentError("paraproduct lag N0 must be >= 2")
        self.grid = grid
        self.n0 = int(n0)
        kcut = grid.kcut
        self.j_max = int(np.floor(np.log2(4.0 / 3.0 * kcut)))
        self.j_full = int(np.floor(np.log2(3.0 / 8.0 * kcut)))

        r = grid.kmod
        mask = grid.dealias_mask
        self.chi = low_pass_profile(r) * mask
        self.phi = [
            (low_pass_profile(r / 2.0 ** (j + 1)) - low_pass_profile(r / 2.0**j)) * mask
            for j in range(self.j_max + 1)
        ]
        for arr in self.phi:
            arr.flags.writeable = False
        self.chi.flags.writeable = False
        self._half = None

    @property
    def block_indices(self):
        return range(-1, self.j_max + 1)

    def symbol(self, j):
        if j == -1:
            return self.chi
        if 0 <= j <= self.j_max:
            return self.phi[j]
        raise ArgumentError(f"block index {j} outside [-1, {self.j_max}]")

    def low_cut_symbol(self, m):
        """Symbol of S_m = sum_{j <= m-1} Delta_j; zero for m < 0."""
        if m < 0:
            return np.zeros_like(self.chi)
        return low_pass_profile(self.grid.kmod / 2.0**m) * self.grid.dealias_mask

    def partition_defect(self):
        """max |chi + sum phi_j - 1| over retained wavenumbers."""
        total = self.chi.copy()
        for p in self.phi:
            total = total + p
        return float(np.abs(total - 1.0)[self.grid.dealias_mask].max())

    def block(self, f, j):
        """The filtered field Delta_j f."""
        return ScalarField.from_spectrum(self.grid, self.symbol(j) * f.spectrum)

    def _half_symbols(self):
        # symbols restricted to the rfft half-spectrum, stacked low-pass first
        if self._half is None:
            m = self.grid.n // 2 + 1
            stack = np.empty((self.j_max + 2, self.grid.n, m))
            stack[0] = self.chi[:, :m]
            for j in range(self.j_max + 1):
                stack[j + 1] = self.phi[j][:, :m]
            stack.flags.writeable = False
            self._half = stack
        return self._half

    def block_values(self, f):
        """All block sample arrays at once, shape (j_max+2, n, n).

        Real-input transforms: one rfft2 plus one batched irfft2.
        """
        n = self.grid.n
        half = scipy.fft.rfft2(f.values, workers=fft_workers())
        specs = self._half_symbols() * half[None, :, :]
        return scipy.fft.irfft2(specs, s=(n, n), workers=fft_workers())


@lru_cache(maxsize=8)
def _bank_cache(grid, n0):
    return DyadicFilterBank(grid, n0)


def filter_bank(grid, n0=4):
    """Shared filter bank for a grid (banks are immutable)."""
    return _bank_cache(grid, n0)


def dyadic_block(f, j, bank=None):
    bank = bank or filter_bank(f.grid)
    return bank.block(f, j)


def _lp_of_values(vals, p, h):
    if p == np.inf:
        return float(np.abs(vals).max())
    return float((h**2 * (np.abs(vals) ** p).sum()) ** (1.0 / p))


def block_lp_norms(f, p, bank=None):
    """Array of ||Delta_j f||_Lp for j = -1 .. j_max."""
    bank = bank or filter_bank(f.grid)
    stack = bank.block_values(f)
    h = f.grid.h
    return np.array([_lp_of_values(stack[i], p, h) for i in range(stack.shape[0])])


def besov_from_blocks(block_norms, spec, bank):
    """Aggregate precomputed per-block Lp norms into a Besov norm."""
    js = np.arange(-1, bank.j_max + 1, dtype=float)
    weighted = (2.0 ** (js * spec.s)) * np.asarray(block_norms)
    if spec.r == np.inf:
        return float(weighted.max())
    return float((weighted**spec.r).sum() ** (1.0 / spec.r))


def besov_norm(f, spec, bank=None):
    """Weighted aggregation ||2^{js} ||Delta_j f||_Lp||_{l^r} over the bank.

    The j = -1 block carries weight 2^{-s} (standard convention).
    """
    bank = bank or filter_bank(f.grid)
    return besov_from_blocks(block_lp_norms(f, spec.p, bank), spec, bank)


def holder_norm(f, s, bank=None):
    """Shorthand for the generalized Holder norm (p = r = inf)."""
    return besov_norm(f, BesovSpec.holder(s), bank)


def vector_besov_norm(v, spec, bank=None):
    """Componentwise maximum of the Besov norm for a vector field."""
    return max(besov_norm(v.x_comp, spec, bank), besov_norm(v.y_comp, spec, bank))


def paraproduct(u, v, bank=None):
    """Low-high paraproduct T_u v = sum_j S_{j-N0} u * Delta_j v, dealiased."""
    if u.grid != v.grid:
        raise ArgumentError("paraproduct operands must share a grid")
    bank = bank or filter_bank(u.grid)
    u_spec = u.spectrum
    v_spec = v.spectrum
    acc = np.zeros((u.grid.n, u.grid.n))
    for j in range(bank.n0, bank.j_max + 1):
        s_u = scipy.fft.ifft2(bank.low_cut_symbol(j - bank.n0) * u_spec,
                              workers=fft_workers()).real
        d_v = scipy.fft.ifft2(bank.symbol(j) * v_spec, workers=fft_workers()).real
        acc += s_u * d_v
    return ScalarField(u.grid, acc, check=False).dealiased()


def remainder(u, v, bank=None):
    """Bony remainder R(u, v) = sum over |j-k| <= N0 of Delta_j u Delta_k v."""
    if u.grid != v.grid:
        raise ArgumentError("remainder operands must share a grid")
    bank = bank or filter_bank(u.grid)
    ub = bank.block_values(u)
    vb = bank.block_values(v)
    nb = ub.shape[0]
    acc = np.zeros((u.grid.n, u.grid.n))
    for i in range(nb):
        lo = max(0, i - bank.n0)
        hi = min(nb, i + bank.n0 + 1)
        acc += ub[i] * vb[lo:hi].sum(axis=0)
    return ScalarField(u.grid, acc, check=False).dealiased()


def bony_product(u, v, bank=None):
    """T_u v + T_v u + R(u, v); equals the dealiased product exactly."""
    bank = bank or filter_bank(u.grid)
    return paraproduct(u, v, bank) + paraproduct(v, u, bank) + remainder(u, v, bank)


def para_vector_field(X, f, bank=None):
    """Paraproduct part of the directional derivative: T_{X1} d1 f + T_{X2} d2 f."""
    if X.grid != f.grid:
        raise ArgumentError("operands must share a grid")
    bank = bank or filter_bank(f.grid)
    return paraproduct(X.x_comp, dx(f), bank) + paraproduct(X.y_comp, dy(f), bank)


def directional_derivative(X, f):
    """Pointwise X . grad f, dealiased."""
    gf = gradient(f)
    vals = X.x_comp.values * gf.x_comp.values + X.y_comp.values * gf.y_comp.values
    return ScalarField(f.grid, vals, check=False).dealiased()


def weak_directional_derivative(X, f):
    """X . grad f in divergence form: div(X f) - f div X.

    Safe for discontinuous f: the derivative never lands on f directly.
    """
    xf = VectorField2(dealiased_product(X.x_comp, f), dealiased_product(X.y_comp, f))
    div_x = divergence(X)
    return divergence(xf) - dealiased_product(f, div_x)


def striated_source(X, omega, theta, nu, bank=None):
    """Forcing of the div(X*omega) evolution.

    nu * div(X Lap(omega) - Lap(X omega)) + div(X d1 theta), every term
    evaluated spectrally with dealiased products.
    """
    lap_w = laplacian(omega)
    term_a = VectorField2(dealiased_product(X.x_comp, lap_w),
                          dealiased_product(X.y_comp, lap_w))
    xw = VectorField2(dealiased_product(X.x_comp, omega),
                      dealiased_product(X.y_comp, omega))
    term_b = VectorField2(laplacian(xw.x_comp), laplacian(xw.y_comp))
    visc = divergence(term_a - term_b)
    d1t = dx(theta)
    buoy = divergence(VectorField2(dealiased_product(X.x_comp, d1t),
                                   dealiased_product(X.y_comp, d1t)))
    return nu * visc + buoy


class TimeNormAccumulator:
    """Running time-inside-the-blocks norm ||f||_{tilde-L^rho_t(B^s_{p,r})}.

    Feed states in time order via ``add(t, f)``; block Lp norms are
    accumulated with the trapezoid rule in t (running max for rho = inf).
    ``plain_value`` gives the companion L^rho-in-time of the instantaneous
    Besov norm; by Minkowski the tilde value is below it for r >= rho and
    above it for r <= rho.
    """

    def __init__(self, bank, spec, rho):
        if not (rho >= 1):
            raise ArgumentError("time exponent rho must lie in [1, inf]")
        self.bank = bank
        self.spec = spec
        self.rho = rho
        self._last_t = None
        self._last_block = None
        self._last_inst = None
        nb = bank.j_max + 2
        self._block_acc = np.zeros(nb)
        self._block_max = np.zeros(nb)
        self._inst_acc = 0.0
        self._inst_max = 0.0

    def add(self, t, f):
        norms = block_lp_norms(f, self.spec.p, self.bank)
        js = np.arange(-1, self.bank.j_max + 1, dtype=float)
        weighted = (2.0 ** (js * self.spec.s)) * norms
        if self.spec.r == np.inf:
            inst = float(weighted.max())
        else:
            inst = float((weighted**self.spec.r).sum() ** (1.0 / self.spec.r))

        if self.rho == np.inf:
            self._block_max = np.maximum(self._block_max, norms)
            self._inst_max = max(self._inst_max, inst)
        elif self._last_t is not None:
            dt = t - self._last_t
            if dt < 0:
                raise ArgumentError("states must be fed in time order")
            self._block_acc += 0.5 * dt * (self._last_block**self.rho + norms**self.rho)
            self._inst_acc += 0.5 * dt * (self._last_inst**self.rho + inst**self.rho)
        self._last_t = t
        self._last_block = norms
        self._last_inst = inst

    def value(self):
        if self.rho == np.inf:
            per_block = self._block_max
        else:
            per_block = self._block_acc ** (1.0 / self.rho)
        js = np.arange(-1, self.bank.j_max + 1, dtype=float)
        weighted = (2.0 ** (js * self.spec.s)) * per_block
        if self.spec.r == np.inf:
            return float(weighted.max())
        return float((weighted**self.spec.r).sum() ** (1.0 / self.spec.r))

    def plain_value(self):
        if self.rho == np.inf:
            return float(self._inst_max)
        return float(self._inst_acc ** (1.0 / self.rho))


def oversampled_max(f, factor=4):
    """Sup-norm spot check on a zero-padded (factor x finer) evaluation."""
    g = f.grid
    m = factor * g.n
    big = np.zeros((m, m), dtype=complex)
    spec = np.fft.fftshift(f.spectrum)
    lo = (m - g.n) // 2
    big[lo:lo + g.n, lo:lo + g.n] = spec
    big = np.fft.ifftshift(big) * factor**2
    vals = scipy.fft.ifft2(big, workers=fft_workers()).real
    return float(np.abs(vals).max())
