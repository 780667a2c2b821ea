import numpy as np
import pytest

from bqpatch.fields import Grid, ScalarField


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)


@pytest.fixture(scope="session")
def grid128():
    return Grid(128)


@pytest.fixture(scope="session")
def grid256():
    return Grid(256)


def band_limited(grid, seed, kmax=None, kmin=1):
    """Random real field with spectrum confined to kmin <= |k| <= kmax."""
    kmax = kmax if kmax is not None else grid.kcut / 2
    rng = np.random.default_rng(seed)
    n = grid.n
    spec = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    ring = (grid.kmod >= kmin) & (grid.kmod <= kmax)
    spec *= ring
    f = ScalarField(grid, np.fft.ifft2(spec).real)
    vals = f.values / max(np.abs(f.values).max(), 1e-300)
    return ScalarField(grid, vals)
