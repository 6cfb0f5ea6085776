import numpy as np
import pytest

from specforge import SRF, SpectralCube


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_grid(bands):
    return np.linspace(400.0, 700.0, bands)


def make_random_srf(rng, bands, column_sum_one=False):
    """Random dense response matrix; rank 3 with probability one."""
    q = rng.random((bands, 3)) + 0.05
    if column_sum_one:
        q = q / q.sum(axis=0)
    return SRF(wavelengths=make_grid(bands), q=q)


def make_random_cube(rng, bands, height, width, normalized=True):
    data = rng.random((bands, height, width))
    return SpectralCube(data, make_grid(bands), normalized=normalized)


def make_exact_metamer_pair(rng, bands=8, height=16, width=16):
    """A cube and its fundamental metamer, both nonnegative, black nonzero.

    The base spectrum is a nonnegative combination of the response
    columns (so it lies in the color space and survives clipping), and a
    spatially structured multiple of a null-space direction is added on
    top. The two cubes are exact metamers; their difference is exactly
    the metameric black of the first.
    """
    wavelengths = make_grid(bands)
    q = rng.random((bands, 3)) + 0.05
    srf = SRF(wavelengths=wavelengths, q=q)

    weights = 0.05 + 0.2 * rng.random((3, height, width))
    base = np.tensordot(q, weights, axes=(1, 0))
    base *= 0.7 / base.max()

    # first null-space direction of the color projection
    u_full = np.linalg.svd(q, full_matrices=True)[0]
    null_dir = u_full[:, 3]
    null_dir = null_dir / np.abs(null_dir).max()

    yy, xx = np.mgrid[0:height, 0:width]
    blob = np.exp(-(((yy - height / 2) ** 2) + (xx - width / 2) ** 2) / (2.0 * 2.0**2))

    margin = min(float(base.min()), float(1.0 - base.max()))
    beta = 0.9 * margin
    black = beta * blob[None, :, :] * null_dir[:, None, None]

    with_black = SpectralCube(base + black, wavelengths)
    fundamental_only = SpectralCube(base, wavelengths)
    return with_black, fundamental_only, srf
