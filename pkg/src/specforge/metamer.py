"""Metameric-black decomposition and metamer generation.

A camera with response matrix q collapses every spectrum onto the rank-3
column space of q. The component inside that space (the fundamental
metamer) fixes the color; the orthogonal remainder (the metameric black)
is invisible to the camera. Scaling the black component therefore sweeps
a family of spectra that all project to the same RGB image, up to the
physical constraint that radiance cannot be negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import metrics
from .colorimetry import project
from .cube import RGBImage, SRF, SpectralCube
from .errors import ValidationError
from .optics import PSFStack, form_aberrated

#: Per-sample RGB deviation below which two projections count as identical.
EXACT_RGB_TOL = 1e-9

_RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MetamerDecomposition:
    """Split of a cube into fundamental metamer and metameric black.

    ``fundamental + black`` reconstructs the source, and the black
    component projects to zero in every channel. Both parts may hold
    negative values and are flagged non-normalized.
    """

    fundamental: SpectralCube
    black: SpectralCube


@dataclass(frozen=True, eq=False)
class MetamerResult:
    """A generated metamer after nonnegativity clipping.

    ``exact`` means no pixel needed clipping, so the cube projects onto
    the source RGB exactly; clipped results are near-metamers.
    ``rgb_psnr_vs_source`` is the +infinity sentinel for exact results,
    else the float-RGB PSNR against the source projection (quantization
    plays no part here).
    """

    cube: SpectralCube
    clipped_pixel_count: int
    exact: bool
    rgb_psnr_vs_source: float


@dataclass(frozen=True, eq=False)
class SeparabilityReport:
    """How far apart two cubes land in RGB under a common formation model."""

    max_abs_rgb_diff: float
    mean_abs_rgb_diff: float
    diff_image: RGBImage


def _color_projector(srf: SRF) -> np.ndarray:
    """Orthogonal projector onto the column space of q, computed stably via SVD."""
    q = srf.q
    u, s, _ = np.linalg.svd(q, full_matrices=False)
    if q.shape[0] < 3 or s.shape[0] < 3 or s[2] <= _RANK_TOL * s[0]:
        raise ValidationError("response matrix is rank deficient; metamer projector undefined")
    return u @ u.T


def decompose(cube: SpectralCube, srf: SRF) -> MetamerDecomposition:
    """Project each pixel spectrum onto the color space and its null space."""
    if cube.bands != srf.bands:
        raise ValidationError(f"band mismatch: cube has {cube.bands}, SRF has {srf.bands}")
    projector = _color_projector(srf)
    fundamental = np.tensordot(projector, cube.data, axes=(1, 0))
    black = cube.data - fundamental
    return MetamerDecomposition(
        fundamental=SpectralCube(fundamental, cube.wavelengths, normalized=False),
        black=SpectralCube(black, cube.wavelengths, normalized=False),
    )


def generate(cube: SpectralCube, srf: SRF, alpha: float) -> MetamerResult:
    """Scale the metameric black by ``alpha``, clip negatives, re-project.

    The pre-clip candidate fundamental + alpha*black is an exact metamer
    of the source by construction; clipping negative radiance may break
    that, so the returned RGB comparison is computed from the clipped
    cube. alpha = 1 reproduces the source bit-exactly.
    """
    decomp = decompose(cube, srf)
    # source + (alpha-1)*black equals fundamental + alpha*black but makes
    # alpha = 1 an exact no-op in floating point
    candidate = cube.data + (alpha - 1.0) * decomp.black.data
    clipped = np.maximum(candidate, 0.0)
    clipped_pixel_count = int(np.count_nonzero(np.any(candidate < 0.0, axis=0)))
    result_cube = SpectralCube(
        clipped,
        cube.wavelengths,
        normalized=bool(clipped.size == 0 or clipped.max() <= 1.0),
    )
    if clipped_pixel_count == 0:
        psnr_db = math.inf
    else:
        psnr_db = metrics.psnr(project(result_cube, srf), project(cube, srf))
    return MetamerResult(
        cube=result_cube,
        clipped_pixel_count=clipped_pixel_count,
        exact=clipped_pixel_count == 0,
        rgb_psnr_vs_source=psnr_db,
    )


def sample_alpha(rng: np.random.Generator, lo: float = -1.0, hi: float = 2.0) -> float:
    """Draw the black-scaling coefficient uniformly from [lo, hi)."""
    if not lo < hi:
        raise ValidationError(f"need lo < hi, got [{lo}, {hi}]")
    return float(rng.uniform(lo, hi))


def separability(a: SpectralCube, b: SpectralCube, srf: SRF,
                 psf: PSFStack | None = None) -> SeparabilityReport:
    """Push both cubes through one formation model and compare the RGB images.

    With ``psf`` given the aberrated formation is used, otherwise the
    plain projection, under which exact metamers are indistinguishable.
    """
    if a.data.shape != b.data.shape:
        raise ValidationError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    if not np.array_equal(a.wavelengths, b.wavelengths):
        raise ValidationError("wavelength grids differ")
    if psf is None:
        rgb_a, rgb_b = project(a, srf), project(b, srf)
    else:
        rgb_a, rgb_b = form_aberrated(a, psf, srf), form_aberrated(b, psf, srf)
    diff = np.abs(rgb_a.data - rgb_b.data)
    return SeparabilityReport(
        max_abs_rgb_diff=float(diff.max()) if diff.size else 0.0,
        mean_abs_rgb_diff=float(diff.mean()) if diff.size else 0.0,
        diff_image=RGBImage(data=diff),
    )
