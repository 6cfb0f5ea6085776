"""Brute-force dense reference implementations, used only for verification.

Everything here trades speed for literalness: per-band blurs become
explicit (M*N) x (M*N) matrices under circular padding, formation is the
plain matrix product of those blocks with the response matrix, and the
color-space projector is written out with an explicit inverse. The fast
paths in :mod:`specforge.optics` and :mod:`specforge.metamer` are tested
against these, never the other way around.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import RGBImage, SRF, SpectralCube
from .errors import ValidationError

#: Refuse to build dense operators above this pixel count.
MAX_DENSE_PIXELS = 4096


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Dense matrix form of one band's circular convolution."""

    matrix: np.ndarray
    height: int
    width: int

    def apply(self, plane: np.ndarray) -> np.ndarray:
        vec = np.asarray(plane, dtype=np.float64).reshape(-1)
        return (self.matrix @ vec).reshape(self.height, self.width)


def build_dense(kernel: np.ndarray, height: int, width: int) -> DenseOperator:
    """Materialize circular convolution with ``kernel`` as a dense matrix.

    Output pixel (i, j) reads input pixel ((i - (u - ch)) mod M,
    (j - (v - cw)) mod N) with weight kernel[u, v], where (ch, cw) is the
    kernel center.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise ValidationError(f"kernel must be 2-D with odd sides, got shape {kernel.shape}")
    npix = height * width
    if npix > MAX_DENSE_PIXELS:
        raise ValidationError(f"{height}x{width} exceeds the dense-operator pixel cap")
    kh, kw = kernel.shape
    ch, cw = kh // 2, kw // 2
    matrix = np.zeros((npix, npix))
    for i in range(height):
        for j in range(width):
            row = i * width + j
            for u in range(kh):
                src_i = (i - (u - ch)) % height
                for v in range(kw):
                    src_j = (j - (v - cw)) % width
                    matrix[row, src_i * width + src_j] += kernel[u, v]
    row_sums = matrix.sum(axis=1)
    if np.any(np.abs(row_sums - kernel.sum()) > 1e-9):
        raise ValidationError("dense operator rows do not reproduce the kernel sum")
    return DenseOperator(matrix=matrix, height=height, width=width)


def form_aberrated_dense(cube: SpectralCube, kernels: np.ndarray, srf: SRF) -> RGBImage:
    """Literal blocked formation: blur each vectorized band densely, then project."""
    kernels = np.asarray(kernels, dtype=np.float64)
    if kernels.ndim != 3 or kernels.shape[0] != cube.bands:
        raise ValidationError("need one kernel per band")
    if cube.bands != srf.bands:
        raise ValidationError(f"band mismatch: cube has {cube.bands}, SRF has {srf.bands}")
    npix = cube.height * cube.width
    blurred = np.empty((npix, cube.bands))
    for k in range(cube.bands):
        operator = build_dense(kernels[k], cube.height, cube.width)
        blurred[:, k] = operator.matrix @ cube.data[k].reshape(-1)
    rgb = blurred @ srf.q
    return RGBImage(data=rgb.T.reshape(3, cube.height, cube.width))


def projector_dense(srf: SRF) -> np.ndarray:
    """Color-space projector by the textbook formula q (q^T q)^-1 q^T.

    Self-checks idempotence and that the complement annihilates q before
    returning.
    """
    q = srf.q
    projector = q @ np.linalg.inv(q.T @ q) @ q.T
    if not np.allclose(projector @ projector, projector, atol=1e-9):
        raise ValidationError("projector failed the idempotence self-check")
    complement = np.eye(q.shape[0]) - projector
    if not np.allclose(q.T @ complement, 0.0, atol=1e-9):
        raise ValidationError("projector complement does not annihilate the response matrix")
    return projector
