"""Aberration-free spectrum-to-color projection and value quantization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import RGBImage, SRF, SpectralCube
from .errors import ValidationError


@dataclass(frozen=True)
class QuantizationSpec:
    """Bit depth and rounding rule for mapping floats to stored levels.

    Rounding is half-away-from-zero, fixed so results are bit-exact.
    """

    bit_depth: int = 8

    def __post_init__(self):
        if self.bit_depth not in (8, 16):
            raise ValidationError(f"bit_depth must be 8 or 16, got {self.bit_depth}")

    @property
    def levels(self) -> int:
        return 2**self.bit_depth - 1


def _check_grids(cube: SpectralCube, srf: SRF) -> None:
    if cube.bands != srf.bands:
        raise ValidationError(f"band mismatch: cube has {cube.bands}, SRF has {srf.bands}")
    if not np.array_equal(cube.wavelengths, srf.wavelengths):
        raise ValidationError("cube and SRF wavelength grids differ")


def project(cube: SpectralCube, srf: SRF) -> RGBImage:
    """Project a cube to RGB: out[c] = sum_k cube[k] * q[k, c], per pixel.

    Purely linear; no clamping. Wavelength grids must match exactly.
    """
    _check_grids(cube, srf)
    rgb = np.tensordot(srf.q, cube.data, axes=(0, 0))
    return RGBImage(data=rgb)


def quantize(image: RGBImage, spec: QuantizationSpec) -> RGBImage:
    """Clamp to [0, 1] and snap each value to the nearest stored level.

    Idempotent: quantizing twice equals quantizing once.
    """
    levels = float(spec.levels)
    clamped = np.clip(image.data, 0.0, 1.0)
    # values are nonnegative after clamping, so floor(x + 0.5) is
    # round-half-away-from-zero
    snapped = np.floor(clamped * levels + 0.5) / levels
    return RGBImage(data=snapped)


def normalize_srf(srf: SRF) -> SRF:
    """Rescale each response column so its maximum entry is 1.0."""
    peaks = srf.q.max(axis=0)
    if np.any(peaks <= 0):
        raise ValidationError("cannot normalize a response column with no positive entry")
    return SRF(wavelengths=srf.wavelengths, q=srf.q / peaks)
