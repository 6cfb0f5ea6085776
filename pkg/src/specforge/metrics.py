"""Reconstruction quality metrics for spectral cubes and RGB images.

All functions accept two :class:`~specforge.cube.SpectralCube` or two
:class:`~specforge.cube.RGBImage` operands of identical shape (an RGB
image is treated as a 3-band cube). Edge-case policy is fixed and
reported rather than silently applied: the relative-error denominator is
floored at ``MRAE_EPS`` and near-zero spectra are excluded from the
angular mean, with counts of both exposed in :class:`MetricReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

MRAE_EPS = 1e-8
SAM_NORM_CUTOFF = 1e-12


@dataclass(frozen=True)
class MetricReport:
    mrae: float
    rmse: float
    psnr_db: float
    sam_rad: float
    l1: float
    pixels_excluded_sam: int
    denom_floored_mrae: int


def _planar(obj) -> np.ndarray:
    data = getattr(obj, "data", obj)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValidationError(f"expected (bands, height, width) data, got shape {data.shape}")
    return data


def _pair(est, gt) -> tuple[np.ndarray, np.ndarray]:
    a, b = _planar(est), _planar(gt)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mrae(est, gt) -> float:
    """Mean relative absolute error, |est - gt| / max(gt, eps) over all samples."""
    return _mrae_counted(*_pair(est, gt))[0]


def _mrae_counted(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    denom = np.maximum(b, MRAE_EPS)
    value = float(np.mean(np.abs(a - b) / denom))
    floored = int(np.count_nonzero(b < MRAE_EPS))
    return value, floored


def rmse(est, gt) -> float:
    """Root mean square error over all samples."""
    a, b = _pair(est, gt)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(est, gt, max_value: float = 1.0) -> float:
    """Band-averaged peak signal-to-noise ratio in dB.

    Each band contributes 20*log10(max_value / sqrt(MSE_k)); a band with
    zero MSE makes the whole result the +infinity sentinel instead of
    being averaged as a finite number.
    """
    a, b = _pair(est, gt)
    mse_per_band = np.mean((a - b) ** 2, axis=(1, 2))
    if np.any(mse_per_band == 0.0):
        return math.inf
    return float(np.mean(20.0 * np.log10(max_value / np.sqrt(mse_per_band))))


def sam(est, gt) -> float:
    """Mean spectral angle in radians over pixels with non-degenerate spectra."""
    return _sam_counted(*_pair(est, gt))[0]


def _sam_counted(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    dots = np.sum(a * b, axis=0)
    norm_a = np.sqrt(np.sum(a * a, axis=0))
    norm_b = np.sqrt(np.sum(b * b, axis=0))
    valid = (norm_a > SAM_NORM_CUTOFF) & (norm_b > SAM_NORM_CUTOFF)
    excluded = int(valid.size - np.count_nonzero(valid))
    if not np.any(valid):
        return 0.0, excluded
    cos = dots[valid] / (norm_a[valid] * norm_b[valid])
    angles = np.arccos(np.clip(cos, -1.0, 1.0))
    # arccos loses precision where cos ~ 1; bit-identical spectra are
    # exactly parallel, so force their angle to zero
    angles[np.all(a == b, axis=0)[valid]] = 0.0
    return float(np.mean(angles)), excluded


def l1(est, gt) -> float:
    """Mean absolute difference over all samples."""
    a, b = _pair(est, gt)
    return float(np.mean(np.abs(a - b)))


def report(est, gt, max_value: float = 1.0) -> MetricReport:
    """All five metrics plus the edge-case counters, in one pass."""
    a, b = _pair(est, gt)
    mrae_value, floored = _mrae_counted(a, b)
    sam_value, excluded = _sam_counted(a, b)
    return MetricReport(
        mrae=mrae_value,
        rmse=float(np.sqrt(np.mean((a - b) ** 2))),
        psnr_db=psnr(est, gt, max_value=max_value),
        sam_rad=sam_value,
        l1=float(np.mean(np.abs(a - b))),
        pixels_excluded_sam=excluded,
        denom_floored_mrae=floored,
    )
