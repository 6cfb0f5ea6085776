"""Per-band PSF stacks, parametric spectral encodings, and aberrated image formation.

A :class:`PSFStack` holds one shift-invariant convolution kernel per
spectral band. Image formation convolves every band with its kernel and
projects the blurred cube to RGB, so wavelength-dependent kernel
structure (defocus growth, lateral shift, dispersion, rotation) encodes
spectral information into the color image.

PSF container layout (little-endian):
    magic "PSF1" | u32 bands | u32 kernel_height | u32 kernel_width |
    u8 padding code (0 reflect, 1 circular) | 3 reserved bytes |
    bands * float32 wavelengths | bands*kh*kw float32 kernels.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .cube import RGBImage, SRF, SpectralCube, _atomic_write_bytes, _read_bytes
from .errors import FormatError, ValidationError

PSF_MAGIC = b"PSF1"
_PSF_HEADER = struct.Struct("<4sIIIB3x")
_PADDING_CODES = {"reflect": 0, "circular": 1}
_PADDING_NAMES = {v: k for k, v in _PADDING_CODES.items()}

#: Kernels up to this side length convolve directly; larger ones go through FFT.
DIRECT_KERNEL_LIMIT = 15

KERNEL_SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PSFStack:
    """One normalized, nonnegative, odd-sized convolution kernel per band."""

    wavelengths: np.ndarray
    kernels: np.ndarray
    padding: str = "reflect"

    def __post_init__(self):
        wavelengths = np.array(self.wavelengths, dtype=np.float64, copy=True)
        kernels = np.array(self.kernels, dtype=np.float64, copy=True)
        if kernels.ndim != 3:
            raise ValidationError(
                f"kernels must be (bands, height, width), got shape {kernels.shape}"
            )
        if wavelengths.ndim != 1 or wavelengths.shape[0] != kernels.shape[0]:
            raise ValidationError("wavelength count does not match kernel count")
        kh, kw = kernels.shape[1:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValidationError(f"kernel dimensions must be odd, got {kh}x{kw}")
        if not np.all(np.isfinite(kernels)):
            raise ValidationError("kernels contain non-finite values")
        if np.any(kernels < 0):
            raise ValidationError("kernel entries must be nonnegative")
        sums = kernels.sum(axis=(1, 2))
        if np.any(np.abs(sums - 1.0) > KERNEL_SUM_TOL):
            worst = float(np.abs(sums - 1.0).max())
            raise ValidationError(f"kernels must sum to 1 within {KERNEL_SUM_TOL}, off by {worst}")
        if self.padding not in _PADDING_CODES:
            raise ValidationError(f"padding must be 'reflect' or 'circular', got {self.padding!r}")
        wavelengths.setflags(write=False)
        kernels.setflags(write=False)
        object.__setattr__(self, "wavelengths", wavelengths)
        object.__setattr__(self, "kernels", kernels)

    @property
    def bands(self) -> int:
        return self.kernels.shape[0]

    @property
    def kernel_height(self) -> int:
        return self.kernels.shape[1]

    @property
    def kernel_width(self) -> int:
        return self.kernels.shape[2]


def convolve_band(plane: np.ndarray, kernel: np.ndarray, padding: str = "reflect",
                  method: str = "auto") -> np.ndarray:
    """Convolve one band with a kernel under the given boundary handling.

    True convolution (the kernel is flipped, not correlated). Output has
    the input's shape. ``method`` is only meant for cross-checking the
    direct and FFT paths; "auto" picks direct for kernels up to
    15x15 and FFT above, and the two agree within 1e-6.
    """
    plane = np.asarray(plane, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if plane.ndim != 2 or kernel.ndim != 2:
        raise ValidationError("plane and kernel must be 2-D")
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValidationError(f"kernel dimensions must be odd, got {kh}x{kw}")
    if kh > plane.shape[0] or kw > plane.shape[1]:
        raise ValidationError(
            f"kernel {kh}x{kw} larger than image {plane.shape[0]}x{plane.shape[1]}"
        )
    if padding not in _PADDING_CODES:
        raise ValidationError(f"padding must be 'reflect' or 'circular', got {padding!r}")
    if method == "auto":
        method = "direct" if max(kh, kw) <= DIRECT_KERNEL_LIMIT else "fft"
    if method not in ("direct", "fft"):
        raise ValidationError(f"method must be 'auto', 'direct', or 'fft', got {method!r}")
    pad_mode = "wrap" if padding == "circular" else "symmetric"
    padded = np.pad(plane, ((kh // 2, kh // 2), (kw // 2, kw // 2)), mode=pad_mode)
    return signal.convolve(padded, kernel, mode="valid", method=method)


def form_aberrated(cube: SpectralCube, psf: PSFStack, srf: SRF) -> RGBImage:
    """Convolve each band with its PSF kernel, then project to RGB.

    Reduces to the plain projection when every kernel is a centered delta.
    """
    if psf.bands != cube.bands:
        raise ValidationError(f"band mismatch: cube has {cube.bands}, PSF stack has {psf.bands}")
    if cube.bands != srf.bands:
        raise ValidationError(f"band mismatch: cube has {cube.bands}, SRF has {srf.bands}")
    if not np.array_equal(cube.wavelengths, srf.wavelengths):
        raise ValidationError("cube and SRF wavelength grids differ")
    blurred = np.empty_like(cube.data)
    for k in range(cube.bands):
        blurred[k] = convolve_band(cube.data[k], psf.kernels[k], psf.padding)
    rgb = np.tensordot(srf.q, blurred, axes=(0, 0))
    return RGBImage(data=rgb)


def _kernel_grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    if size < 1 or size % 2 == 0:
        raise ValidationError(f"kernel size must be odd and positive, got {size}")
    half = size // 2
    y, x = np.mgrid[-half : half + 1, -half : half + 1]
    return y.astype(np.float64), x.astype(np.float64)


def delta_stack(wavelengths, size: int = 1, padding: str = "reflect") -> PSFStack:
    """Identity PSF stack: a centered delta in every band."""
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    kernels = np.zeros((wavelengths.shape[0], size, size))
    if size % 2 == 0:
        raise ValidationError(f"kernel size must be odd, got {size}")
    kernels[:, size // 2, size // 2] = 1.0
    return PSFStack(wavelengths=wavelengths, kernels=kernels, padding=padding)


def gen_chromatic(wavelengths, sigma0: float, sigma_slope: float, shift_slope: float,
                  ref_lambda: float, size: int = 21, padding: str = "reflect") -> PSFStack:
    """Defocus-plus-lateral-shift model of lens chromatic aberration.

    Band kernels are isotropic Gaussians whose width grows linearly with
    spectral distance from the reference wavelength,
    sigma(lambda) = sigma0 + sigma_slope * |lambda - ref_lambda|,
    and whose center shifts along x by shift_slope * (lambda - ref_lambda)
    pixels. Each kernel is renormalized to sum 1.
    """
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    if sigma0 <= 0:
        raise ValidationError(f"sigma0 must be positive, got {sigma0}")
    if sigma_slope < 0:
        raise ValidationError(f"sigma_slope must be nonnegative, got {sigma_slope}")
    sigmas = sigma0 + sigma_slope * np.abs(wavelengths - ref_lambda)
    shifts = shift_slope * (wavelengths - ref_lambda)
    if size < 4.0 * sigmas.max():
        raise ValidationError(
            f"kernel size {size} too small for max sigma {sigmas.max():.3f} (need >= 4*sigma)"
        )
    if np.abs(shifts).max() > size // 2:
        raise ValidationError(
            f"lateral shift {np.abs(shifts).max():.3f} px exceeds kernel half-size {size // 2}"
        )
    y, x = _kernel_grid(size)
    kernels = np.empty((wavelengths.shape[0], size, size))
    for k, (sigma, dx) in enumerate(zip(sigmas, shifts)):
        g = np.exp(-((x - dx) ** 2 + y**2) / (2.0 * sigma**2))
        kernels[k] = g / g.sum()
    return PSFStack(wavelengths=wavelengths, kernels=kernels, padding=padding)


def gen_grating(wavelengths, eta: float, disp_slope: float, ref_lambda: float,
                size: int = 21, padding: str = "reflect") -> PSFStack:
    """First-order grating model: undiffracted delta plus a dispersed copy.

    A fraction ``eta`` of the energy lands in a delta displaced by
    disp_slope * (lambda - ref_lambda) pixels along x, split bilinearly
    over the nearest texels for sub-pixel displacements; the remaining
    1 - eta stays in the centered zeroth order.
    """
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"eta must be in [0, 1], got {eta}")
    if size < 1 or size % 2 == 0:
        raise ValidationError(f"kernel size must be odd and positive, got {size}")
    half = size // 2
    disps = disp_slope * (wavelengths - ref_lambda)
    kernels = np.zeros((wavelengths.shape[0], size, size))
    kernels[:, half, half] = 1.0 - eta
    if eta > 0.0:
        if np.floor(disps.min()) < -half or np.ceil(disps.max()) > half:
            raise ValidationError(
                f"dispersion up to {np.abs(disps).max():.3f} px leaves the {size}x{size} kernel"
            )
        for k, d in enumerate(disps):
            x0 = int(np.floor(d))
            fx = d - x0
            kernels[k, half, half + x0] += eta * (1.0 - fx)
            if fx > 0.0:
                kernels[k, half, half + x0 + 1] += eta * fx
    return PSFStack(wavelengths=wavelengths, kernels=kernels, padding=padding)


def gen_rotation(wavelengths, sigma_major: float, sigma_minor: float, angle_span: float,
                 size: int = 21, padding: str = "reflect") -> PSFStack:
    """Rotating anisotropic Gaussian, the double-helix style encoding.

    The major axis orientation advances linearly with band index from 0
    to ``angle_span`` radians across the stack.
    """
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    if sigma_minor <= 0 or sigma_major <= 0:
        raise ValidationError("sigma_major and sigma_minor must be positive")
    if sigma_minor > sigma_major:
        raise ValidationError(
            f"sigma_minor {sigma_minor} must not exceed sigma_major {sigma_major}"
        )
    if size < 4.0 * sigma_major:
        raise ValidationError(
            f"kernel size {size} too small for sigma_major {sigma_major} (need >= 4*sigma)"
        )
    nbands = wavelengths.shape[0]
    y, x = _kernel_grid(size)
    kernels = np.empty((nbands, size, size))
    for k in range(nbands):
        theta = angle_span * (k / (nbands - 1)) if nbands > 1 else 0.0
        u = np.cos(theta) * x + np.sin(theta) * y
        v = -np.sin(theta) * x + np.cos(theta) * y
        g = np.exp(-(u**2) / (2.0 * sigma_major**2) - v**2 / (2.0 * sigma_minor**2))
        kernels[k] = g / g.sum()
    return PSFStack(wavelengths=wavelengths, kernels=kernels, padding=padding)


ENCODING_KINDS = ("none", "chromatic", "grating", "rotation")

_ENCODING_DEFAULTS = {
    "chromatic": {
        "sigma0": 1.0,
        "sigma_slope": 0.01,
        "shift_slope": 0.02,
        "ref_lambda": 550.0,
        "size": 21,
    },
    "grating": {"eta": 0.5, "disp_slope": 0.03, "ref_lambda": 400.0, "size": 21},
    "rotation": {
        "sigma_major": 2.0,
        "sigma_minor": 0.8,
        "angle_span": np.pi / 2,
        "size": 21,
    },
}


@dataclass(frozen=True)
class EncodingSpec:
    """Which spectral encoding to simulate, with its generator parameters.

    ``params`` overrides the per-kind defaults; unknown keys are rejected.
    """

    kind: str = "none"
    params: dict = field(default_factory=dict)
    padding: str = "reflect"

    def __post_init__(self):
        if self.kind not in ENCODING_KINDS:
            raise ValidationError(f"encoding kind must be one of {ENCODING_KINDS}, got {self.kind!r}")
        if self.kind == "none":
            if self.params:
                raise ValidationError("encoding 'none' takes no parameters")
            return
        allowed = set(_ENCODING_DEFAULTS[self.kind])
        unknown = set(self.params) - allowed
        if unknown:
            raise ValidationError(f"unknown {self.kind} parameters: {sorted(unknown)}")

    def build(self, wavelengths) -> PSFStack | None:
        """Instantiate the PSF stack for a wavelength grid; None for kind 'none'."""
        if self.kind == "none":
            return None
        kwargs = dict(_ENCODING_DEFAULTS[self.kind])
        kwargs.update(self.params)
        kwargs["size"] = int(kwargs["size"])
        if self.kind == "chromatic":
            return gen_chromatic(wavelengths, padding=self.padding, **kwargs)
        if self.kind == "grating":
            return gen_grating(wavelengths, padding=self.padding, **kwargs)
        return gen_rotation(wavelengths, padding=self.padding, **kwargs)


def write_psf(stack: PSFStack, path) -> None:
    """Serialize a PSF stack to its binary container (float32 payload)."""
    header = _PSF_HEADER.pack(
        PSF_MAGIC,
        stack.bands,
        stack.kernel_height,
        stack.kernel_width,
        _PADDING_CODES[stack.padding],
    )
    body = io.BytesIO()
    body.write(header)
    body.write(stack.wavelengths.astype("<f4").tobytes())
    body.write(stack.kernels.astype("<f4").tobytes(order="C"))
    _atomic_write_bytes(path, body.getvalue())


def read_psf(path) -> PSFStack:
    """Read a PSF container; normalization is re-validated on construction."""
    raw = _read_bytes(path)
    if len(raw) < _PSF_HEADER.size:
        raise FormatError(f"{path!r}: file shorter than PSF header")
    magic, bands, kh, kw, pad_code = _PSF_HEADER.unpack_from(raw)
    if magic != PSF_MAGIC:
        raise FormatError(f"{path!r}: bad magic {magic!r}")
    if bands < 1 or kh < 1 or kw < 1:
        raise FormatError(f"{path!r}: degenerate dimensions {bands}x{kh}x{kw}")
    if pad_code not in _PADDING_NAMES:
        raise FormatError(f"{path!r}: unknown padding code {pad_code}")
    expected = _PSF_HEADER.size + 4 * bands + 4 * bands * kh * kw
    if len(raw) != expected:
        raise FormatError(
            f"{path!r}: payload length {len(raw)} does not match header (expected {expected})"
        )
    offset = _PSF_HEADER.size
    wavelengths = np.frombuffer(raw, dtype="<f4", count=bands, offset=offset)
    offset += 4 * bands
    kernels = np.frombuffer(raw, dtype="<f4", count=bands * kh * kw, offset=offset)
    return PSFStack(
        wavelengths=wavelengths.astype(np.float64),
        kernels=kernels.reshape(bands, kh, kw).astype(np.float64),
        padding=_PADDING_NAMES[pad_code],
    )
