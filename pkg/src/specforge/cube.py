"""Core data model and file I/O for spectral cubes, RGB images, and camera responses.

File formats
------------
HSC cube container (little-endian throughout):
    magic "HSC1" (4 bytes) | u32 height | u32 width | u32 bands |
    u8 normalized flag | 3 reserved bytes |
    bands * float32 wavelengths | height*width*bands float32 samples,
    band-major planes, each plane row-major.

SRF file: UTF-8 CSV with header line ``wavelength_nm,r,g,b`` followed by
one row per band, decimal floats.

RGB images: lossless PNG at 8 or 16 bits per channel.

Payload precision of the binary containers is IEEE float32; in-memory
arrays are float64, so a write/read roundtrip is bit-exact only for
float32-representable values.
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import FormatError, IoError, ValidationError

HSC_MAGIC = b"HSC1"
_HSC_HEADER = struct.Struct("<4sIIIB3x")

#: Default spectral sampling: 400 nm to 700 nm in 10 nm steps (31 bands).
DEFAULT_WAVELENGTHS = np.arange(400.0, 701.0, 10.0)


def default_wavelengths() -> np.ndarray:
    """Return the default 31-band wavelength grid (400:10:700 nm)."""
    return DEFAULT_WAVELENGTHS.copy()


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, order="C", copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SpectralCube:
    """Radiance datacube of shape (bands, height, width), band-major planar.

    ``normalized`` cubes hold values in [0.0, 1.0]. Intermediate products
    of metamer generation may carry negative values and must be flagged
    ``normalized=False``.
    """

    data: np.ndarray
    wavelengths: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        data = _freeze(self.data)
        wavelengths = _freeze(self.wavelengths)
        if data.ndim != 3:
            raise ValidationError(
                f"cube data must be 3-D (bands, height, width), got shape {data.shape}"
            )
        if wavelengths.ndim != 1 or wavelengths.shape[0] != data.shape[0]:
            raise ValidationError(
                f"wavelength count {wavelengths.shape} does not match {data.shape[0]} bands"
            )
        if wavelengths.shape[0] and np.any(np.diff(wavelengths) <= 0):
            raise ValidationError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(data)):
            raise ValidationError("cube data contains non-finite values")
        if self.normalized and data.size:
            lo, hi = data.min(), data.max()
            if lo < 0.0 or hi > 1.0:
                raise ValidationError(
                    f"normalized cube values must lie in [0, 1], got [{lo}, {hi}]"
                )
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "wavelengths", wavelengths)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class RGBImage:
    """Color image of shape (3, height, width), channel-major planar (R, G, B)."""

    data: np.ndarray

    def __post_init__(self):
        data = _freeze(self.data)
        if data.ndim != 3 or data.shape[0] != 3:
            raise ValidationError(
                f"RGB data must have shape (3, height, width), got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("RGB data contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class SRF:
    """Camera spectral response: a (bands, 3) nonnegative matrix q.

    Columns are the R, G, B channel responses. For 3 or more bands the
    matrix must have rank 3, otherwise the color system is degenerate and
    the metamer projector is undefined.
    """

    wavelengths: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        wavelengths = _freeze(self.wavelengths)
        q = _freeze(self.q)
        if q.ndim != 2 or q.shape[1] != 3:
            raise ValidationError(f"response matrix must be (bands, 3), got {q.shape}")
        if wavelengths.ndim != 1 or wavelengths.shape[0] != q.shape[0]:
            raise ValidationError("wavelength count does not match response rows")
        if wavelengths.shape[0] and np.any(np.diff(wavelengths) <= 0):
            raise ValidationError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(q)):
            raise ValidationError("response matrix contains non-finite values")
        if np.any(q < 0):
            raise ValidationError("response entries must be nonnegative")
        if q.size and not np.all(q.max(axis=0) > 0):
            raise ValidationError("every response column needs a strictly positive entry")
        if q.shape[0] >= 3:
            s = np.linalg.svd(q, compute_uv=False)
            if s[-1] <= 1e-10 * s[0]:
                raise ValidationError("response matrix is rank deficient")
        object.__setattr__(self, "wavelengths", wavelengths)
        object.__setattr__(self, "q", q)

    @property
    def bands(self) -> int:
        return self.q.shape[0]


def _atomic_write_bytes(path, payload: bytes) -> None:
    """Write payload to path via a same-directory temp file and rename.

    Guarantees no partial file is left behind on failure.
    """
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    except OSError as exc:
        raise IoError(f"cannot create file in {directory!r}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoError(f"cannot write {path!r}: {exc}") from exc


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path!r}: {exc}") from exc


def write_cube(cube: SpectralCube, path) -> None:
    """Serialize a cube to the HSC container. Deterministic bytes for equal input."""
    header = _HSC_HEADER.pack(
        HSC_MAGIC, cube.height, cube.width, cube.bands, 1 if cube.normalized else 0
    )
    body = io.BytesIO()
    body.write(header)
    body.write(cube.wavelengths.astype("<f4").tobytes())
    body.write(cube.data.astype("<f4").tobytes(order="C"))
    _atomic_write_bytes(path, body.getvalue())


def read_cube(path) -> SpectralCube:
    """Read an HSC container. Rejects bad magic, header violations, and truncation."""
    raw = _read_bytes(path)
    if len(raw) < _HSC_HEADER.size:
        raise FormatError(f"{path!r}: file shorter than HSC header")
    magic, height, width, bands, normflag = _HSC_HEADER.unpack_from(raw)
    if magic != HSC_MAGIC:
        raise FormatError(f"{path!r}: bad magic {magic!r}")
    if height < 1 or width < 1 or bands < 1:
        raise FormatError(f"{path!r}: degenerate dimensions {height}x{width}x{bands}")
    if normflag not in (0, 1):
        raise FormatError(f"{path!r}: invalid normalized flag {normflag}")
    expected = _HSC_HEADER.size + 4 * bands + 4 * height * width * bands
    if len(raw) != expected:
        raise FormatError(
            f"{path!r}: payload length {len(raw)} does not match header (expected {expected})"
        )
    offset = _HSC_HEADER.size
    wavelengths = np.frombuffer(raw, dtype="<f4", count=bands, offset=offset)
    offset += 4 * bands
    data = np.frombuffer(raw, dtype="<f4", count=height * width * bands, offset=offset)
    return SpectralCube(
        data=data.reshape(bands, height, width).astype(np.float64),
        wavelengths=wavelengths.astype(np.float64),
        normalized=bool(normflag),
    )


SRF_HEADER = ["wavelength_nm", "r", "g", "b"]


def write_srf(srf: SRF, path) -> None:
    """Write a response matrix as CSV at full float64 precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SRF_HEADER)
    for wl, row in zip(srf.wavelengths, srf.q):
        writer.writerow([f"{wl:.17g}", f"{row[0]:.17g}", f"{row[1]:.17g}", f"{row[2]:.17g}"])
    _atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def read_srf(path) -> SRF:
    """Read a response CSV written by :func:`write_srf`."""
    text = _read_bytes(path).decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != SRF_HEADER:
        raise FormatError(f"{path!r}: expected header {','.join(SRF_HEADER)}")
    wavelengths = []
    q = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise FormatError(f"{path!r}:{lineno}: expected 4 columns, got {len(row)}")
        try:
            values = [float(cell) for cell in row]
        except ValueError as exc:
            raise FormatError(f"{path!r}:{lineno}: non-numeric value") from exc
        wavelengths.append(values[0])
        q.append(values[1:])
    if not q:
        raise FormatError(f"{path!r}: no data rows")
    return SRF(wavelengths=np.asarray(wavelengths), q=np.asarray(q))


def write_rgb(image: RGBImage, path, bit_depth: int = 16) -> None:
    """Write an RGB image as lossless PNG at the given bit depth.

    Values must already lie in [0, 1]; quantize or clamp first. Stored
    integers are round-half-away-from-zero of ``v * (2**bit_depth - 1)``.
    """
    if bit_depth not in (8, 16):
        raise ValidationError(f"bit_depth must be 8 or 16, got {bit_depth}")
    data = image.data
    if data.size and (data.min() < 0.0 or data.max() > 1.0):
        raise ValidationError("RGB values must be in [0, 1] before writing; quantize first")
    scale = float(2**bit_depth - 1)
    ints = np.floor(data * scale + 0.5)
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    # cv2 expects (height, width, channels) in BGR order
    bgr = ints.astype(dtype).transpose(1, 2, 0)[:, :, ::-1]
    ok, encoded = cv2.imencode(".png", bgr)
    if not ok:
        raise IoError(f"PNG encoding failed for {path!r}")
    _atomic_write_bytes(path, encoded.tobytes())


def read_rgb(path) -> RGBImage:
    """Read a PNG written by :func:`write_rgb` back to floats in [0, 1]."""
    raw = _read_bytes(path)
    decoded = cv2.imdecode(np.frombuffer(raw, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if decoded is None:
        raise FormatError(f"{path!r}: not a decodable image")
    if decoded.ndim != 3 or decoded.shape[2] != 3:
        raise FormatError(f"{path!r}: expected a 3-channel image, got shape {decoded.shape}")
    if decoded.dtype == np.uint8:
        scale = 255.0
    elif decoded.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"{path!r}: unsupported sample type {decoded.dtype}")
    rgb = decoded[:, :, ::-1].transpose(2, 0, 1).astype(np.float64) / scale
    return RGBImage(data=rgb)
