"""Sensor and ISP degradation: shot noise, quantization, optional lossy codec.

Shot noise is parameterized by the expected photon-electron count at
full scale (npe): a pixel value v collects Poisson(v * npe) electrons and
is read back as electrons / npe. npe = 0 conventionally disables noise.
The chain order is fixed: clamp, noise, quantize, codec.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
from dataclasses import dataclass

import numpy as np

from .colorimetry import QuantizationSpec, quantize
from .cube import RGBImage, read_rgb, write_rgb
from .errors import CodecError, ValidationError


@dataclass(frozen=True)
class DegradationConfig:
    """Knobs for the degradation chain.

    ``codec`` is an external command template with {in} and {out}
    placeholders operating on a lossless PNG; None disables the stage.
    """

    npe: float = 0.0
    quant: QuantizationSpec | None = None
    codec: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.npe < 0:
            raise ValidationError(f"npe must be nonnegative, got {self.npe}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in u64")


def poisson_noise(image: RGBImage, npe: float, rng: np.random.Generator) -> RGBImage:
    """Apply full-scale-referenced Poisson shot noise.

    Values are clamped to [0, 1] first. npe = 0 returns the clamped
    image unchanged; the draw is deterministic for a given generator
    state. numpy's Poisson sampler (inversion below mean 10, transformed
    rejection above) is the pinned algorithm.
    """
    if npe < 0:
        raise ValidationError(f"npe must be nonnegative, got {npe}")
    clamped = np.clip(image.data, 0.0, 1.0)
    if npe == 0:
        return RGBImage(data=clamped)
    electrons = rng.poisson(clamped * npe)
    return RGBImage(data=electrons / npe)


def _run_codec(image: RGBImage, template: str, bit_depth: int) -> RGBImage:
    with tempfile.TemporaryDirectory(prefix="specforge-codec-") as tmpdir:
        in_path = os.path.join(tmpdir, "in.png")
        out_path = os.path.join(tmpdir, "out.img")
        write_rgb(image, in_path, bit_depth=bit_depth)
        command = template.replace("{in}", in_path).replace("{out}", out_path)
        proc = subprocess.run(command, shell=True, capture_output=True, text=True)
        if proc.returncode != 0:
            raise CodecError(
                f"codec command failed with status {proc.returncode}: {proc.stderr.strip()}",
                exit_status=proc.returncode,
            )
        if not os.path.exists(out_path):
            raise CodecError("codec command produced no output file", exit_status=proc.returncode)
        decoded = read_rgb(out_path)
        if decoded.data.shape != image.data.shape:
            raise CodecError(
                f"codec changed image dimensions: {image.data.shape} -> {decoded.data.shape}"
            )
        return decoded


def apply_chain(image: RGBImage, config: DegradationConfig) -> RGBImage:
    """Run clamp -> shot noise -> quantization -> codec, per the config.

    Fully deterministic given the config seed (codec permitting). The
    codec stage exchanges pixels through a lossless PNG, so with no
    quantization configured it implicitly snaps values to 16-bit levels.
    """
    rng = np.random.default_rng(config.seed)
    out = poisson_noise(image, config.npe, rng)
    if config.quant is not None:
        out = quantize(out, config.quant)
    if config.codec is not None:
        bit_depth = config.quant.bit_depth if config.quant is not None else 16
        if config.quant is None:
            out = quantize(out, QuantizationSpec(bit_depth))
        out = _run_codec(out, config.codec, bit_depth)
    return out
