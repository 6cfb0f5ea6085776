"""specforge: spectral image formation, metamers, encodings, degradation, metrics."""

__version__ = "0.1.0"

from .colorimetry import QuantizationSpec, normalize_srf, project, quantize
from .cube import (
    DEFAULT_WAVELENGTHS,
    RGBImage,
    SRF,
    SpectralCube,
    default_wavelengths,
    read_cube,
    read_rgb,
    read_srf,
    write_cube,
    write_rgb,
    write_srf,
)
from .degrade import DegradationConfig, apply_chain, poisson_noise
from .errors import CodecError, FormatError, IoError, SpecforgeError, ValidationError
from .metamer import (
    MetamerDecomposition,
    MetamerResult,
    SeparabilityReport,
    decompose,
    generate,
    sample_alpha,
    separability,
)
from .metrics import MetricReport, l1, mrae, psnr, report, rmse, sam
from .optics import (
    EncodingSpec,
    PSFStack,
    convolve_band,
    delta_stack,
    form_aberrated,
    gen_chromatic,
    gen_grating,
    gen_rotation,
    read_psf,
    write_psf,
)
from .pipeline import (
    MetamerMode,
    PipelineConfig,
    SamplePair,
    build_validation_set,
    encoding_sweep,
    extract_patches,
    regenerate_pair,
    split,
    synthesize_dataset,
    synthesize_pair,
)

__all__ = [
    "CodecError",
    "DEFAULT_WAVELENGTHS",
    "DegradationConfig",
    "EncodingSpec",
    "FormatError",
    "IoError",
    "MetamerDecomposition",
    "MetamerMode",
    "MetamerResult",
    "MetricReport",
    "PSFStack",
    "PipelineConfig",
    "QuantizationSpec",
    "RGBImage",
    "SRF",
    "SamplePair",
    "SeparabilityReport",
    "SpecforgeError",
    "SpectralCube",
    "ValidationError",
    "apply_chain",
    "build_validation_set",
    "convolve_band",
    "decompose",
    "default_wavelengths",
    "delta_stack",
    "encoding_sweep",
    "extract_patches",
    "form_aberrated",
    "gen_chromatic",
    "gen_grating",
    "gen_rotation",
    "generate",
    "l1",
    "mrae",
    "normalize_srf",
    "poisson_noise",
    "project",
    "psnr",
    "quantize",
    "read_cube",
    "read_psf",
    "read_rgb",
    "read_srf",
    "regenerate_pair",
    "report",
    "rmse",
    "sam",
    "sample_alpha",
    "separability",
    "split",
    "synthesize_dataset",
    "synthesize_pair",
    "write_cube",
    "write_psf",
    "write_rgb",
    "write_srf",
]
