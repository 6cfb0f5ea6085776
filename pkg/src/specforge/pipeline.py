"""Dataset-level orchestration: splits, patches, augmentation, batch synthesis.

Every emitted sample pair carries a provenance record from which it can
be regenerated bit-exactly: source scene, patch origin, spatial ops,
black-scaling coefficient, and the seed of its noise draw. Randomness is
keyed by (config seed, scene index) so results do not depend on worker
scheduling.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .colorimetry import QuantizationSpec, project, quantize
from .cube import RGBImage, SRF, SpectralCube, read_cube, write_cube, write_rgb
from .degrade import DegradationConfig, apply_chain
from .errors import ValidationError
from .metamer import generate, sample_alpha, separability
from .optics import EncodingSpec, form_aberrated

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


@dataclass(frozen=True)
class MetamerMode:
    """Ground-truth substitution policy for synthesized pairs."""

    kind: str = "none"
    alpha: float = 0.0
    lo: float = -1.0
    hi: float = 2.0

    def __post_init__(self):
        if self.kind not in ("none", "fixed", "on_the_fly"):
            raise ValidationError(f"metamer mode must be none/fixed/on_the_fly, got {self.kind!r}")
        if self.kind == "on_the_fly" and not self.lo < self.hi:
            raise ValidationError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def none(cls) -> "MetamerMode":
        return cls(kind="none")

    @classmethod
    def fixed(cls, alpha: float) -> "MetamerMode":
        return cls(kind="fixed", alpha=alpha)

    @classmethod
    def on_the_fly(cls, lo: float = -1.0, hi: float = 2.0) -> "MetamerMode":
        return cls(kind="on_the_fly", lo=lo, hi=hi)


@dataclass(frozen=True)
class PipelineConfig:
    patch_size: int = 128
    stride: int | None = None
    split_fraction: float = 0.9
    spatial_aug: bool = True
    metamer_mode: MetamerMode = field(default_factory=MetamerMode.none)
    encoding: EncodingSpec = field(default_factory=EncodingSpec)
    degradation: DegradationConfig = field(default_factory=DegradationConfig)
    crop: tuple[int, int] | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.split_fraction < 1.0:
            raise ValidationError(f"split fraction must be in (0, 1), got {self.split_fraction}")
        if self.patch_size < 1:
            raise ValidationError(f"patch size must be positive, got {self.patch_size}")
        if self.stride is not None and self.stride < 1:
            raise ValidationError(f"stride must be positive, got {self.stride}")
        if self.crop is not None and (self.crop[0] < 1 or self.crop[1] < 1):
            raise ValidationError(f"crop dimensions must be positive, got {self.crop}")

    @property
    def effective_stride(self) -> int:
        return self.patch_size if self.stride is None else self.stride


@dataclass(frozen=True, eq=False)
class SamplePair:
    """One (degraded RGB, ground-truth cube) training or validation sample."""

    rgb: RGBImage
    hsi: SpectralCube
    provenance: dict


@dataclass(frozen=True, eq=False)
class PatchRecord:
    """A patch plus everything needed to cut it again from its source."""

    cube: SpectralCube
    y0: int
    x0: int
    ops: tuple[str, ...]


@dataclass(frozen=True)
class SweepRow:
    pair_id: str
    encoding: str
    max_abs_diff: float
    mean_abs_diff: float


def split(ids, fraction: float, seed: int) -> tuple[list, list]:
    """Deterministic shuffled split: first ceil(fraction * n) ids train, rest val."""
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"split fraction must be in (0, 1), got {fraction}")
    ids = list(ids)
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n_train = math.ceil(fraction * len(ids))
    return shuffled[:n_train], shuffled[n_train:]


def patch_origins(extent: int, patch: int, stride: int) -> list[int]:
    """Stride-grid origins plus a final flush to the far edge."""
    if patch > extent:
        raise ValidationError(f"patch size {patch} exceeds image extent {extent}")
    origins = list(range(0, extent - patch + 1, stride))
    if origins[-1] != extent - patch:
        origins.append(extent - patch)
    return origins


def apply_spatial_ops(data: np.ndarray, ops) -> np.ndarray:
    """Apply recorded augmentation ops to (bands, h, w) data, in order."""
    out = data
    for op in ops:
        if op.startswith("rot90:"):
            out = np.rot90(out, k=int(op.split(":")[1]), axes=(1, 2))
        elif op == "flip_h":
            out = out[:, :, ::-1]
        elif op == "flip_v":
            out = out[:, ::-1, :]
        else:
            raise ValidationError(f"unknown spatial op {op!r}")
    return np.ascontiguousarray(out)


def _draw_ops(rng: np.random.Generator) -> tuple[str, ...]:
    ops = []
    k = int(rng.integers(0, 4))
    if k:
        ops.append(f"rot90:{k}")
    if rng.random() < 0.5:
        ops.append("flip_h")
    if rng.random() < 0.5:
        ops.append("flip_v")
    return tuple(ops)


def extract_patches(cube: SpectralCube, patch: int, stride: int,
                    rng: np.random.Generator, spatial_aug: bool):
    """Yield overlapping patches covering the cube, optionally augmented.

    Origins lie on the stride grid with a final row/column flushed to the
    image edge so every pixel is covered. With ``spatial_aug`` each patch
    draws a rotation count and two flips from ``rng``; the applied ops are
    recorded on the yielded :class:`PatchRecord`.
    """
    ys = patch_origins(cube.height, patch, stride)
    xs = patch_origins(cube.width, patch, stride)
    for y0 in ys:
        for x0 in xs:
            data = cube.data[:, y0 : y0 + patch, x0 : x0 + patch]
            ops = _draw_ops(rng) if spatial_aug else ()
            if ops:
                data = apply_spatial_ops(data, ops)
            yield PatchRecord(
                cube=SpectralCube(data, cube.wavelengths, normalized=cube.normalized),
                y0=y0,
                x0=x0,
                ops=ops,
            )


def center_crop(cube: SpectralCube, width: int, height: int) -> SpectralCube:
    if width > cube.width or height > cube.height:
        raise ValidationError(
            f"crop {width}x{height} exceeds scene {cube.width}x{cube.height}"
        )
    y0 = (cube.height - height) // 2
    x0 = (cube.width - width) // 2
    return SpectralCube(
        cube.data[:, y0 : y0 + height, x0 : x0 + width],
        cube.wavelengths,
        normalized=cube.normalized,
    )


def _make_pair(cube: SpectralCube, srf: SRF, config: PipelineConfig,
               alpha: float | None, noise_seed: int, provenance: dict) -> SamplePair:
    """Deterministic core: substitution, formation, degradation."""
    if alpha is None:
        hsi = cube
    else:
        hsi = generate(cube, srf, alpha).cube
    stack = config.encoding.build(cube.wavelengths)
    if stack is None:
        rgb_clean = project(hsi, srf)
    else:
        rgb_clean = form_aberrated(hsi, stack, srf)
    rgb = apply_chain(rgb_clean, replace(config.degradation, seed=noise_seed))
    return SamplePair(rgb=rgb, hsi=hsi, provenance=provenance)


def synthesize_pair(cube: SpectralCube, srf: SRF, config: PipelineConfig,
                    rng: np.random.Generator, *, pair_id: str = "pair",
                    source_id: str = "", split_name: str = "train",
                    origin: tuple[int, int] | None = None,
                    aug_ops: tuple[str, ...] = ()) -> SamplePair:
    """Synthesize one pair from an already-prepared cube (patch or frame).

    Draws the black-scaling coefficient (on-the-fly mode only) and the
    pair's noise seed from ``rng``, in that order, and records both in
    the provenance so the pair can be regenerated without the generator.
    """
    mode = config.metamer_mode
    if mode.kind == "none":
        alpha = None
    elif mode.kind == "fixed":
        alpha = mode.alpha
    else:
        alpha = sample_alpha(rng, mode.lo, mode.hi)
    noise_seed = int(rng.integers(0, 2**63))
    provenance = {
        "pair_id": pair_id,
        "source_id": source_id,
        "split": split_name,
        "origin": list(origin) if origin is not None else None,
        "patch_size": config.patch_size if origin is not None else None,
        "aug_ops": list(aug_ops),
        "alpha": alpha,
        "noise_seed": noise_seed,
        "config_seed": config.seed,
    }
    return _make_pair(cube, srf, config, alpha, noise_seed, provenance)


def regenerate_pair(source: SpectralCube, srf: SRF, config: PipelineConfig,
                    provenance: dict) -> SamplePair:
    """Rebuild a pair bit-exactly from its source scene and provenance record."""
    cube = source
    if config.crop is not None:
        cube = center_crop(cube, *config.crop)
    if provenance.get("origin") is not None:
        y0, x0 = provenance["origin"]
        p = provenance["patch_size"]
        data = cube.data[:, y0 : y0 + p, x0 : x0 + p]
        data = apply_spatial_ops(data, provenance.get("aug_ops", ()))
        cube = SpectralCube(data, cube.wavelengths, normalized=cube.normalized)
    return _make_pair(cube, srf, config, provenance["alpha"], provenance["noise_seed"],
                      dict(provenance))


def _validation_pairs(cube: SpectralCube, scene_id: str, index: int, srf: SRF,
                      config: PipelineConfig) -> list[SamplePair]:
    """Full-frame pairs for one validation scene, honoring the doubling rule."""
    if config.crop is not None:
        cube = center_crop(cube, *config.crop)
    rng = np.random.default_rng([config.seed, index])
    doubled = config.metamer_mode.kind != "none"
    pairs = []
    for alpha, suffix in ((None, ""), (0.0, "_m0")) if doubled else ((None, ""),):
        noise_seed = int(rng.integers(0, 2**63))
        provenance = {
            "pair_id": scene_id + suffix,
            "source_id": scene_id,
            "split": "val",
            "origin": None,
            "patch_size": None,
            "aug_ops": [],
            "alpha": alpha,
            "noise_seed": noise_seed,
            "config_seed": config.seed,
        }
        pairs.append(_make_pair(cube, srf, config, alpha, noise_seed, provenance))
    return pairs


def build_validation_set(cubes, srf: SRF, config: PipelineConfig,
                         ids=None) -> list[SamplePair]:
    """Full-frame validation pairs; metamer-eval configs double the count.

    When the config uses any metamer substitution, each scene emits its
    standard pair plus a companion whose ground truth is the fundamental
    metamer (black scaled to zero), so the two share one color image but
    different spectra.
    """
    cubes = list(cubes)
    if ids is None:
        ids = [f"scene{i:04d}" for i in range(len(cubes))]
    ids = list(ids)
    if len(ids) != len(cubes):
        raise ValidationError(f"{len(ids)} ids for {len(cubes)} cubes")
    pairs = []
    for index, (scene_id, cube) in enumerate(zip(ids, cubes)):
        pairs.extend(_validation_pairs(cube, scene_id, index, srf, config))
    return pairs


def encoding_sweep(cube_pairs, srf: SRF, encodings) -> list[SweepRow]:
    """Separability of each cube pair under each labeled encoding.

    ``cube_pairs`` yields (pair_id, cube_a, cube_b); ``encodings`` yields
    (label, PSFStack or None), None meaning plain projection.
    """
    rows = []
    for pair_id, cube_a, cube_b in cube_pairs:
        for label, stack in encodings:
            rep = separability(cube_a, cube_b, srf, stack)
            rows.append(SweepRow(pair_id, label, rep.max_abs_rgb_diff, rep.mean_abs_rgb_diff))
    return rows


def _pair_bit_depth(config: PipelineConfig) -> int:
    if config.degradation.quant is not None:
        return config.degradation.quant.bit_depth
    return 16


def _write_pair(pair: SamplePair, directory: Path, bit_depth: int) -> None:
    pair_id = pair.provenance["pair_id"]
    write_cube(pair.hsi, directory / f"{pair_id}.hsc")
    rgb = quantize(pair.rgb, QuantizationSpec(bit_depth))
    write_rgb(rgb, directory / f"{pair_id}.png", bit_depth=bit_depth)
    payload = json.dumps(pair.provenance, sort_keys=True, indent=2) + "\n"
    (directory / f"{pair_id}.json").write_text(payload, encoding="utf-8")


def synthesize_dataset(in_dir, out_dir, srf: SRF, config: PipelineConfig,
                       threads: int | None = None, log=None) -> dict:
    """Batch-synthesize a train/val dataset tree from a directory of cubes.

    Training scenes are cut into (optionally augmented) patches and pushed
    through the configured substitution/encoding/degradation chain;
    validation scenes stay full frame and follow the doubling rule. Output
    is one flat directory per split with ``<id>.hsc``, ``<id>.png``, and
    ``<id>.json`` provenance. Byte-identical for a fixed config regardless
    of thread count.
    """
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    scene_paths = sorted(in_dir.glob("*.hsc"))
    if not scene_paths:
        raise ValidationError(f"no .hsc scenes found in {in_dir}")
    ids = [p.stem for p in scene_paths]
    train_ids, val_ids = split(ids, config.split_fraction, config.seed)
    train_dir = out_dir / "train"
    val_dir = out_dir / "val"
    train_dir.mkdir(parents=True, exist_ok=True)
    val_dir.mkdir(parents=True, exist_ok=True)
    bit_depth = _pair_bit_depth(config)
    scene_index = {scene_id: i for i, scene_id in enumerate(ids)}

    def process_scene(scene_id: str) -> tuple[str, int]:
        index = scene_index[scene_id]
        cube = read_cube(in_dir / f"{scene_id}.hsc")
        count = 0
        if scene_id in train_set:
            if config.crop is not None:
                cube = center_crop(cube, *config.crop)
            rng = np.random.default_rng([config.seed, index])
            for record in extract_patches(cube, config.patch_size, config.effective_stride,
                                          rng, config.spatial_aug):
                pair = synthesize_pair(
                    record.cube, srf, config, rng,
                    pair_id=f"{scene_id}_{record.y0:04d}_{record.x0:04d}",
                    source_id=scene_id, split_name="train",
                    origin=(record.y0, record.x0), aug_ops=record.ops,
                )
                _write_pair(pair, train_dir, bit_depth)
                count += 1
        else:
            for pair in _validation_pairs(cube, scene_id, index, srf, config):
                _write_pair(pair, val_dir, bit_depth)
                count += 1
        if log is not None:
            log(f"{scene_id}: {count} pairs")
        return scene_id, count

    train_set = set(train_ids)
    if threads is None:
        threads = os.cpu_count() or 1
    counts = {}
    if threads <= 1:
        for scene_id in ids:
            counts.update([process_scene(scene_id)])
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for scene_id, count in pool.map(process_scene, ids):
                counts[scene_id] = count
    return {
        "train_ids": train_ids,
        "val_ids": val_ids,
        "pair_counts": counts,
    }


_ENCODING_PARAM_KEYS = (
    "sigma0", "sigma_slope", "shift_slope", "ref_lambda", "size",
    "eta", "disp_slope", "sigma_major", "sigma_minor", "angle_span",
)


def config_from_mapping(raw: dict) -> PipelineConfig:
    """Build a PipelineConfig from the flat key-value form used in TOML files."""
    known = {
        "patch_size", "stride", "split_fraction", "spatial_aug", "metamer_mode",
        "alpha", "alpha_lo", "alpha_hi", "encoding", "padding", "npe", "bits",
        "codec", "seed", "crop_width", "crop_height", "srf",
        *_ENCODING_PARAM_KEYS,
    }
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    mode_kind = raw.get("metamer_mode", "none")
    if mode_kind == "fixed":
        mode = MetamerMode.fixed(float(raw.get("alpha", 0.0)))
    elif mode_kind == "on_the_fly":
        mode = MetamerMode.on_the_fly(float(raw.get("alpha_lo", -1.0)),
                                      float(raw.get("alpha_hi", 2.0)))
    else:
        mode = MetamerMode(kind=mode_kind)
    kind = raw.get("encoding", "none")
    params = {k: raw[k] for k in _ENCODING_PARAM_KEYS if k in raw}
    encoding = EncodingSpec(kind=kind, params=params, padding=raw.get("padding", "reflect"))
    quant = QuantizationSpec(int(raw["bits"])) if raw.get("bits") else None
    degradation = DegradationConfig(
        npe=float(raw.get("npe", 0.0)),
        quant=quant,
        codec=raw.get("codec") or None,
    )
    crop = None
    if "crop_width" in raw or "crop_height" in raw:
        if not ("crop_width" in raw and "crop_height" in raw):
            raise ValidationError("crop_width and crop_height must be given together")
        crop = (int(raw["crop_width"]), int(raw["crop_height"]))
    return PipelineConfig(
        patch_size=int(raw.get("patch_size", 128)),
        stride=int(raw["stride"]) if raw.get("stride") else None,
        split_fraction=float(raw.get("split_fraction", 0.9)),
        spatial_aug=bool(raw.get("spatial_aug", True)),
        metamer_mode=mode,
        encoding=encoding,
        degradation=degradation,
        crop=crop,
        seed=int(raw.get("seed", 0)),
    )


def load_config(path) -> tuple[PipelineConfig, str | None]:
    """Read a flat TOML config; returns the config and the optional SRF path.

    A relative ``srf`` entry resolves against the config file's directory.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    srf_path = raw.get("srf")
    if srf_path is not None and not os.path.isabs(srf_path):
        srf_path = str(path.parent / srf_path)
    return config_from_mapping(raw), srf_path
