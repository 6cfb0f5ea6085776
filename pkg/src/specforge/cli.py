"""Command-line interface: batch access to every pipeline operation.

Exit codes: 0 success, 1 validation problem (including bad flags),
2 file/format problem, 3 codec subprocess failure. Output files are
written via temp-and-rename, so failures never leave partial files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys

import click
import numpy as np

from . import __version__
from .colorimetry import QuantizationSpec, project, quantize
from .cube import read_cube, read_rgb, read_srf, write_cube, write_rgb
from .degrade import DegradationConfig, apply_chain
from .errors import CodecError, FormatError, IoError, ValidationError
from .metamer import decompose, generate, sample_alpha
from .metrics import report
from .optics import delta_stack, read_psf, write_psf, EncodingSpec, ENCODING_KINDS
from .oracle import form_aberrated_dense, projector_dense
from .pipeline import encoding_sweep, load_config, synthesize_dataset

FORMAT_VERSIONS = "HSC1, PSF1"


def _json_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _print_json(payload: dict) -> None:
    click.echo(json.dumps({k: _json_safe(v) for k, v in payload.items()}, sort_keys=True))


@click.group()
@click.version_option(version=__version__, message=f"%(prog)s %(version)s (formats: {FORMAT_VERSIONS})")
def cli():
    """Spectral image formation, metamer, and dataset synthesis toolkit."""


@cli.command("project")
@click.option("--in", "in_path", required=True, type=click.Path(), help="Input HSC cube.")
@click.option("--srf", "srf_path", required=True, type=click.Path(), help="Response CSV.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output PNG.")
@click.option("--bits", type=click.Choice(["8", "16"]), default="16", show_default=True)
def project_cmd(in_path, srf_path, out_path, bits):
    """Project a cube to RGB (no optics) and store it quantized."""
    cube = read_cube(in_path)
    srf = read_srf(srf_path)
    image = quantize(project(cube, srf), QuantizationSpec(int(bits)))
    write_rgb(image, out_path, bit_depth=int(bits))


@cli.group("psf")
def psf_group():
    """PSF stack utilities."""


@psf_group.command("gen")
@click.option("--kind", type=click.Choice(ENCODING_KINDS), required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--wl-start", type=float, default=400.0, show_default=True)
@click.option("--wl-stop", type=float, default=700.0, show_default=True)
@click.option("--wl-step", type=float, default=10.0, show_default=True)
@click.option("--size", type=int, default=None, help="Odd kernel side length.")
@click.option("--padding", type=click.Choice(["reflect", "circular"]), default="reflect",
              show_default=True)
@click.option("--sigma0", type=float, default=None, help="Base blur sigma [px] (chromatic).")
@click.option("--sigma-slope", type=float, default=None, help="Blur growth [px/nm] (chromatic).")
@click.option("--shift-slope", type=float, default=None, help="Lateral shift [px/nm] (chromatic).")
@click.option("--ref-lambda", type=float, default=None, help="Reference wavelength [nm].")
@click.option("--eta", type=float, default=None, help="First-order energy fraction (grating).")
@click.option("--disp-slope", type=float, default=None, help="Dispersion [px/nm] (grating).")
@click.option("--sigma-major", type=float, default=None, help="Major-axis sigma [px] (rotation).")
@click.option("--sigma-minor", type=float, default=None, help="Minor-axis sigma [px] (rotation).")
@click.option("--angle-span", type=float, default=None, help="Total rotation [rad] (rotation).")
def psf_gen(kind, out_path, wl_start, wl_stop, wl_step, size, padding, **params):
    """Generate a parametric spectral PSF stack and write its container."""
    if wl_step <= 0 or wl_stop < wl_start:
        raise ValidationError("need wl_start <= wl_stop and wl_step > 0")
    wavelengths = np.arange(wl_start, wl_stop + wl_step / 2, wl_step)
    if kind == "none":
        stack = delta_stack(wavelengths, size=size or 1, padding=padding)
    else:
        given = {k: v for k, v in params.items() if v is not None}
        if size is not None:
            given["size"] = size
        stack = EncodingSpec(kind=kind, params=given, padding=padding).build(wavelengths)
    write_psf(stack, out_path)
    click.echo(f"wrote {stack.bands}-band {stack.kernel_height}x{stack.kernel_width} stack "
               f"to {out_path}", err=True)


@cli.command("form")
@click.option("--in", "in_path", required=True, type=click.Path(), help="Input HSC cube.")
@click.option("--srf", "srf_path", required=True, type=click.Path(), help="Response CSV.")
@click.option("--psf", "psf_path", required=True, type=click.Path(), help="PSF container.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output PNG.")
@click.option("--bits", type=click.Choice(["8", "16"]), default="16", show_default=True)
def form_cmd(in_path, srf_path, psf_path, out_path, bits):
    """Form an aberrated RGB image through a PSF stack."""
    from .optics import form_aberrated

    cube = read_cube(in_path)
    srf = read_srf(srf_path)
    stack = read_psf(psf_path)
    image = quantize(form_aberrated(cube, stack, srf), QuantizationSpec(int(bits)))
    write_rgb(image, out_path, bit_depth=int(bits))


@cli.command("metamer")
@click.option("--in", "in_path", required=True, type=click.Path(), help="Input HSC cube.")
@click.option("--srf", "srf_path", required=True, type=click.Path(), help="Response CSV.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output HSC cube.")
@click.option("--alpha", type=float, default=None, help="Fixed black-scaling coefficient.")
@click.option("--random", "random_alpha", is_flag=True, help="Draw the coefficient uniformly.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--range", "alpha_range", default="-1,2", show_default=True,
              help="lo,hi for --random.")
def metamer_cmd(in_path, srf_path, out_path, alpha, random_alpha, seed, alpha_range):
    """Generate a metamer cube and report the clipping outcome as JSON."""
    if (alpha is None) == (not random_alpha):
        raise ValidationError("give exactly one of --alpha or --random")
    cube = read_cube(in_path)
    srf = read_srf(srf_path)
    if random_alpha:
        try:
            lo, hi = (float(part) for part in alpha_range.split(","))
        except ValueError as exc:
            raise ValidationError(f"--range expects 'lo,hi', got {alpha_range!r}") from exc
        alpha = sample_alpha(np.random.default_rng(seed), lo, hi)
    result = generate(cube, srf, alpha)
    write_cube(result.cube, out_path)
    _print_json({
        "alpha": alpha,
        "clipped_pixel_count": result.clipped_pixel_count,
        "exact": result.exact,
        "rgb_psnr_vs_source": result.rgb_psnr_vs_source,
    })


@cli.command("degrade")
@click.option("--in", "in_path", required=True, type=click.Path(), help="Input PNG.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output PNG.")
@click.option("--npe", type=float, default=0.0, show_default=True,
              help="Full-scale photon electrons; 0 disables noise.")
@click.option("--bits", type=click.Choice(["8", "16"]), default="16", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--codec", default=None, help="External command with {in} {out} placeholders.")
def degrade_cmd(in_path, out_path, npe, bits, seed, codec):
    """Apply the sensor degradation chain to an RGB image."""
    image = read_rgb(in_path)
    config = DegradationConfig(npe=npe, quant=QuantizationSpec(int(bits)), codec=codec, seed=seed)
    write_rgb(apply_chain(image, config), out_path, bit_depth=int(bits))


@cli.command("evaluate")
@click.option("--est", "est_path", required=True, type=click.Path())
@click.option("--gt", "gt_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def evaluate_cmd(est_path, gt_path, as_json):
    """Evaluate a reconstructed cube against ground truth."""
    est = read_cube(est_path)
    gt = read_cube(gt_path)
    rep = report(est, gt)
    payload = {
        "mrae": rep.mrae,
        "rmse": rep.rmse,
        "psnr_db": rep.psnr_db,
        "sam_rad": rep.sam_rad,
        "l1": rep.l1,
        "pixels_excluded_sam": rep.pixels_excluded_sam,
        "denom_floored_mrae": rep.denom_floored_mrae,
    }
    if as_json:
        _print_json(payload)
    else:
        for key, value in payload.items():
            click.echo(f"{key}: {_json_safe(value)}")


@cli.command("synth")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--in", "in_dir", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--threads", type=int, default=None,
              help="Worker cap; defaults to $SPECFORGE_THREADS or the core count.")
def synth_cmd(config_path, in_dir, out_dir, threads):
    """Batch-synthesize a train/val dataset tree from a scene directory."""
    from .cube import read_srf as _read_srf

    config, srf_path = load_config(config_path)
    if srf_path is None:
        raise ValidationError("config must name an 'srf' CSV for synthesis")
    srf = _read_srf(srf_path)
    if threads is None:
        env = os.environ.get("SPECFORGE_THREADS")
        threads = int(env) if env else None
    summary = synthesize_dataset(in_dir, out_dir, srf, config, threads=threads,
                                 log=lambda line: click.echo(line, err=True))
    total = sum(summary["pair_counts"].values())
    click.echo(f"{total} pairs ({len(summary['train_ids'])} train scenes, "
               f"{len(summary['val_ids'])} val scenes)", err=True)


@cli.command("sweep")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(),
              help="CSV with columns pair_id,a,b of cube paths.")
@click.option("--srf", "srf_path", required=True, type=click.Path())
@click.option("--encoding", "encodings", multiple=True,
              help="label=psf-path, or the bare label 'none'; repeatable.")
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Output CSV; stdout when omitted.")
def sweep_cmd(manifest_path, srf_path, encodings, out_path):
    """Tabulate metamer separability across encodings."""
    srf = read_srf(srf_path)
    base = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(path):
        return path if os.path.isabs(path) else os.path.join(base, path)

    try:
        with open(manifest_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {manifest_path!r}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["pair_id", "a", "b"]:
        raise FormatError(f"{manifest_path!r}: expected header pair_id,a,b")
    pairs = [(row[0], read_cube(resolve(row[1])), read_cube(resolve(row[2])))
             for row in rows[1:] if row]

    if not encodings:
        encodings = ("none",)
    labeled = []
    for item in encodings:
        if item == "none":
            labeled.append(("none", None))
        elif "=" in item:
            label, path = item.split("=", 1)
            labeled.append((label, read_psf(path)))
        else:
            raise ValidationError(f"--encoding needs 'none' or label=path, got {item!r}")

    table = encoding_sweep(pairs, srf, labeled)
    lines = ["pair_id,encoding,max_abs_diff,mean_abs_diff"]
    lines += [f"{r.pair_id},{r.encoding},{r.max_abs_diff:.9g},{r.mean_abs_diff:.9g}"
              for r in table]
    body = "\n".join(lines) + "\n"
    if out_path is None:
        click.echo(body, nl=False)
    else:
        from .cube import _atomic_write_bytes

        _atomic_write_bytes(out_path, body.encode("utf-8"))


@cli.command("oracle-check")
@click.option("--size", type=int, default=8, show_default=True, help="Test image side length.")
@click.option("--seed", type=int, default=0, show_default=True)
def oracle_check_cmd(size, seed):
    """Smoke-check the fast paths against the dense reference implementations."""
    from .cube import SRF, SpectralCube
    from .optics import PSFStack, form_aberrated

    rng = np.random.default_rng(seed)
    bands = 5
    wavelengths = np.linspace(400.0, 700.0, bands)
    cube = SpectralCube(rng.random((bands, size, size)), wavelengths)
    srf = SRF(wavelengths=wavelengths, q=rng.random((bands, 3)) + 0.05)
    kernels = rng.random((bands, 3, 3))
    kernels /= kernels.sum(axis=(1, 2), keepdims=True)
    stack = PSFStack(wavelengths=wavelengths, kernels=kernels, padding="circular")

    fast = form_aberrated(cube, stack, srf)
    dense = form_aberrated_dense(cube, kernels, srf)
    gap = float(np.max(np.abs(fast.data - dense.data)))
    if gap > 1e-6:
        raise ValidationError(f"formation disagrees with the dense oracle by {gap}")
    click.echo(f"formation vs dense oracle: max abs diff {gap:.3e} (ok)")

    projector = projector_dense(srf)
    decomp = decompose(cube, srf)
    oracle_fundamental = np.tensordot(projector, cube.data, axes=(1, 0))
    gap = float(np.max(np.abs(oracle_fundamental - decomp.fundamental.data)))
    if gap > 1e-9:
        raise ValidationError(f"decomposition disagrees with the dense projector by {gap}")
    click.echo(f"decomposition vs dense projector: max abs diff {gap:.3e} (ok)")


def main(argv=None) -> int:
    """CLI entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 130
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (FormatError, IoError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except CodecError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
