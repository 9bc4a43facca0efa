"""Command line interface.

Subcommands: partition, trace, pool, serve.  Exit codes: 0 ok, 1 user
error (bad flags, unreadable files), 2 internal failure.  Log level comes
from the DEFGRID_LOG environment variable.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import energy as en
from . import imageio as iio
from . import partition as pt
from . import pipeline as pp
from .grid import GridError, VARIANT_ALTERNATING, VARIANT_CENTER

log = logging.getLogger("defgrid")


def _parse_quads(text):
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise click.BadParameter(f"expected RxC, got {text!r}")


def _config(quads, iters, delta, lam_recons, lam_area, lam_lap, mean_mode,
            variant, seed, window_radius):
    rows, cols = _parse_quads(quads)
    weights = en.LossWeights(
        lambda_recons=lam_recons, lambda_area=lam_area, lambda_lap=lam_lap,
        delta=delta, mean_mode=mean_mode)
    return pp.PipelineConfig(
        rows=rows, cols=cols, variant=variant, iterations=iters,
        seed=seed, weights=weights, window_radius=window_radius)


def _common(fn):
    opts = [
        click.option("--quads", default="20x20", show_default=True,
                     help="grid size as RxC quads"),
        click.option("--iters", default=500, show_default=True),
        click.option("--delta", default=1.0, show_default=True,
                     help="soft-assignment slackness in pixels"),
        click.option("--lambda-recons", "lam_recons", default=0.5,
                     show_default=True),
        click.option("--lambda-area", "lam_area", default=0.02,
                     show_default=True),
        click.option("--lambda-lap", "lam_lap", default=0.1,
                     show_default=True),
        click.option("--mean-mode", default=en.MEAN_SOFT_GRAD,
                     type=click.Choice([en.MEAN_SOFT_GRAD,
                                        en.MEAN_STOP_GRAD])),
        click.option("--variant", default=VARIANT_ALTERNATING,
                     type=click.Choice([VARIANT_ALTERNATING,
                                        VARIANT_CENTER])),
        click.option("--seed", default=0, show_default=True),
        click.option("--window-radius", default=2, show_default=True),
        click.option("--out", required=True,
                     type=click.Path(file_okay=False)),
        click.option("--trace-energy", is_flag=True,
                     help="write per-iteration losses to trace.jsonl"),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _load_image(path):
    try:
        return iio.load_image(path)
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"cannot read image {path}: {exc}")


def _write_common(outdir, result, trace_energy):
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "grid.json").write_text(result["grid_json"])
    if trace_energy:
        (outdir / "trace.jsonl").write_text(
            result["trace"].to_json_lines() + "\n")


@click.group()
def cli():
    """Deformable-grid image toolkit."""
    logging.basicConfig(level=os.environ.get("DEFGRID_LOG", "WARNING"))


@cli.command()
@click.option("--image", required=True, type=click.Path(exists=True,
                                                        dir_okay=False))
@click.option("--superpixels", default=None, type=int,
              help="target superpixel count")
@click.option("--threshold", default=None, type=float,
              help="affinity stopping threshold")
@click.option("--sigma", default=pt.DEFAULT_SIGMA, show_default=True)
@click.option("--gt", default=None, type=click.Path(exists=True),
              help="ground-truth label map (PGM) for metrics.csv")
@click.option("--overlay", is_flag=True, help="write boundary overlay PNG")
@_common
def partition(image, superpixels, threshold, sigma, gt, overlay, out,
              trace_energy, **kw):
    """Deform a grid and cluster its cells into polygonal superpixels."""
    img = _load_image(image)
    if superpixels is None and threshold is None:
        superpixels = 36
    cfg = _config(**kw)
    result = pp.run_partition(img, cfg, n_superpixels=superpixels,
                              threshold=threshold, sigma=sigma)
    outdir = Path(out)
    _write_common(outdir, result, trace_energy)
    iio.save_pgm(outdir / "labels.pgm", result["segmentation"].ids,
                 maxval=65535)
    if result["warned"]:
        click.echo("warning: target exceeds cell count; no merges done",
                   err=True)
    if overlay:
        iio.save_png(outdir / "overlay.png",
                     pp.draw_boundary_overlay(img, result["segmentation"]))
    if gt:
        gt_ids = iio.load_pgm(gt)
        rows = pp.metrics_rows(Path(image).name, result["segmentation"],
                               gt_ids)
        (outdir / "metrics.csv").write_text(pp.metrics_csv(rows))


@cli.command()
@click.option("--image", required=True, type=click.Path(exists=True,
                                                        dir_okay=False))
@click.option("--mask", default=None, type=click.Path(exists=True),
              help="binary mask for DT energy + automatic seeds")
@click.option("--seeds", default=None, type=click.Path(exists=True),
              help="JSON file with [[x, y], ...] seed points")
@click.option("--snap-k", default=6, show_default=True)
@click.option("--n-seeds", default=40, show_default=True)
@click.option("--gt", default=None, type=click.Path(exists=True))
@_common
def trace(image, mask, seeds, snap_k, n_seeds, gt, out, trace_energy, **kw):
    """Trace a minimal-energy object polygon along grid edges."""
    if mask is None and seeds is None:
        raise click.UsageError("need --mask or --seeds")
    img = _load_image(image)
    mask_arr = None
    seed_pts = None
    if mask:
        mask_arr = np.asarray(iio.load_pgm(mask)) > 0
    if seeds:
        seed_pts = json.loads(Path(seeds).read_text())
    cfg = _config(**kw)
    result = pp.run_trace(img, cfg, mask=mask_arr, seeds=seed_pts,
                          snap_k=snap_k, n_seeds=n_seeds)
    outdir = Path(out)
    _write_common(outdir, result, trace_energy)
    (outdir / "polygon.json").write_text(result["polygon"].to_json())
    iio.save_png(outdir / "mask.png", result["polygon"].mask * 255)
    if gt:
        gt_mask = np.asarray(iio.load_pgm(gt)) > 0
        miou = pt.metric_miou(result["polygon"].mask > 0, gt_mask)
        _, _, f1 = pt.metric_boundary(
            (result["polygon"].mask > 0).astype(int),
            gt_mask.astype(int), 1)
        click.echo(f"miou={miou:.4f} f1px={f1:.4f}")


@cli.command()
@click.option("--image", required=True, type=click.Path(exists=True,
                                                        dir_okay=False))
@click.option("--mode", default="mean", type=click.Choice(["mean", "max"]),
              show_default=True)
@_common
def pool(image, mode, out, trace_energy, **kw):
    """Pool pixel features into grid cells and paste them back."""
    img = _load_image(image)
    cfg = _config(**kw)
    result = pp.run_pool(img, cfg, mode=mode)
    outdir = Path(out)
    _write_common(outdir, result, trace_energy)
    (outdir / "cells.bin").write_bytes(result["cells"].to_bytes())
    iio.save_png(outdir / "recon.png", result["reconstruction"].data)


@cli.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(port, host):
    """Run the annotation HTTP service."""
    import uvicorn

    from .server import create_app
    uvicorn.run(create_app(), host=host, port=port,
                log_level=os.environ.get("DEFGRID_LOG", "warning").lower())


def main():
    try:
        cli(standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except GridError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:                       # noqa: BLE001
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
