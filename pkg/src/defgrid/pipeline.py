"""End-to-end pipelines shared by the CLI and the HTTP service.

Keeping these here guarantees both surfaces produce identical artifacts
for identical inputs (the parity property the tests pin down).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import assignment as asg
from . import energy as en
from . import optimizer as opt
from . import partition as pt
from . import pooling as pl
from . import tracer as tr
from .grid import VARIANT_ALTERNATING, build_uniform_grid, grid_to_json


@dataclass(frozen=True)
class PipelineConfig:
    rows: int = 20
    cols: int = 20
    variant: str = VARIANT_ALTERNATING
    iterations: int = 500
    seed: int = 0
    weights: en.LossWeights = field(default_factory=en.LossWeights)
    window_radius: int = asg.DEFAULT_WINDOW_RADIUS

    def optimizer_config(self):
        return opt.OptimizerConfig(
            iterations=self.iterations, seed=self.seed,
            weights=self.weights, window_radius=self.window_radius)


def deform_image_grid(image, config):
    """Uniform grid -> optimized grid for an (H, W, 3) image in [0, 1]."""
    h, w = image.shape[:2]
    grid = build_uniform_grid(config.rows, config.cols, w, h, config.variant)
    features = asg.FeatureMap.from_rgb(image)
    trace = opt.deform(grid, features, config.optimizer_config())
    return trace, features


def run_partition(image, config, n_superpixels=None, threshold=None,
                  sigma=pt.DEFAULT_SIGMA):
    """build -> deform -> agglomerate; returns artifacts for writing."""
    trace, features = deform_image_grid(image, config)
    grid = trace.grid
    assign = asg.soft_assign(grid, features.width, features.height,
                             config.weights.delta, config.window_radius)
    stats = asg.cell_stats(assign, features)
    graph = pt.build_affinity(grid, features, stats, sigma)
    seg, polys, warned = pt.agglomerate(
        graph, grid, assign.hard_label, target=n_superpixels,
        threshold=threshold)
    return {
        "grid": grid, "grid_json": grid_to_json(grid), "trace": trace,
        "segmentation": seg, "polygons": polys, "warned": warned,
    }


def run_trace(image, config, mask=None, seeds=None, snap_k=6, n_seeds=40):
    """build -> deform -> DT energy -> snap -> Dijkstra closed path."""
    if mask is None and seeds is None:
        raise tr.GridError("need either a mask or explicit seed points")
    trace, features = deform_image_grid(image, config)
    grid = trace.grid
    if mask is not None:
        energy = tr.distance_transform(mask)
        if seeds is None:
            seeds = tr.sample_seed_points(mask, n_seeds)
    else:
        energy = None
    if energy is None:
        # seeds without a mask: zero-energy ridge through the seed points
        energy = tr.energy_from_points(seeds, features.width, features.height)
    ve = tr.vertex_energy(grid, energy)
    edges, weights = tr.edge_energy(grid, energy)
    snapped = tr.snap_seeds(grid, ve, seeds, k=snap_k)
    polygon = tr.trace_path(grid, edges, weights, snapped)
    return {
        "grid": grid, "grid_json": grid_to_json(grid), "trace": trace,
        "energy": energy, "snapped": snapped, "polygon": polygon,
    }


def run_pool(image, config, mode=pl.POOL_MEAN):
    """build -> deform -> pool -> paste-back reconstruction."""
    trace, features = deform_image_grid(image, config)
    grid = trace.grid
    labels = pl.hard_labels(grid, features.width, features.height)
    cells = pl.grid_pool(grid, features, mode, labels=labels)
    recon = pl.paste_back(grid, cells, labels=labels)
    return {
        "grid": grid, "grid_json": grid_to_json(grid), "trace": trace,
        "cells": cells, "reconstruction": recon,
    }


def draw_boundary_overlay(image, segmentation):
    """Image with segment boundaries painted red, for quick inspection."""
    out = np.asarray(image, dtype=np.float64).copy()
    b = pt.segment_boundaries(segmentation.ids)
    out[b] = [1.0, 0.0, 0.0]
    return out


def metrics_rows(name, segmentation, gt_ids, tolerance=3):
    """CSV rows (image, n, asa, bp, br, f) for one segmentation."""
    asa = pt.metric_asa(segmentation, gt_ids)
    bp, br, f = pt.metric_boundary(segmentation, gt_ids, tolerance)
    return [(name, segmentation.n_segments, asa, bp, br, f)]


def metrics_csv(rows):
    lines = ["image,n,asa,bp,br,f"]
    for name, n, asa, bp, br, f in rows:
        lines.append(f"{name},{n},{asa:.6f},{bp:.6f},{br:.6f},{f:.6f}")
    return "\n".join(lines) + "\n"
