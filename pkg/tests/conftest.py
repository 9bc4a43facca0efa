from __future__ import annotations

import numpy as np
import pytest

from defgrid import assignment as asg
from defgrid.grid import build_uniform_grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def two_tone_image(width=32, height=32, split=14, noise=0.0, seed=0):
    """Vertical two-tone fixture; true boundary at x = split (edge coords)."""
    rng = np.random.default_rng(seed)
    img = np.empty((height, width, 3))
    img[:, :split] = [0.85, 0.25, 0.2]
    img[:, split:] = [0.15, 0.35, 0.8]
    if noise:
        img += rng.normal(0.0, noise, img.shape)
    return np.clip(img, 0.0, 1.0)


def random_image(width, height, seed=0, blocks=4):
    """Piecewise-smooth random image (blocky noise, bilinearly upsampled)."""
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(0, 1, (blocks, blocks, 3))
    ys = np.linspace(0, blocks - 1, height)
    xs = np.linspace(0, blocks - 1, width)
    y0 = np.clip(ys.astype(int), 0, blocks - 2)
    x0 = np.clip(xs.astype(int), 0, blocks - 2)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    c00 = coarse[y0][:, x0]
    c01 = coarse[y0][:, x0 + 1]
    c10 = coarse[y0 + 1][:, x0]
    c11 = coarse[y0 + 1][:, x0 + 1]
    return (c00 * (1 - fy) * (1 - fx) + c01 * (1 - fy) * fx
            + c10 * fy * (1 - fx) + c11 * fy * fx)


def jittered_grid(rows, cols, width, height, seed=0, scale=0.15,
                  variant="alternating"):
    """Uniform grid with random valid offsets (small enough not to flip)."""
    grid = build_uniform_grid(rows, cols, width, height, variant)
    rng = np.random.default_rng(seed)
    off = rng.uniform(-scale, scale, grid.offsets.shape) * grid.pitch
    off[grid.frozen_mask] = 0.0
    return grid.with_offsets(off)


@pytest.fixture
def small_grid():
    return jittered_grid(3, 3, 24, 24, seed=7)


@pytest.fixture
def small_features():
    return asg.FeatureMap.from_rgb(random_image(24, 24, seed=3))
