"""Geometric downsampling: pixel features -> per-cell values and back.

Cell order is the topology's cell order (row-major by quad, triangle-major
within the quad); that fixed bijection is the contract downstream
convolution-style consumers rely on.  Cells left pixel-free by deformation
are flagged and filled from the nearest non-empty cell centroid.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import assignment as asg
from .grid import GridError

POOL_MEAN = "mean"
POOL_MAX = "max"


@dataclass(frozen=True)
class CellFeatureGrid:
    """Per-cell feature vectors in topology cell order."""

    values: np.ndarray        # (K, d) float64
    mode: str                 # "mean" | "max"
    empty: np.ndarray         # (K,) bool, cells that received no pixel

    @property
    def n_cells(self):
        return self.values.shape[0]

    @property
    def channels(self):
        return self.values.shape[1]

    def to_bytes(self):
        """Little-endian header (K, d as uint32) then K*d float32."""
        k, d = self.values.shape
        head = struct.pack("<II", k, d)
        return head + self.values.astype("<f4").tobytes()

    @staticmethod
    def from_bytes(buf, mode=POOL_MEAN):
        k, d = struct.unpack_from("<II", buf, 0)
        vals = np.frombuffer(buf, dtype="<f4", count=k * d, offset=8)
        return CellFeatureGrid(
            values=vals.reshape(k, d).astype(np.float64), mode=mode,
            empty=np.zeros(k, dtype=bool))


def hard_labels(grid, width, height):
    """(N,) containing-cell index per pixel (hard point location)."""
    assign = asg.soft_assign(grid, width, height,
                             delta=asg.DEFAULT_DELTA, window_radius=2)
    return assign.hard_label


def grid_pool(grid, features, mode=POOL_MEAN, labels=None):
    """Mean or channel-wise max of the pixels inside each cell."""
    if mode not in (POOL_MEAN, POOL_MAX):
        raise GridError(f"unknown pooling mode {mode!r}")
    if (features.width, features.height) != (grid.width, grid.height):
        raise GridError("feature map extent does not match grid image")
    k = grid.topology.n_cells
    f = features.flat
    d = f.shape[1]
    if labels is None:
        labels = hard_labels(grid, features.width, features.height)

    counts = np.bincount(labels, minlength=k)
    empty = counts == 0
    vals = np.zeros((k, d))
    if mode == POOL_MEAN:
        for c in range(d):
            vals[:, c] = np.bincount(labels, weights=f[:, c], minlength=k)
        vals[~empty] /= counts[~empty, None]
    else:
        vals.fill(-np.inf)
        np.maximum.at(vals, labels, f)
        vals[empty] = 0.0

    if np.any(empty) and not np.all(empty):
        pos = grid.positions
        cent = pos[grid.topology.cells].mean(axis=1)
        src = np.nonzero(~empty)[0]
        for k_empty in np.nonzero(empty)[0]:
            dist = np.linalg.norm(cent[src] - cent[k_empty], axis=1)
            vals[k_empty] = vals[src[np.argmin(dist)]]
    return CellFeatureGrid(values=vals, mode=mode, empty=empty)


def paste_back(grid, cell_values, labels=None):
    """Write each cell's value to every pixel it contains."""
    if cell_values.n_cells != grid.topology.n_cells:
        raise GridError("cell feature grid does not match topology")
    w, h = int(grid.width), int(grid.height)
    if labels is None:
        labels = hard_labels(grid, w, h)
    data = cell_values.values[labels].reshape(h, w, cell_values.channels)
    return asg.FeatureMap(data=data, semantics="rgb")


def label_cells(grid, mask, labels=None):
    """Majority class label per cell from a per-pixel label mask.

    Ties go to background (label 0), as do empty cells (flagged).  Returns
    (cell_labels, foreground_fraction, empty) arrays of length K.
    """
    mask = np.asarray(mask)
    h, w = mask.shape
    if (w, h) != (int(grid.width), int(grid.height)):
        raise GridError("mask extent does not match grid image")
    k = grid.topology.n_cells
    if labels is None:
        labels = hard_labels(grid, w, h)
    flat = mask.reshape(-1).astype(np.int64)
    n_classes = int(flat.max()) + 1

    counts = np.zeros((k, n_classes), dtype=np.int64)
    np.add.at(counts, (labels, flat), 1)
    totals = counts.sum(axis=1)
    empty = totals == 0

    best = counts.max(axis=1)
    # majority requires a unique argmax; any tie for the top count -> 0
    n_top = (counts == best[:, None]).sum(axis=1)
    cell_labels = np.where(n_top == 1, counts.argmax(axis=1), 0)
    cell_labels[empty] = 0

    fg = totals - counts[:, 0]
    frac = np.zeros(k)
    frac[~empty] = fg[~empty] / totals[~empty]
    return cell_labels.astype(np.int64), frac, empty


def rasterize_cell_labels(grid, cell_labels, labels=None):
    """Per-pixel label image implied by per-cell labels."""
    w, h = int(grid.width), int(grid.height)
    if labels is None:
        labels = hard_labels(grid, w, h)
    return np.asarray(cell_labels)[labels].reshape(h, w)
