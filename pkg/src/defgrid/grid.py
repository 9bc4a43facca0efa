"""Triangular grid topology and deformed vertex state.

The grid covers the image plane with a fixed triangulation of a rows x cols
quad lattice.  Only vertex positions move; connectivity never changes.
Coordinates are decimal pixels, origin top-left, x rightward, y downward.
With that orientation the construction winding (see `_quad_triangles`) gives
every triangle a positive shoelace area, and a grid is valid exactly when
all areas stay positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

DEGENERATE_AREA = 1e-9

VARIANT_ALTERNATING = "alternating"
VARIANT_CENTER = "center"
_VARIANTS = (VARIANT_ALTERNATING, VARIANT_CENTER)


class GridError(ValueError):
    """Invalid grid arguments or state."""


class DegenerateCellError(GridError):
    """A triangle collapsed below the area floor."""

    def __init__(self, cell_index):
        self.cell_index = cell_index
        super().__init__(f"degenerate triangle in cell {cell_index}")


def _quad_triangles(r, c, rows, cols, variant, center_base):
    """Vertex-index triples for quad (r, c), positively wound."""
    w = cols + 1
    tl = r * w + c
    tr = tl + 1
    bl = tl + w
    br = bl + 1
    if variant == VARIANT_CENTER:
        ctr = center_base + r * cols + c
        return [(tl, tr, ctr), (tr, br, ctr), (br, bl, ctr), (bl, tl, ctr)]
    if (r + c) % 2 == 0:
        return [(tl, tr, br), (tl, br, bl)]
    return [(tl, tr, bl), (tr, br, bl)]


@dataclass(frozen=True)
class GridTopology:
    """Immutable connectivity of a triangulated quad lattice.

    cells are ordered row-major by quad, then by triangle within the quad;
    downstream consumers (pooling, partition) rely on that ordering.
    """

    rows: int
    cols: int
    variant: str
    cells: np.ndarray                  # (K, 3) int vertex indices
    vertex_count: int
    adjacency: tuple                   # per-vertex sorted tuple of neighbours
    cell_adjacency: np.ndarray         # (E, 2) int cell-index pairs, u < v
    neighbor_index: np.ndarray = field(repr=False, default=None)   # (n, maxdeg)
    neighbor_valid: np.ndarray = field(repr=False, default=None)   # (n, maxdeg) bool

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def cells_per_quad(self):
        return 4 if self.variant == VARIANT_CENTER else 2

    def quad_of_cell(self, k):
        """(row, col) of the quad that cell k belongs to."""
        q = k // self.cells_per_quad
        return q // self.cols, q % self.cols

    def cells_of_quad(self, r, c):
        base = (r * self.cols + c) * self.cells_per_quad
        return np.arange(base, base + self.cells_per_quad)


def build_topology(rows, cols, variant=VARIANT_ALTERNATING):
    if rows < 1 or cols < 1:
        raise GridError(f"grid needs at least 1x1 quads, got {rows}x{cols}")
    if variant not in _VARIANTS:
        raise GridError(f"unknown topology variant {variant!r}")

    lattice = (rows + 1) * (cols + 1)
    n = lattice + (rows * cols if variant == VARIANT_CENTER else 0)

    cells = []
    for r in range(rows):
        for c in range(cols):
            cells.extend(_quad_triangles(r, c, rows, cols, variant, lattice))
    cells = np.asarray(cells, dtype=np.int64)

    adjacency = [set() for _ in range(n)]
    edge_to_cells = {}
    for k, (a, b, c) in enumerate(cells):
        for u, v in ((a, b), (b, c), (c, a)):
            adjacency[u].add(int(v))
            adjacency[v].add(int(u))
            key = (min(u, v), max(u, v))
            edge_to_cells.setdefault(key, []).append(k)
    cell_adj = sorted(
        (min(ks), max(ks)) for ks in edge_to_cells.values() if len(ks) == 2
    )
    cell_adj = np.asarray(cell_adj, dtype=np.int64).reshape(-1, 2)
    adjacency = tuple(tuple(sorted(s)) for s in adjacency)

    maxdeg = max(len(a) for a in adjacency)
    nbr = np.zeros((n, maxdeg), dtype=np.int64)
    ok = np.zeros((n, maxdeg), dtype=bool)
    for i, a in enumerate(adjacency):
        nbr[i, : len(a)] = a
        ok[i, : len(a)] = True

    return GridTopology(
        rows=rows, cols=cols, variant=variant, cells=cells,
        vertex_count=n, adjacency=adjacency, cell_adjacency=cell_adj,
        neighbor_index=nbr, neighbor_valid=ok,
    )


@dataclass(frozen=True)
class DeformedGrid:
    """Fixed topology plus movable vertex positions on a width x height image.

    position = base + offset.  `freeze_x` / `freeze_y` mark the coordinates
    pinned by the boundary rule: boundary vertices slide only along their
    image edge and the four corners never move.
    """

    topology: GridTopology
    base_positions: np.ndarray         # (n, 2) float64
    offsets: np.ndarray                # (n, 2) float64
    width: float
    height: float
    freeze_x: np.ndarray = field(repr=False, default=None)
    freeze_y: np.ndarray = field(repr=False, default=None)

    @property
    def positions(self):
        return self.base_positions + self.offsets

    @property
    def pitch(self):
        return min(self.width / self.topology.cols,
                   self.height / self.topology.rows)

    @property
    def frozen_mask(self):
        """(n, 2) bool, True where a coordinate is pinned."""
        return np.stack([self.freeze_x, self.freeze_y], axis=1)

    def with_offsets(self, offsets):
        offsets = np.asarray(offsets, dtype=np.float64)
        if offsets.shape != self.base_positions.shape:
            raise GridError(
                f"offsets shape {offsets.shape} != {self.base_positions.shape}")
        return replace(self, offsets=offsets)

    def is_valid(self, area_floor=DEGENERATE_AREA):
        return bool(np.all(signed_areas(self) > area_floor))


def constrain_offsets(grid, offsets, max_offset_px=None):
    """Project raw offsets onto the feasible set.

    Zeroes frozen components, optionally clamps each component to
    +-max_offset_px, and keeps every position inside [0,W]x[0,H].
    """
    off = np.array(offsets, dtype=np.float64)
    if max_offset_px is not None:
        np.clip(off, -max_offset_px, max_offset_px, out=off)
    off[grid.freeze_x, 0] = 0.0
    off[grid.freeze_y, 1] = 0.0
    pos = grid.base_positions + off
    np.clip(pos[:, 0], 0.0, grid.width, out=pos[:, 0])
    np.clip(pos[:, 1], 0.0, grid.height, out=pos[:, 1])
    return pos - grid.base_positions


def build_uniform_grid(rows, cols, width, height, variant=VARIANT_ALTERNATING):
    """Uniform lattice grid with zero offsets covering the whole image."""
    if width <= 0 or height <= 0:
        raise GridError(f"image extent must be positive, got {width}x{height}")
    topo = build_topology(rows, cols, variant)

    xs = np.arange(cols + 1) * (width / cols)
    ys = np.arange(rows + 1) * (height / rows)
    gx, gy = np.meshgrid(xs, ys)
    base = np.stack([gx.ravel(), gy.ravel()], axis=1)
    if variant == VARIANT_CENTER:
        cx = (np.arange(cols) + 0.5) * (width / cols)
        cy = (np.arange(rows) + 0.5) * (height / rows)
        gx, gy = np.meshgrid(cx, cy)
        base = np.concatenate(
            [base, np.stack([gx.ravel(), gy.ravel()], axis=1)])

    n = topo.vertex_count
    lattice = (rows + 1) * (cols + 1)
    rr = np.arange(lattice) // (cols + 1)
    cc = np.arange(lattice) % (cols + 1)
    freeze_x = np.zeros(n, dtype=bool)
    freeze_y = np.zeros(n, dtype=bool)
    freeze_x[:lattice] = (cc == 0) | (cc == cols)
    freeze_y[:lattice] = (rr == 0) | (rr == rows)

    return DeformedGrid(
        topology=topo, base_positions=base,
        offsets=np.zeros((n, 2)), width=float(width), height=float(height),
        freeze_x=freeze_x, freeze_y=freeze_y,
    )


# ---------------------------------------------------------------------------
# geometric predicates
# ---------------------------------------------------------------------------

def signed_areas(grid_or_positions, cells=None):
    """Shoelace signed area of every cell; positive under construction winding."""
    if cells is None:
        pos = grid_or_positions.positions
        cells = grid_or_positions.topology.cells
    else:
        pos = np.asarray(grid_or_positions, dtype=np.float64)
    a = pos[cells[:, 0]]
    b = pos[cells[:, 1]]
    c = pos[cells[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def barycentric(point, triangle, cell_index=None):
    """Barycentric weights of `point` w.r.t. a (3, 2) triangle.

    Weights sum to 1; the point is inside the triangle iff all weights lie
    in [0, 1].  Raises DegenerateCellError if the triangle is collapsed.
    """
    tri = np.asarray(triangle, dtype=np.float64)
    p = np.asarray(point, dtype=np.float64)
    a, b, c = tri
    den = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if abs(den) <= 2 * DEGENERATE_AREA:
        raise DegenerateCellError(cell_index)
    wb = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / den
    wc = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / den
    return np.array([1.0 - wb - wc, wb, wc])


def segment_l1_distance(point, seg_start, seg_end):
    """L1 norm of the vector from `point` to its Euclidean-closest point
    on the segment.  A zero-length segment is treated as a point."""
    p = np.asarray(point, dtype=np.float64)
    s = np.asarray(seg_start, dtype=np.float64)
    e = np.asarray(seg_end, dtype=np.float64)
    u = e - s
    uu = float(u @ u)
    t = 0.0 if uu == 0.0 else float(np.clip((p - s) @ u / uu, 0.0, 1.0))
    q = s + t * u
    return float(np.abs(p - q).sum())


# ---------------------------------------------------------------------------
# interchange format
# ---------------------------------------------------------------------------

def grid_to_json(grid):
    """Serialize to the grid interchange JSON (deformed vertex positions)."""
    obj = {
        "rows": grid.topology.rows,
        "cols": grid.topology.cols,
        "width": grid.width,
        "height": grid.height,
        "variant": grid.topology.variant,
        "vertices": [[round(float(x), 9), round(float(y), 9)]
                     for x, y in grid.positions],
        "cells": [[int(a), int(b), int(c)] for a, b, c in grid.topology.cells],
    }
    return json.dumps(obj, separators=(",", ":"), sort_keys=True)


def grid_from_json(text):
    obj = json.loads(text)
    grid = build_uniform_grid(obj["rows"], obj["cols"], obj["width"],
                              obj["height"], obj.get("variant",
                                                     VARIANT_ALTERNATING))
    verts = np.asarray(obj["vertices"], dtype=np.float64)
    if verts.shape != grid.base_positions.shape:
        raise GridError("vertex count does not match declared lattice")
    return grid.with_offsets(verts - grid.base_positions)
