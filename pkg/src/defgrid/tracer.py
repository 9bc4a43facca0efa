"""Boundary tracing on the grid.

An energy map (distance to the nearest mask-boundary pixel) is sampled at
grid vertices and along grid edges; seed points snap to low-energy nearby
vertices and Dijkstra connects consecutive seeds along grid edges into a
closed minimal-energy polygon, which can be rasterized back to a mask.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import GridError


class NoBoundaryError(GridError):
    """Mask is uniform: there is no boundary to trace."""


class DegenerateSeedsError(GridError):
    """Too few distinct snapped vertices to trace."""


@dataclass(frozen=True)
class EnergyMap:
    """Per-pixel distance-transform energy, zero exactly on boundary pixels."""

    values: np.ndarray        # (H, W) float64

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class TracedPolygon:
    """Closed path of grid vertex indices with its energy and raster mask."""

    vertex_indices: np.ndarray          # (M,) first != last; closure implied
    vertices: np.ndarray                # (M, 2) positions
    total_energy: float
    segment_energies: np.ndarray        # energy of each seed-to-seed segment
    mask: np.ndarray                    # (H, W) uint8

    def to_json(self):
        return json.dumps({
            "vertices": [[round(float(x), 9), round(float(y), 9)]
                         for x, y in self.vertices],
            "vertex_indices": [int(i) for i in self.vertex_indices],
            "energy": round(float(self.total_energy), 9),
        }, separators=(",", ":"), sort_keys=True)


def boundary_pixels(mask):
    """Foreground pixels 4-adjacent to background (inside the image)."""
    m = np.asarray(mask).astype(bool)
    diff = np.zeros_like(m)
    diff[:-1] |= m[:-1] != m[1:]
    diff[1:] |= m[1:] != m[:-1]
    diff[:, :-1] |= m[:, :-1] != m[:, 1:]
    diff[:, 1:] |= m[:, 1:] != m[:, :-1]
    return m & diff


def distance_transform(mask):
    """Exact Euclidean distance of every pixel to the nearest boundary pixel."""
    bnd = boundary_pixels(mask)
    if not bnd.any():
        raise NoBoundaryError("mask has no boundary pixel")
    return EnergyMap(values=ndimage.distance_transform_edt(~bnd))


def energy_from_points(points, width, height):
    """DT energy from a set of (x, y) stroke/boundary points (scribbles)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise NoBoundaryError("no stroke points given")
    marked = np.zeros((height, width), dtype=bool)
    xs = np.clip(pts[:, 0].astype(np.int64), 0, width - 1)
    ys = np.clip(pts[:, 1].astype(np.int64), 0, height - 1)
    marked[ys, xs] = True
    return EnergyMap(values=ndimage.distance_transform_edt(~marked))


def bilinear_sample(energy, points):
    """Bilinear interpolation of the map at (x, y) positions.

    Sample nodes sit at pixel centers (x + 0.5, y + 0.5); query positions
    are clamped to the center rectangle.
    """
    v = energy.values
    h, w = v.shape
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x = np.clip(p[:, 0] - 0.5, 0.0, w - 1.0)
    y = np.clip(p[:, 1] - 0.5, 0.0, h - 1.0)
    x0 = np.clip(np.floor(x).astype(np.int64), 0, w - 2) if w > 1 \
        else np.zeros(len(p), dtype=np.int64)
    y0 = np.clip(np.floor(y).astype(np.int64), 0, h - 2) if h > 1 \
        else np.zeros(len(p), dtype=np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    return ((1 - fx) * (1 - fy) * v[y0, x0] + fx * (1 - fy) * v[y0, x1]
            + (1 - fx) * fy * v[y1, x0] + fx * fy * v[y1, x1])


def vertex_energy(grid, energy):
    """Energy bilinearly sampled at every vertex position."""
    return bilinear_sample(energy, grid.positions)


def grid_edges(topology):
    """(E, 2) unique undirected vertex-index edges, u < v, sorted."""
    c = topology.cells
    e = np.concatenate([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def edge_energy(grid, energy):
    """Mean of bilinear samples at 1 px spacing along each grid edge.

    Returns (edges, weights): the (E, 2) edge list and its energies.
    """
    edges = grid_edges(grid.topology)
    pos = grid.positions
    a = pos[edges[:, 0]]
    b = pos[edges[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    weights = np.empty(len(edges))
    for i in range(len(edges)):
        n = max(2, int(np.ceil(lengths[i])) + 1)
        t = np.linspace(0.0, 1.0, n)
        samples = a[i] + t[:, None] * (b[i] - a[i])
        weights[i] = bilinear_sample(energy, samples).mean()
    return edges, weights


def snap_seeds(grid, vertex_energies, seeds, k=6):
    """Snap each seed to the lowest-energy vertex among its k closest.

    Ties go to the closer vertex, then the lower index.  Seeds that snap
    to an already-used vertex collapse (order preserved).
    """
    if k < 1:
        raise GridError("k must be >= 1")
    seeds = np.atleast_2d(np.asarray(seeds, dtype=np.float64))
    if len(seeds) == 0:
        raise DegenerateSeedsError("no seeds given")
    pos = grid.positions
    ve = np.asarray(vertex_energies)
    out = []
    for s in seeds:
        dist = np.linalg.norm(pos - s, axis=1)
        order = np.lexsort((np.arange(len(pos)), dist))[:k]
        cand = sorted(order, key=lambda i: (ve[i], dist[i], i))
        v = int(cand[0])
        if v not in out:
            out.append(v)
    if not out:
        raise DegenerateSeedsError("seeds collapsed to nothing")
    return out


def _dijkstra(n_vertices, adj, src, dst):
    """Shortest path src -> dst on the undirected edge graph.

    adj maps vertex -> list of (neighbour, edge weight); deterministic
    tie-breaking via (distance, vertex) heap ordering.
    """
    dist = np.full(n_vertices, np.inf)
    prev = np.full(n_vertices, -1, dtype=np.int64)
    dist[src] = 0.0
    heap = [(0.0, src)]
    done = np.zeros(n_vertices, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == dst:
            break
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if not np.isfinite(dist[dst]):
        raise GridError("grid edge graph is disconnected")   # cannot happen
    path = [dst]
    while path[-1] != src:
        path.append(int(prev[path[-1]]))
    return path[::-1], float(dist[dst])


def trace_path(grid, edges, edge_weights, snapped, mask_shape=None):
    """Closed minimal-energy path through the snapped vertices, in order.

    Consecutive snapped vertices (cyclically) are joined by Dijkstra on
    the grid-edge graph; immediate repeats at junctions are dropped.
    """
    snapped = [int(v) for v in snapped]
    if len(set(snapped)) < 3:
        raise DegenerateSeedsError(
            f"need >= 3 distinct snapped vertices, got {len(set(snapped))}")
    n = grid.topology.vertex_count
    adj = [[] for _ in range(n)]
    for (u, v), w in zip(edges, edge_weights):
        adj[u].append((int(v), float(w)))
        adj[v].append((int(u), float(w)))
    for lst in adj:
        lst.sort()

    full = []
    seg_costs = []
    total = 0.0
    for i, src in enumerate(snapped):
        dst = snapped[(i + 1) % len(snapped)]
        path, cost = _dijkstra(n, adj, src, dst)
        seg_costs.append(cost)
        total += cost
        full.extend(path[:-1])       # dst opens the next segment
    closed = [full[0]]
    for v in full[1:]:
        if v != closed[-1]:
            closed.append(v)
    if len(closed) > 1 and closed[-1] == closed[0]:
        closed.pop()

    idx = np.asarray(closed, dtype=np.int64)
    verts = grid.positions[idx]
    if mask_shape is None:
        mask_shape = (int(grid.height), int(grid.width))
    mask = rasterize_polygon(verts, mask_shape[1], mask_shape[0])
    return TracedPolygon(vertex_indices=idx, vertices=verts,
                         total_energy=total,
                         segment_energies=np.asarray(seg_costs), mask=mask)


def rasterize_polygon(polygon, width, height):
    """Even-odd scanline fill; pixel centers strictly inside are set."""
    poly = np.asarray(polygon, dtype=np.float64)
    if poly.ndim != 2 or len(poly) < 3:
        raise GridError("polygon needs at least 3 points")
    x1 = poly[:, 0]
    y1 = poly[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    mask = np.zeros((height, width), dtype=np.uint8)
    for row in range(height):
        yc = row + 0.5
        crosses = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = x1[crosses] + (yc - y1[crosses]) \
                * (x2[crosses] - x1[crosses]) / (y2[crosses] - y1[crosses])
        xs = np.sort(xs)
        centers = np.arange(width) + 0.5
        inside = np.searchsorted(xs, centers, side="right") % 2 == 1
        mask[row, inside] = 1
    return mask


def sample_seed_points(mask, count=40):
    """Uniform arc-length samples of the largest component's outer contour.

    Default count follows the usual forty-seed initialization.
    """
    from skimage import measure

    m = np.asarray(mask).astype(bool)
    if not boundary_pixels(m).any():
        raise NoBoundaryError("mask has no boundary")
    lab, n = ndimage.label(m)
    if n > 1:
        sizes = ndimage.sum_labels(np.ones_like(lab), lab, range(1, n + 1))
        m = lab == (1 + int(np.argmax(sizes)))
    contours = measure.find_contours(m.astype(float), 0.5)
    contour = max(contours, key=len)
    # find_contours is (row, col) with centers at integers; shift to our
    # pixel-center convention
    pts = np.stack([contour[:, 1] + 0.5, contour[:, 0] + 0.5], axis=1)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0.0:
        return np.repeat(pts[:1], count, axis=0)
    targets = np.arange(count) * total / count
    out = np.empty((count, 2))
    out[:, 0] = np.interp(targets, cum, pts[:, 0])
    out[:, 1] = np.interp(targets, cum, pts[:, 1])
    return out
