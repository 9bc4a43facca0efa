"""Unsupervised partitioning and the segmentation metrics suite.

Cells become nodes of an affinity graph (edges between cells sharing a
grid edge, weight exp(-||mean RGB difference||^2 / sigma^2)); greedy
agglomerative merging of the strongest edge yields polygonal superpixels.
Metrics: achievable segmentation accuracy, boundary precision/recall/F at
a pixel tolerance, and binary mask IoU.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import GridError

DEFAULT_SIGMA = 0.1


@dataclass
class AffinityGraph:
    """Clusters of grid cells with pairwise affinities in [0, 1]."""

    members: dict                # node id -> set of cell indices
    mean_rgb: dict               # node id -> (d,) mean feature
    pixel_count: dict            # node id -> pixels in the cluster
    edges: dict                  # (u, v) u < v -> affinity
    sigma: float = DEFAULT_SIGMA

    def neighbors(self, u):
        return [v if a == u else a
                for a, v in self.edges if u in (a, v)]


@dataclass(frozen=True)
class SegmentationMap:
    """Dense per-pixel segment ids in [0, n_segments)."""

    ids: np.ndarray              # (H, W) int64

    @property
    def n_segments(self):
        return int(self.ids.max()) + 1


def affinity(rgb_u, rgb_v, sigma=DEFAULT_SIGMA):
    d2 = float(((np.asarray(rgb_u) - np.asarray(rgb_v)) ** 2).sum())
    return float(np.exp(-d2 / sigma ** 2))


def build_affinity(grid, features, stats, sigma=DEFAULT_SIGMA):
    """Initial graph: one node per cell, edges along cell adjacency."""
    k = grid.topology.n_cells
    means = stats.hard_mean.copy()
    if np.any(stats.hard_count == 0) and np.any(stats.hard_count > 0):
        # pixel-free cells inherit the nearest populated cell's mean
        cent = grid.positions[grid.topology.cells].mean(axis=1)
        src = np.nonzero(stats.hard_count > 0)[0]
        for ke in np.nonzero(stats.hard_count == 0)[0]:
            near = src[np.argmin(np.linalg.norm(cent[src] - cent[ke], axis=1))]
            means[ke] = means[near]
    edges = {}
    for u, v in grid.topology.cell_adjacency:
        edges[(int(u), int(v))] = affinity(means[u], means[v], sigma)
    return AffinityGraph(
        members={i: {i} for i in range(k)},
        mean_rgb={i: means[i] for i in range(k)},
        pixel_count={i: int(stats.hard_count[i]) for i in range(k)},
        edges=edges, sigma=sigma)


def agglomerate(graph, grid, hard_label, target=None, threshold=None,
                weighted_mean=False):
    """Greedy merging of the strongest affinity edge.

    Stops at `target` clusters or when the best affinity drops below
    `threshold`.  Merged edges toward a common neighbour carry the mean of
    the two prior affinities (pixel-count weighted when `weighted_mean`).
    Returns (SegmentationMap, cluster polygons, warning flag).
    """
    if target is None and threshold is None:
        raise GridError("need a target cluster count or a threshold")
    members = {u: set(s) for u, s in graph.members.items()}
    counts = dict(graph.pixel_count)
    edges = dict(graph.edges)

    warned = False
    if target is not None and target > len(members):
        warned = True
    if target is not None and target < 1:
        raise GridError("target must be >= 1")

    while len(members) > (target or 1):
        if not edges:
            break
        # max affinity; ties -> lexicographically smallest (u, v)
        best_uv = min(edges, key=lambda uv: (-edges[uv], uv))
        best_a = edges[best_uv]
        if threshold is not None and best_a < threshold:
            break
        u, v = best_uv
        members[u] |= members.pop(v)
        cu, cv = counts[u], counts.pop(v)
        counts[u] = cu + cv
        del edges[best_uv]
        incident = [(a, b) for (a, b) in edges if v in (a, b)]
        for a, b in incident:
            w = edges.pop((a, b))
            o = b if a == v else a
            key = (min(u, o), max(u, o))
            if key in edges:
                if weighted_mean:
                    edges[key] = (edges[key] * cu + w * cv) / (cu + cv)
                else:
                    edges[key] = 0.5 * (edges[key] + w)
            else:
                edges[key] = w

    reps = sorted(members)
    cell_to_seg = np.empty(max(max(s) for s in members.values()) + 1,
                           dtype=np.int64)
    for seg, u in enumerate(reps):
        for c in members[u]:
            cell_to_seg[c] = seg
    h, w = int(grid.height), int(grid.width)
    ids = cell_to_seg[hard_label].reshape(h, w)
    polys = [cluster_boundary_loops(grid, members[u]) for u in reps]
    return SegmentationMap(ids=ids), polys, warned


def cluster_boundary_loops(grid, cell_set):
    """Outer boundary loop(s) of a union of cells, as vertex-index lists.

    Boundary edges are the directed cell edges whose reverse is not used
    by any cell in the set; chaining them yields closed loops.
    """
    cells = grid.topology.cells
    directed = set()
    for k in cell_set:
        a, b, c = (int(x) for x in cells[k])
        directed.update([(a, b), (b, c), (c, a)])
    boundary = [e for e in directed if (e[1], e[0]) not in directed]
    nxt = {}
    for a, b in sorted(boundary):
        nxt.setdefault(a, []).append(b)
    loops = []
    used = set()
    for start, _ in sorted(boundary):
        if start in used:
            continue
        loop = [start]
        used.add(start)
        cur = start
        while True:
            nb = [b for b in nxt.get(cur, []) if b not in used or b == start]
            if not nb:
                break
            cur = nb[0]
            if cur == start:
                break
            loop.append(cur)
            used.add(cur)
        if len(loop) >= 3:
            loops.append(loop)
    return loops


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _check_extent(pred, gt):
    if pred.shape != gt.shape:
        raise GridError(f"extent mismatch {pred.shape} vs {gt.shape}")


def metric_asa(pred, gt):
    """Achievable segmentation accuracy of pred w.r.t. gt."""
    p = np.asarray(pred.ids if isinstance(pred, SegmentationMap) else pred)
    g = np.asarray(gt.ids if isinstance(gt, SegmentationMap) else gt)
    _check_extent(p, g)
    np_, ng = int(p.max()) + 1, int(g.max()) + 1
    joint = np.bincount((p * ng + g).ravel(),
                        minlength=np_ * ng).reshape(np_, ng)
    return float(joint.max(axis=1).sum() / p.size)


def segment_boundaries(ids):
    """Pixels whose 4-neighbourhood (in-image) contains a different id."""
    m = np.asarray(ids)
    b = np.zeros(m.shape, dtype=bool)
    b[:-1] |= m[:-1] != m[1:]
    b[1:] |= m[1:] != m[:-1]
    b[:, :-1] |= m[:, :-1] != m[:, 1:]
    b[:, 1:] |= m[:, 1:] != m[:, :-1]
    return b


def metric_boundary(pred, gt, tolerance=3):
    """(BP, BR, F) with Chebyshev pixel tolerance."""
    p = np.asarray(pred.ids if isinstance(pred, SegmentationMap) else pred)
    g = np.asarray(gt.ids if isinstance(gt, SegmentationMap) else gt)
    _check_extent(p, g)
    pb = segment_boundaries(p)
    gb = segment_boundaries(g)

    def frac_within(src, ref):
        if not src.any():
            return 0.0
        if not ref.any():
            return 0.0
        dist = ndimage.distance_transform_cdt(~ref, metric="chessboard")
        return float((dist[src] <= tolerance).mean())

    bp = frac_within(pb, gb)
    br = frac_within(gb, pb)
    f = 0.0 if bp + br == 0 else 2 * bp * br / (bp + br)
    return bp, br, f


def metric_miou(pred_mask, gt_mask):
    """Binary-mask intersection over union; both empty -> 1."""
    p = np.asarray(pred_mask).astype(bool)
    g = np.asarray(gt_mask).astype(bool)
    _check_extent(p, g)
    union = (p | g).sum()
    if union == 0:
        return 1.0
    return float((p & g).sum() / union)
