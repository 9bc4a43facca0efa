"""Soft pixel-to-cell assignment.

Every pixel center is assigned to nearby cells with softmax(SignDis / delta),
where SignDis is the L1 distance from the pixel to the cell's nearest edge,
positive inside the cell and negative outside.  The softmax normally runs
over a window of candidate quads around the pixel's base-lattice quad; the
far tail vanishes under exp, and a full-softmax mode exists for oracles.

The module also exposes the batched SignDis jacobian with respect to the
cell's vertex coordinates, which the energy module chains through the
softmax to obtain analytic loss gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DeformedGrid, GridError, signed_areas

DEFAULT_DELTA = 1.0
DEFAULT_WINDOW_RADIUS = 2

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:                                    # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f
        return wrap if not a or not callable(a[0]) else a[0]

# local triangle-vertex indices of edge e: (start, end)
_EDGE_LOCAL = np.array([[0, 1], [1, 2], [2, 0]])


class InvalidGridError(GridError):
    """Grid has a non-positive cell area; assignment is undefined."""


@dataclass(frozen=True)
class FeatureMap:
    """Per-pixel feature vectors on the pixel lattice.

    data is (height, width, channels) float64.  RGB channels live in [0, 1];
    optional one-hot channels sum to 1 per pixel.
    """

    data: np.ndarray
    semantics: str = "rgb"

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    @property
    def flat(self):
        """(N, d) view, row-major pixel order."""
        return self.data.reshape(-1, self.data.shape[2])

    @staticmethod
    def from_rgb(array):
        a = np.asarray(array, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.max() > 1.0:
            a = a / 255.0
        return FeatureMap(data=a, semantics="rgb")

    def with_onehot(self, labels, n_classes):
        """Append one-hot mask channels ("rgb+onehot" semantics)."""
        labels = np.asarray(labels)
        onehot = np.eye(n_classes)[labels.astype(np.int64)]
        return FeatureMap(
            data=np.concatenate([self.data, onehot], axis=2),
            semantics="rgb+onehot")


@dataclass(frozen=True)
class AssignmentField:
    """Sparse soft assignment, padded-row layout.

    cand[i] holds candidate cell indices for pixel i (-1 padding where
    valid[i] is False); probs renormalize to 1 over the valid entries.
    """

    cand: np.ndarray          # (N, C) int64
    valid: np.ndarray         # (N, C) bool
    probs: np.ndarray         # (N, C) float64
    signdis: np.ndarray       # (N, C) float64
    hard_label: np.ndarray    # (N,) int64
    delta: float
    window_radius: int | None
    width: int
    height: int
    n_cells: int

    def row(self, i):
        """List of (cell index, probability) for pixel i."""
        m = self.valid[i]
        return list(zip(self.cand[i, m].tolist(), self.probs[i, m].tolist()))


@dataclass(frozen=True)
class CellStats:
    """Per-cell soft and hard statistics."""

    soft_mass: np.ndarray     # (K,)
    soft_mean: np.ndarray     # (K, d)
    hard_count: np.ndarray    # (K,)
    hard_mean: np.ndarray     # (K, d)
    empty: np.ndarray         # (K,) bool, no soft mass at all


# ---------------------------------------------------------------------------
# SignDis
# ---------------------------------------------------------------------------

@njit(cache=True)
def _signdis_kernel(p, tri, want_grad):          # pragma: no cover - jitted
    m = p.shape[0]
    s = np.empty(m)
    inside = np.empty(m, dtype=np.bool_)
    grad = np.zeros((m, 3, 2))
    for i in range(m):
        px, py = p[i, 0], p[i, 1]
        best = 1e300
        best_e = 0
        best_t = 0.0
        ins = True
        for e in range(3):
            ax, ay = tri[i, e, 0], tri[i, e, 1]
            j = e + 1 if e < 2 else 0
            bx, by = tri[i, j, 0], tri[i, j, 1]
            ux, uy = bx - ax, by - ay
            wx, wy = px - ax, py - ay
            if ux * wy - uy * wx < 0.0:
                ins = False
            uu = ux * ux + uy * uy
            t = 0.0 if uu == 0.0 else (wx * ux + wy * uy) / uu
            tc = min(max(t, 0.0), 1.0)
            qx, qy = ax + tc * ux, ay + tc * uy
            dis = abs(px - qx) + abs(py - qy)
            if dis < best:
                best = dis
                best_e = e
                best_t = t
        sign = 1.0 if ins else -1.0
        s[i] = sign * best
        inside[i] = ins
        if not want_grad:
            continue
        e = best_e
        j = e + 1 if e < 2 else 0
        ax, ay = tri[i, e, 0], tri[i, e, 1]
        bx, by = tri[i, j, 0], tri[i, j, 1]
        ux, uy = bx - ax, by - ay
        wx, wy = px - ax, py - ay
        uu = ux * ux + uy * uy
        wu = wx * ux + wy * uy
        t = best_t
        tc = min(max(t, 0.0), 1.0)
        qx, qy = ax + tc * ux, ay + tc * uy
        dx, dy = px - qx, py - qy
        gx = -1.0 if dx > 0 else (1.0 if dx < 0 else 0.0)
        gy = -1.0 if dy > 0 else (1.0 if dy < 0 else 0.0)
        if t <= 0.0 or uu == 0.0:
            grad[i, e, 0] = sign * gx
            grad[i, e, 1] = sign * gy
        elif t >= 1.0:
            grad[i, j, 0] = sign * gx
            grad[i, j, 1] = sign * gy
        else:
            uu2 = uu * uu
            gu = gx * ux + gy * uy
            dta_x = ((-ux - wx) * uu + 2.0 * wu * ux) / uu2
            dta_y = ((-uy - wy) * uu + 2.0 * wu * uy) / uu2
            dtb_x = (wx * uu - 2.0 * wu * ux) / uu2
            dtb_y = (wy * uu - 2.0 * wu * uy) / uu2
            grad[i, e, 0] = sign * ((1.0 - t) * gx + gu * dta_x)
            grad[i, e, 1] = sign * ((1.0 - t) * gy + gu * dta_y)
            grad[i, j, 0] = sign * (t * gx + gu * dtb_x)
            grad[i, j, 1] = sign * (t * gy + gu * dtb_y)
    return s, inside, grad


def signdis_batch(points, triangles, want_grad=False):
    """SignDis for M (point, triangle) pairs.

    points (M, 2); triangles (M, 3, 2).  Returns (s, inside) and, when
    want_grad, ds/dvertex of shape (M, 3, 2).  Ties (min-edge, boundary)
    take the lowest edge index / inside sign; both are measure-zero.
    """
    if _HAVE_NUMBA:
        p = np.ascontiguousarray(points, dtype=np.float64)
        tri = np.ascontiguousarray(triangles, dtype=np.float64)
        s, inside, grad = _signdis_kernel(p, tri, want_grad)
        if want_grad:
            return s, inside, grad
        return s, inside
    return _signdis_numpy(points, triangles, want_grad)


def _signdis_numpy(points, triangles, want_grad=False):
    """Pure-numpy reference path, identical semantics to the kernel."""
    p = np.asarray(points, dtype=np.float64)
    tri = np.asarray(triangles, dtype=np.float64)
    s_pt = tri                                   # (M, 3, 2) edge starts
    e_pt = tri[:, [1, 2, 0], :]                  # edge ends
    u = e_pt - s_pt
    w = p[:, None, :] - s_pt
    uu = np.einsum("mei,mei->me", u, u)
    wu = np.einsum("mei,mei->me", w, u)
    with np.errstate(invalid="ignore", divide="ignore"):
        t_raw = np.where(uu > 0.0, wu / np.where(uu > 0.0, uu, 1.0), 0.0)
    t = np.clip(t_raw, 0.0, 1.0)
    q = s_pt + t[:, :, None] * u
    d = p[:, None, :] - q
    dis = np.abs(d).sum(axis=2)                  # (M, 3)

    # inside test: all edge cross products >= 0 for a positively wound cell
    cross = u[:, :, 0] * w[:, :, 1] - u[:, :, 1] * w[:, :, 0]
    inside = np.all(cross >= 0.0, axis=1)

    active = np.argmin(dis, axis=1)              # lowest index wins ties
    m_idx = np.arange(len(p))
    s = np.where(inside, 1.0, -1.0) * dis[m_idx, active]

    if not want_grad:
        return s, inside

    grad = np.zeros((len(p), 3, 2))
    sign = np.where(inside, 1.0, -1.0)
    ta = t_raw[m_idx, active]
    ua = u[m_idx, active]
    wa = w[m_idx, active]
    uua = uu[m_idx, active]
    wua = wu[m_idx, active]
    da = d[m_idx, active]
    g = -np.sign(da)                             # dDis/dq

    at_start = (ta <= 0.0) | (uua == 0.0)
    at_end = (ta >= 1.0) & ~at_start
    interior = ~at_start & ~at_end

    g_start = np.zeros((len(p), 2))
    g_end = np.zeros((len(p), 2))
    g_start[at_start] = g[at_start]
    g_end[at_end] = g[at_end]

    if np.any(interior):
        ii = interior
        uu2 = uua[ii] ** 2
        gu = np.einsum("mi,mi->m", g[ii], ua[ii])
        dt_da = ((-ua[ii] - wa[ii]) * uua[ii, None]
                 + 2.0 * wua[ii, None] * ua[ii]) / uu2[:, None]
        dt_db = (wa[ii] * uua[ii, None]
                 - 2.0 * wua[ii, None] * ua[ii]) / uu2[:, None]
        tt = ta[ii, None]
        g_start[ii] = (1.0 - tt) * g[ii] + gu[:, None] * dt_da
        g_end[ii] = tt * g[ii] + gu[:, None] * dt_db

    loc = _EDGE_LOCAL[active]                    # (M, 2) local vertex slots
    grad[m_idx, loc[:, 0]] = sign[:, None] * g_start
    grad[m_idx, loc[:, 1]] += sign[:, None] * g_end
    return s, inside, grad


def sign_dis(point, triangle):
    """Scalar SignDis of one point w.r.t. one (3, 2) triangle."""
    tri = np.asarray(triangle, dtype=np.float64)
    area2 = ((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
             - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0]))
    if abs(area2) <= 2e-9:
        from .grid import DegenerateCellError
        raise DegenerateCellError(None)
    if area2 < 0:                                # accept either winding
        tri = tri[::-1]
    s, _ = signdis_batch(np.asarray(point, dtype=np.float64)[None, :],
                         tri[None, :, :])
    return float(s[0])


# ---------------------------------------------------------------------------
# candidate windows
# ---------------------------------------------------------------------------

_window_cache = {}


def _quad_candidates(topology, radius):
    """Per-quad padded candidate cell array for a Chebyshev quad window."""
    key = (topology.rows, topology.cols, topology.variant, radius)
    hit = _window_cache.get(key)
    if hit is not None:
        return hit
    rows, cols = topology.rows, topology.cols
    cpq = topology.cells_per_quad
    per_quad = []
    for r in range(rows):
        for c in range(cols):
            r0, r1 = max(0, r - radius), min(rows - 1, r + radius)
            c0, c1 = max(0, c - radius), min(cols - 1, c + radius)
            cells = []
            for rr in range(r0, r1 + 1):
                for cc in range(c0, c1 + 1):
                    base = (rr * cols + cc) * cpq
                    cells.extend(range(base, base + cpq))
            per_quad.append(np.asarray(sorted(cells), dtype=np.int64))
    cmax = max(len(c) for c in per_quad)
    cand = np.full((rows * cols, cmax), -1, dtype=np.int64)
    valid = np.zeros((rows * cols, cmax), dtype=bool)
    for q, cells in enumerate(per_quad):
        cand[q, : len(cells)] = cells
        valid[q, : len(cells)] = True
    _window_cache[key] = (cand, valid)
    return cand, valid


def pixel_centers(width, height):
    """(N, 2) pixel-center coordinates, row-major."""
    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def candidate_cells(grid, width, height, window_radius):
    """(cand, valid) of shape (N, C): candidate cells per pixel."""
    topo = grid.topology
    if window_radius is None:
        cand = np.broadcast_to(np.arange(topo.n_cells, dtype=np.int64),
                               (width * height, topo.n_cells)).copy()
        return cand, np.ones_like(cand, dtype=bool)
    pts = pixel_centers(width, height)
    qc = np.clip((pts[:, 0] // (grid.width / topo.cols)).astype(np.int64),
                 0, topo.cols - 1)
    qr = np.clip((pts[:, 1] // (grid.height / topo.rows)).astype(np.int64),
                 0, topo.rows - 1)
    quad = qr * topo.cols + qc
    cand_q, valid_q = _quad_candidates(topo, window_radius)
    return cand_q[quad], valid_q[quad]


# ---------------------------------------------------------------------------
# soft assignment and statistics
# ---------------------------------------------------------------------------

def pair_signdis(grid, points, cand, valid, want_grad=False):
    """SignDis over the flattened valid (pixel, cell) pairs."""
    pos = grid.positions
    cells = grid.topology.cells
    flat_cells = cand[valid]
    tris = pos[cells[flat_cells]]
    reps = valid.sum(axis=1)
    pts = np.repeat(points, reps, axis=0)
    return signdis_batch(pts, tris, want_grad=want_grad)


def soft_assign(grid, width, height, delta=DEFAULT_DELTA,
                window_radius=DEFAULT_WINDOW_RADIUS):
    """Soft probabilities and hard containing-cell label for every pixel."""
    if delta <= 0:
        raise GridError(f"delta must be positive, got {delta}")
    if np.any(signed_areas(grid) <= 0):
        raise InvalidGridError("grid has non-positive cell areas")
    pts = pixel_centers(width, height)
    cand, valid = candidate_cells(grid, width, height, window_radius)
    s_flat, inside_flat = pair_signdis(grid, pts, cand, valid)

    n, c = cand.shape
    s = np.full((n, c), -np.inf)
    s[valid] = s_flat
    inside = np.zeros((n, c), dtype=bool)
    inside[valid] = inside_flat

    z = s / delta
    z -= z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p[~valid] = 0.0
    p /= p.sum(axis=1, keepdims=True)

    # hard label: lowest containing cell index; fall back to the closest
    # candidate if floating point leaves a pixel outside everything
    cand_in = np.where(inside, cand, np.iinfo(np.int64).max)
    hard = cand_in.min(axis=1)
    missing = hard == np.iinfo(np.int64).max
    if np.any(missing):
        best = np.argmax(np.where(valid, s, -np.inf), axis=1)
        hard[missing] = cand[np.arange(n), best][missing]

    return AssignmentField(
        cand=cand, valid=valid, probs=p, signdis=s, hard_label=hard,
        delta=float(delta), window_radius=window_radius,
        width=width, height=height, n_cells=grid.topology.n_cells)


def cell_stats(assign, features):
    """Soft mass / mean and hard count / mean per cell."""
    if (features.width, features.height) != (assign.width, assign.height):
        raise GridError(
            f"feature map {features.width}x{features.height} does not match "
            f"assignment {assign.width}x{assign.height}")
    k = assign.n_cells
    f = features.flat
    d = f.shape[1]
    flat_cells = assign.cand[assign.valid]
    flat_p = assign.probs[assign.valid]
    reps = assign.valid.sum(axis=1)
    f_rep = np.repeat(f, reps, axis=0)

    mass = np.bincount(flat_cells, weights=flat_p, minlength=k)
    soft_mean = np.zeros((k, d))
    for c in range(d):
        soft_mean[:, c] = np.bincount(
            flat_cells, weights=flat_p * f_rep[:, c], minlength=k)
    empty = mass <= 0.0
    soft_mean[~empty] /= mass[~empty, None]
    soft_mean[empty] = 0.0

    hard_count = np.bincount(assign.hard_label, minlength=k).astype(np.float64)
    hard_mean = np.zeros((k, d))
    for c in range(d):
        hard_mean[:, c] = np.bincount(
            assign.hard_label, weights=f[:, c], minlength=k)
    nz = hard_count > 0
    hard_mean[nz] /= hard_count[nz, None]

    return CellStats(soft_mass=mass, soft_mean=soft_mean,
                     hard_count=hard_count, hard_mean=hard_mean, empty=empty)
