"""Deformation losses and their analytic vertex gradient.

Four terms are evaluated on a grid + feature map:

* variance:       sum_k sum_i P_ik * ||f_i - fbar_k||^2      (squared L2)
* reconstruction: sum_i ||sum_k P_ik * fbar_k - f_i||_1      (L1)
* area balance:   sum_k (a_k / abar - 1)^2   (areas normalized by the mean
                  cell area so the weight is resolution independent)
* laplacian:      sum_i ||off_i - mean of neighbour offsets||^2

The gradient flows through SignDis -> softmax for the first two terms and
is closed-form for the last two.  `mean_mode="soft-grad"` lets the gradient
flow through the soft cell means; "stop-grad" treats them as constants.

The pixel sums run in a fused numba kernel when numba is importable; the
pure-numpy path has identical semantics and serves as its cross-check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import assignment as asg
from .assignment import _HAVE_NUMBA, njit
from .grid import GridError, signed_areas

MEAN_SOFT_GRAD = "soft-grad"
MEAN_STOP_GRAD = "stop-grad"


@dataclass(frozen=True)
class LossWeights:
    lambda_recons: float = 0.5
    lambda_area: float = 0.02
    lambda_lap: float = 0.1
    delta: float = asg.DEFAULT_DELTA
    mean_mode: str = MEAN_SOFT_GRAD

    def __post_init__(self):
        if min(self.lambda_recons, self.lambda_area, self.lambda_lap) < 0:
            raise GridError("loss weights must be non-negative")
        if self.delta <= 0:
            raise GridError(f"delta must be positive, got {self.delta}")
        if self.mean_mode not in (MEAN_SOFT_GRAD, MEAN_STOP_GRAD):
            raise GridError(f"unknown mean_mode {self.mean_mode!r}")


@dataclass(frozen=True)
class EnergyReport:
    l_var: float
    l_recons: float
    l_area: float
    l_lap: float
    l_total: float
    grad: np.ndarray = field(repr=False)     # (n, 2); frozen coords are 0

    def to_json(self):
        return json.dumps({
            "l_var": self.l_var, "l_recons": self.l_recons,
            "l_area": self.l_area, "l_lap": self.l_lap,
            "l_total": self.l_total,
        }, separators=(",", ":"), sort_keys=True)


# ---------------------------------------------------------------------------
# individual losses (value only)
# ---------------------------------------------------------------------------

def loss_variance(grid, features, assign, stats):
    _check_dims(features, assign)
    flat_cells = assign.cand[assign.valid]
    reps = assign.valid.sum(axis=1)
    f_rep = np.repeat(features.flat, reps, axis=0)
    diff2 = ((f_rep - stats.soft_mean[flat_cells]) ** 2).sum(axis=1)
    return float((assign.probs[assign.valid] * diff2).sum())


def loss_reconstruction(grid, features, assign, stats):
    _check_dims(features, assign)
    npx, c = assign.cand.shape
    fb = np.zeros((npx, c, stats.soft_mean.shape[1]))
    fb[assign.valid] = stats.soft_mean[assign.cand[assign.valid]]
    fhat = np.einsum("nc,ncd->nd", assign.probs, fb)
    return float(np.abs(fhat - features.flat).sum())


def loss_area(grid):
    a = signed_areas(grid)
    anorm = a / a.mean()
    return float(((anorm - 1.0) ** 2).sum())


def loss_laplacian(grid):
    r = _laplacian_residual(grid)
    return float((r ** 2).sum())


# ---------------------------------------------------------------------------
# fused soft-loss kernel
# ---------------------------------------------------------------------------

@njit(cache=True)
def _soft_losses_kernel(pos, cells, pts, f, row_start, cand_flat, delta,
                        lam_recons, soft_grad, use_frozen, frozen_means,
                        n_cells, n_verts):   # pragma: no cover - jitted
    npx, d = f.shape
    m = cand_flat.shape[0]
    s_flat = np.empty(m)
    p_flat = np.empty(m)
    mass = np.zeros(n_cells)
    fbar = np.zeros((n_cells, d))

    # pass 1: signdis, softmax, soft mass and mean numerators
    for i in range(npx):
        px, py = pts[i, 0], pts[i, 1]
        lo, hi = row_start[i], row_start[i + 1]
        smax = -1e300
        for j in range(lo, hi):
            k = cand_flat[j]
            best = 1e300
            ins = True
            for e in range(3):
                va = cells[k, e]
                vb = cells[k, e + 1 if e < 2 else 0]
                ax, ay = pos[va, 0], pos[va, 1]
                ux, uy = pos[vb, 0] - ax, pos[vb, 1] - ay
                wx, wy = px - ax, py - ay
                if ux * wy - uy * wx < 0.0:
                    ins = False
                uu = ux * ux + uy * uy
                t = 0.0 if uu == 0.0 else (wx * ux + wy * uy) / uu
                tc = min(max(t, 0.0), 1.0)
                dis = abs(wx - tc * ux) + abs(wy - tc * uy)
                if dis < best:
                    best = dis
            s = best if ins else -best
            s_flat[j] = s
            if s > smax:
                smax = s
        tot = 0.0
        for j in range(lo, hi):
            w = np.exp((s_flat[j] - smax) / delta)
            p_flat[j] = w
            tot += w
        for j in range(lo, hi):
            p_flat[j] /= tot
            k = cand_flat[j]
            mass[k] += p_flat[j]
            for ch in range(d):
                fbar[k, ch] += p_flat[j] * f[i, ch]

    if use_frozen:
        fbar = frozen_means.copy()
    else:
        for k in range(n_cells):
            if mass[k] > 0.0:
                for ch in range(d):
                    fbar[k, ch] /= mass[k]

    # pass 2: losses, base dL/dP, soft-mean accumulator
    l_var = 0.0
    l_recons = 0.0
    dldp = np.empty(m)
    sgn = np.empty((npx, d))
    acc = np.zeros((n_cells, d))
    for i in range(npx):
        lo, hi = row_start[i], row_start[i + 1]
        for ch in range(d):
            fh = 0.0
            for j in range(lo, hi):
                fh += p_flat[j] * fbar[cand_flat[j], ch]
            r = fh - f[i, ch]
            l_recons += abs(r)
            sgn[i, ch] = 1.0 if r > 0 else (-1.0 if r < 0 else 0.0)
        for j in range(lo, hi):
            k = cand_flat[j]
            diff2 = 0.0
            dot = 0.0
            for ch in range(d):
                dch = f[i, ch] - fbar[k, ch]
                diff2 += dch * dch
                dot += sgn[i, ch] * fbar[k, ch]
            l_var += p_flat[j] * diff2
            dldp[j] = diff2 + lam_recons * dot
            if soft_grad and not use_frozen:
                for ch in range(d):
                    acc[k, ch] += p_flat[j] * sgn[i, ch]

    # pass 3: soft-mean term, softmax jacobian, scatter signdis gradients
    grad = np.zeros((n_verts, 2))
    for i in range(npx):
        px, py = pts[i, 0], pts[i, 1]
        lo, hi = row_start[i], row_start[i + 1]
        if soft_grad and not use_frozen:
            for j in range(lo, hi):
                k = cand_flat[j]
                if mass[k] > 0.0:
                    extra = 0.0
                    for ch in range(d):
                        extra += acc[k, ch] * (f[i, ch] - fbar[k, ch])
                    dldp[j] += lam_recons * extra / mass[k]
        row_dot = 0.0
        for j in range(lo, hi):
            row_dot += p_flat[j] * dldp[j]
        for j in range(lo, hi):
            ds = p_flat[j] * (dldp[j] - row_dot) / delta
            if ds == 0.0:
                continue
            k = cand_flat[j]
            # recompute the active edge and its jacobian
            best = 1e300
            best_e = 0
            best_t = 0.0
            ins = True
            for e in range(3):
                va = cells[k, e]
                vb = cells[k, e + 1 if e < 2 else 0]
                ax, ay = pos[va, 0], pos[va, 1]
                ux, uy = pos[vb, 0] - ax, pos[vb, 1] - ay
                wx, wy = px - ax, py - ay
                if ux * wy - uy * wx < 0.0:
                    ins = False
                uu = ux * ux + uy * uy
                t = 0.0 if uu == 0.0 else (wx * ux + wy * uy) / uu
                tc = min(max(t, 0.0), 1.0)
                dis = abs(wx - tc * ux) + abs(wy - tc * uy)
                if dis < best:
                    best = dis
                    best_e = e
                    best_t = t
            sign = 1.0 if ins else -1.0
            e = best_e
            va = cells[k, e]
            vb = cells[k, e + 1 if e < 2 else 0]
            ax, ay = pos[va, 0], pos[va, 1]
            ux, uy = pos[vb, 0] - ax, pos[vb, 1] - ay
            wx, wy = px - ax, py - ay
            uu = ux * ux + uy * uy
            wu = wx * ux + wy * uy
            t = best_t
            tc = min(max(t, 0.0), 1.0)
            dx, dy = wx - tc * ux, wy - tc * uy
            gx = -1.0 if dx > 0 else (1.0 if dx < 0 else 0.0)
            gy = -1.0 if dy > 0 else (1.0 if dy < 0 else 0.0)
            c0 = ds * sign
            if t <= 0.0 or uu == 0.0:
                grad[va, 0] += c0 * gx
                grad[va, 1] += c0 * gy
            elif t >= 1.0:
                grad[vb, 0] += c0 * gx
                grad[vb, 1] += c0 * gy
            else:
                uu2 = uu * uu
                gu = gx * ux + gy * uy
                grad[va, 0] += c0 * ((1.0 - t) * gx
                                     + gu * ((-ux - wx) * uu
                                             + 2.0 * wu * ux) / uu2)
                grad[va, 1] += c0 * ((1.0 - t) * gy
                                     + gu * ((-uy - wy) * uu
                                             + 2.0 * wu * uy) / uu2)
                grad[vb, 0] += c0 * (t * gx
                                     + gu * (wx * uu - 2.0 * wu * ux) / uu2)
                grad[vb, 1] += c0 * (t * gy
                                     + gu * (wy * uu - 2.0 * wu * uy) / uu2)

    return l_var, l_recons, grad


def _soft_losses_numpy(grid, features, weights, cand, valid, frozen_means):
    """Reference path: same quantities as the fused kernel."""
    pts = asg.pixel_centers(features.width, features.height)
    s_flat, _, sd_grad = asg.pair_signdis(
        grid, pts, cand, valid, want_grad=True)
    npx, c = cand.shape
    delta = weights.delta
    s = np.full((npx, c), -np.inf)
    s[valid] = s_flat
    z = s / delta
    z -= z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p[~valid] = 0.0
    p /= p.sum(axis=1, keepdims=True)

    f = features.flat
    d = f.shape[1]
    k = grid.topology.n_cells
    n = grid.topology.vertex_count
    flat_cells = cand[valid]
    flat_p = p[valid]
    reps = valid.sum(axis=1)
    f_rep = np.repeat(f, reps, axis=0)

    mass = np.bincount(flat_cells, weights=flat_p, minlength=k)
    nz = mass > 0.0
    if frozen_means is None:
        fbar = np.zeros((k, d))
        for ch in range(d):
            fbar[:, ch] = np.bincount(
                flat_cells, weights=flat_p * f_rep[:, ch], minlength=k)
        fbar[nz] /= mass[nz, None]
    else:
        fbar = np.asarray(frozen_means, dtype=np.float64)

    fbar_pair = fbar[flat_cells]
    diff = f_rep - fbar_pair
    diff2 = (diff ** 2).sum(axis=1)
    l_var = float((flat_p * diff2).sum())

    fb = np.zeros((npx, c, d))
    fb[valid] = fbar_pair
    fhat = np.einsum("nc,ncd->nd", p, fb)
    resid = fhat - f
    l_recons = float(np.abs(resid).sum())

    sgn = np.sign(resid)
    sgn_rep = np.repeat(sgn, reps, axis=0)
    dldp = diff2 + weights.lambda_recons * (sgn_rep * fbar_pair).sum(axis=1)
    if weights.mean_mode == MEAN_SOFT_GRAD and frozen_means is None:
        # reconstruction through the soft means; the variance term through
        # them vanishes identically (2 * (m_k fbar_k - sum_i P_ik f_i) = 0)
        acc = np.zeros((k, d))
        for ch in range(d):
            acc[:, ch] = np.bincount(
                flat_cells, weights=flat_p * sgn_rep[:, ch], minlength=k)
        inv_m = np.where(nz, 1.0 / np.where(nz, mass, 1.0), 0.0)
        dldp += (weights.lambda_recons
                 * (acc[flat_cells] * diff).sum(axis=1) * inv_m[flat_cells])

    dldp_full = np.zeros((npx, c))
    dldp_full[valid] = dldp
    row_dot = (p * dldp_full).sum(axis=1, keepdims=True)
    ds = (p * (dldp_full - row_dot) / delta)[valid]

    tri_idx = grid.topology.cells[flat_cells]
    contrib = ds[:, None, None] * sd_grad
    flat_idx = tri_idx.ravel()
    grad = np.stack([
        np.bincount(flat_idx, weights=contrib[:, :, 0].ravel(), minlength=n),
        np.bincount(flat_idx, weights=contrib[:, :, 1].ravel(), minlength=n),
    ], axis=1)
    return l_var, l_recons, grad


# ---------------------------------------------------------------------------
# total energy + gradient
# ---------------------------------------------------------------------------

def total_energy(grid, features, weights=LossWeights(),
                 window_radius=asg.DEFAULT_WINDOW_RADIUS,
                 frozen_means=None, force_numpy=False):
    """All four losses, the weighted total, and its analytic gradient.

    `frozen_means` fixes the per-cell means at the given (K, d) values,
    matching what a stop-grad finite-difference oracle must hold constant.
    """
    if np.any(signed_areas(grid) <= 0):
        raise asg.InvalidGridError("grid has non-positive cell areas")
    cand, valid = asg.candidate_cells(
        grid, features.width, features.height, window_radius)
    w = weights

    if _HAVE_NUMBA and not force_numpy:
        pts = asg.pixel_centers(features.width, features.height)
        reps = valid.sum(axis=1)
        row_start = np.zeros(len(pts) + 1, dtype=np.int64)
        np.cumsum(reps, out=row_start[1:])
        frozen = (np.ascontiguousarray(frozen_means, dtype=np.float64)
                  if frozen_means is not None else np.zeros((1, 1)))
        l_var, l_recons, grad = _soft_losses_kernel(
            np.ascontiguousarray(grid.positions),
            np.ascontiguousarray(grid.topology.cells),
            pts, np.ascontiguousarray(features.flat),
            row_start, np.ascontiguousarray(cand[valid]),
            float(w.delta), float(w.lambda_recons),
            w.mean_mode == MEAN_SOFT_GRAD, frozen_means is not None, frozen,
            grid.topology.n_cells, grid.topology.vertex_count)
    else:
        l_var, l_recons, grad = _soft_losses_numpy(
            grid, features, w, cand, valid, frozen_means)

    n = grid.topology.vertex_count
    a = signed_areas(grid)
    abar = a.mean()
    anorm = a / abar
    l_area = float(((anorm - 1.0) ** 2).sum())

    lap_r = _laplacian_residual(grid)
    l_lap = float((lap_r ** 2).sum())

    l_total = (l_var + w.lambda_recons * l_recons
               + w.lambda_area * l_area + w.lambda_lap * l_lap)

    # area gradient, closed form (shoelace partials)
    da = 2.0 * (anorm - 1.0) / abar
    da -= (2.0 / (grid.topology.n_cells * abar ** 2)) \
        * float(((anorm - 1.0) * a).sum())
    cells = grid.topology.cells
    pos = grid.positions
    pa, pb, pc = pos[cells[:, 0]], pos[cells[:, 1]], pos[cells[:, 2]]
    half_da = 0.5 * da
    a_idx = np.concatenate([cells[:, 0], cells[:, 1], cells[:, 2]])
    ga_x = np.concatenate([half_da * (pb[:, 1] - pc[:, 1]),
                           half_da * (pc[:, 1] - pa[:, 1]),
                           half_da * (pa[:, 1] - pb[:, 1])])
    ga_y = np.concatenate([half_da * (pc[:, 0] - pb[:, 0]),
                           half_da * (pa[:, 0] - pc[:, 0]),
                           half_da * (pb[:, 0] - pa[:, 0])])
    grad[:, 0] += w.lambda_area * np.bincount(a_idx, weights=ga_x,
                                              minlength=n)
    grad[:, 1] += w.lambda_area * np.bincount(a_idx, weights=ga_y,
                                              minlength=n)

    # laplacian gradient, closed form (adjacency is symmetric)
    topo = grid.topology
    deg = topo.neighbor_valid.sum(axis=1).astype(np.float64)
    r_over_deg = lap_r / deg[:, None]
    nbr_sum = np.where(topo.neighbor_valid[:, :, None],
                       r_over_deg[topo.neighbor_index], 0.0).sum(axis=1)
    grad += w.lambda_lap * 2.0 * (lap_r - nbr_sum)

    grad[grid.frozen_mask] = 0.0
    return EnergyReport(l_var=float(l_var), l_recons=float(l_recons),
                        l_area=l_area, l_lap=l_lap, l_total=float(l_total),
                        grad=grad)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _check_dims(features, assign):
    if (features.width, features.height) != (assign.width, assign.height):
        raise GridError("feature map and assignment extents differ")


def _laplacian_residual(grid):
    """offset_i minus the mean offset of its neighbours, (n, 2)."""
    topo = grid.topology
    off = grid.offsets
    nbr = np.where(topo.neighbor_valid[:, :, None],
                   off[topo.neighbor_index], 0.0)
    deg = topo.neighbor_valid.sum(axis=1).astype(np.float64)
    return off - nbr.sum(axis=1) / deg[:, None]
