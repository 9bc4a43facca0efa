"""Per-image minimization of the deformation energy over vertex offsets.

Plain gradient descent with step decay.  The gradient is normalized by its
infinity norm so step_size is a geometric quantity (a fraction of the cell
pitch).  Each tentative step is projected onto the offset constraints; a
step that would collapse a cell below the area floor or increase the total
loss is halved (backtrack mode) or dropped (reject mode).  Every grid state
the optimizer exposes therefore has all-positive cell areas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import assignment as asg
from . import energy as en
from .grid import GridError, constrain_offsets, signed_areas

AREA_FLOOR = 1e-3


class FlippedCellsError(GridError):
    """External offsets would invert cells; carries the offending indices."""

    def __init__(self, cell_indices):
        self.cell_indices = list(cell_indices)
        super().__init__(f"offsets flip cells {self.cell_indices}")


class NumericFailure(GridError):
    def __init__(self, iteration):
        self.iteration = iteration
        super().__init__(f"non-finite gradient at iteration {iteration}")


@dataclass(frozen=True)
class OptimizerConfig:
    iterations: int = 500
    step_size: float = 0.1          # pitch fractions per unit gradient
    step_decay: float = 0.997
    max_offset: float = 0.45        # fraction of cell pitch
    flip_guard: str = "backtrack"   # or "reject"
    seed: int = 0
    weights: en.LossWeights = field(default_factory=en.LossWeights)
    window_radius: int | None = asg.DEFAULT_WINDOW_RADIUS

    def __post_init__(self):
        if not (0.0 < self.max_offset < 0.5):
            raise GridError("max_offset must lie in (0, 0.5)")
        if self.step_size <= 0:
            raise GridError("step_size must be positive")
        if self.flip_guard not in ("backtrack", "reject"):
            raise GridError(f"unknown flip_guard {self.flip_guard!r}")


@dataclass(frozen=True)
class OptimizationTrace:
    """Loss history (iteration 0 = initial state) and the final grid."""

    l_total: np.ndarray
    l_var: np.ndarray
    l_recons: np.ndarray
    l_area: np.ndarray
    l_lap: np.ndarray
    max_displacement: np.ndarray
    min_cell_area: np.ndarray
    grid: object

    def to_json_lines(self):
        lines = []
        for i in range(len(self.l_total)):
            lines.append(json.dumps({
                "iter": i, "l_total": float(self.l_total[i]),
                "l_var": float(self.l_var[i]),
                "l_recons": float(self.l_recons[i]),
                "l_area": float(self.l_area[i]),
                "l_lap": float(self.l_lap[i]),
                "max_disp": float(self.max_displacement[i]),
                "min_area": float(self.min_cell_area[i]),
            }, separators=(",", ":"), sort_keys=True))
        return "\n".join(lines)


def apply_external_offsets(grid, offsets, max_offset=0.45):
    """Clamp externally supplied offsets and reject flips.

    Mirrors what an offset-predicting model would feed in: offsets are
    clamped to max_offset * pitch and the boundary/corner constraints,
    then the resulting grid must have all-positive areas.
    """
    offsets = np.asarray(offsets, dtype=np.float64)
    if offsets.shape != grid.base_positions.shape:
        raise GridError(
            f"expected offsets of shape {grid.base_positions.shape}")
    off = constrain_offsets(grid, offsets, max_offset * grid.pitch)
    out = grid.with_offsets(off)
    areas = signed_areas(out)
    flipped = np.nonzero(areas <= 0)[0]
    if len(flipped):
        raise FlippedCellsError(flipped.tolist())
    return out


def deform(grid, features, config=OptimizerConfig()):
    """Gradient-descent deformation; returns the trace and final grid."""
    if not grid.is_valid():
        raise GridError("initial grid is invalid")
    w = config.weights
    pitch = grid.pitch
    max_off = config.max_offset * pitch
    lr = config.step_size * pitch

    hist = {k: [] for k in
            ("l_total", "l_var", "l_recons", "l_area", "l_lap", "max_disp",
             "min_area")}

    def record(rep, disp, state):
        hist["l_total"].append(rep.l_total)
        hist["l_var"].append(rep.l_var)
        hist["l_recons"].append(rep.l_recons)
        hist["l_area"].append(rep.l_area)
        hist["l_lap"].append(rep.l_lap)
        hist["max_disp"].append(disp)
        hist["min_area"].append(float(signed_areas(state).min()))

    rep = en.total_energy(grid, features, w, config.window_radius)
    record(rep, 0.0, grid)

    cur = grid
    for it in range(config.iterations):
        g = rep.grad
        if not np.all(np.isfinite(g)):
            raise NumericFailure(it)
        gmax = np.abs(g).max()
        if gmax < 1e-12:
            record(rep, 0.0, cur)
            lr *= config.step_decay
            continue
        gn = g / gmax

        step = lr
        accepted = False
        for _ in range(11):
            off = constrain_offsets(cur, cur.offsets - step * gn, max_off)
            trial = cur.with_offsets(off)
            if np.all(signed_areas(trial) > AREA_FLOOR):
                trial_rep = en.total_energy(
                    trial, features, w, config.window_radius)
                if (trial_rep.l_total
                        <= rep.l_total * (1.0 + 1e-9) + 1e-12):
                    accepted = True
                    break
            if config.flip_guard == "reject":
                break
            step *= 0.5

        if accepted:
            disp = float(np.abs(trial.offsets - cur.offsets).max())
            cur, rep = trial, trial_rep
            record(rep, disp, cur)
        else:
            record(rep, 0.0, cur)
        lr *= config.step_decay

    return OptimizationTrace(
        l_total=np.asarray(hist["l_total"]),
        l_var=np.asarray(hist["l_var"]),
        l_recons=np.asarray(hist["l_recons"]),
        l_area=np.asarray(hist["l_area"]),
        l_lap=np.asarray(hist["l_lap"]),
        max_displacement=np.asarray(hist["max_disp"]),
        min_cell_area=np.asarray(hist["min_area"]),
        grid=cur)
