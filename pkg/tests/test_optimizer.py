import json

import numpy as np
import pytest

from conftest import random_image, two_tone_image
from defgrid import assignment as asg
from defgrid import optimizer as opt
from defgrid.grid import GridError, build_uniform_grid, signed_areas


def _deform(image, rows=4, cols=4, iters=60, **kw):
    h, w = image.shape[:2]
    grid = build_uniform_grid(rows, cols, w, h)
    feats = asg.FeatureMap.from_rgb(image)
    cfg = opt.OptimizerConfig(iterations=iters, **kw)
    return opt.deform(grid, feats, cfg), grid


class TestConfig:
    def test_validation(self):
        with pytest.raises(GridError):
            opt.OptimizerConfig(max_offset=0.6)
        with pytest.raises(GridError):
            opt.OptimizerConfig(step_size=0.0)
        with pytest.raises(GridError):
            opt.OptimizerConfig(flip_guard="clip")


class TestDeform:
    def test_loss_monotone_nonincreasing(self):
        trace, _ = _deform(two_tone_image(24, 24, split=10, noise=0.02))
        diffs = np.diff(trace.l_total)
        assert np.all(diffs <= trace.l_total[:-1] * 1e-9 + 1e-12)

    def test_loss_actually_decreases(self):
        trace, _ = _deform(two_tone_image(24, 24, split=10, noise=0.02))
        assert trace.l_total[-1] < trace.l_total[0]

    def test_areas_stay_positive_and_tile(self):
        trace, _ = _deform(random_image(32, 32, seed=3), iters=80)
        a = signed_areas(trace.grid)
        assert a.min() > opt.AREA_FLOOR
        assert np.isclose(a.sum(), 32 * 32, rtol=1e-9)

    def test_offsets_respect_clamp(self):
        trace, grid = _deform(random_image(32, 32, seed=4), iters=80)
        assert np.abs(trace.grid.offsets).max() <= 0.45 * grid.pitch + 1e-9

    def test_frozen_vertices_do_not_move(self):
        trace, grid = _deform(random_image(32, 32, seed=5), iters=40)
        moved = trace.grid.offsets
        assert np.all(moved[grid.freeze_x, 0] == 0)
        assert np.all(moved[grid.freeze_y, 1] == 0)

    def test_trace_records_initial_state(self):
        trace, _ = _deform(random_image(24, 24, seed=6), iters=5)
        assert len(trace.l_total) == 6
        assert trace.max_displacement[0] == 0.0

    def test_reject_mode_never_backtracks_upward(self):
        trace, _ = _deform(random_image(24, 24, seed=7), iters=30,
                           flip_guard="reject")
        diffs = np.diff(trace.l_total)
        assert np.all(diffs <= trace.l_total[:-1] * 1e-9 + 1e-12)

    def test_invalid_initial_grid_rejected(self):
        grid = build_uniform_grid(2, 2, 16, 16)
        off = grid.offsets.copy()
        off[4] = (12.0, 0.0)
        feats = asg.FeatureMap.from_rgb(random_image(16, 16))
        with pytest.raises(GridError):
            opt.deform(grid.with_offsets(off), feats)

    def test_json_lines_roundtrip(self):
        trace, _ = _deform(random_image(24, 24, seed=8), iters=3)
        lines = trace.to_json_lines().splitlines()
        assert len(lines) == 4
        rec = json.loads(lines[0])
        assert rec["iter"] == 0
        assert rec["l_total"] == pytest.approx(trace.l_total[0])


class TestApplyExternalOffsets:
    def test_valid_offsets_applied(self):
        grid = build_uniform_grid(3, 3, 24, 24)
        rng = np.random.default_rng(0)
        off = rng.uniform(-1, 1, grid.offsets.shape)
        out = opt.apply_external_offsets(grid, off)
        assert out.is_valid()
        assert np.abs(out.offsets).max() <= 0.45 * grid.pitch + 1e-12

    def test_flip_raises_with_cell_indices(self):
        # opposing near-clamp moves of adjacent vertices invert cell 3
        grid = build_uniform_grid(3, 3, 30, 30)
        off = np.zeros_like(grid.offsets)
        off[2] = (4.5, 0.0)
        off[5] = (4.5, 0.1)
        off[6] = (-4.5, -2.3)
        with pytest.raises(opt.FlippedCellsError) as exc:
            opt.apply_external_offsets(grid, off)
        assert 3 in exc.value.cell_indices

    def test_shape_mismatch(self):
        grid = build_uniform_grid(2, 2, 10, 10)
        with pytest.raises(GridError):
            opt.apply_external_offsets(grid, np.zeros((3, 2)))
