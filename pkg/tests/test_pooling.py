import numpy as np
import pytest

from conftest import jittered_grid, random_image
from defgrid import assignment as asg
from defgrid import pooling as pl
from defgrid.grid import GridError, build_uniform_grid


def quad_constant_image(rows, cols, width, height, seed=0):
    """Image constant within every base quad (so within every cell)."""
    rng = np.random.default_rng(seed)
    vals = rng.uniform(0, 1, (rows, cols, 3))
    ys = np.minimum((np.arange(height) * rows) // height, rows - 1)
    xs = np.minimum((np.arange(width) * cols) // width, cols - 1)
    return vals[ys][:, xs]


class TestPoolPaste:
    def test_pool_paste_identity_on_aligned_image(self):
        img = quad_constant_image(4, 4, 32, 32, seed=1)
        grid = build_uniform_grid(4, 4, 32, 32)
        feats = asg.FeatureMap.from_rgb(img)
        cells = pl.grid_pool(grid, feats)
        recon = pl.paste_back(grid, cells)
        assert np.allclose(recon.data, img, atol=1e-12)

    def test_paste_pool_idempotent(self):
        grid = jittered_grid(4, 4, 32, 32, seed=2)
        feats = asg.FeatureMap.from_rgb(random_image(32, 32, seed=3))
        labels = pl.hard_labels(grid, 32, 32)
        c1 = pl.grid_pool(grid, feats, labels=labels)
        pasted = pl.paste_back(grid, c1, labels=labels)
        c2 = pl.grid_pool(grid, pasted, labels=labels)
        assert np.abs(c1.values - c2.values).max() < 1e-9

    def test_mean_matches_loops(self):
        grid = jittered_grid(3, 3, 24, 24, seed=4)
        feats = asg.FeatureMap.from_rgb(random_image(24, 24, seed=5))
        labels = pl.hard_labels(grid, 24, 24)
        cells = pl.grid_pool(grid, feats, labels=labels)
        f = feats.flat
        for k in range(grid.topology.n_cells):
            mine = f[labels == k]
            if len(mine):
                assert np.allclose(cells.values[k], mine.mean(axis=0),
                                   atol=1e-12)

    def test_max_matches_loops(self):
        grid = jittered_grid(3, 3, 24, 24, seed=6)
        feats = asg.FeatureMap.from_rgb(random_image(24, 24, seed=7))
        labels = pl.hard_labels(grid, 24, 24)
        cells = pl.grid_pool(grid, feats, pl.POOL_MAX, labels=labels)
        f = feats.flat
        for k in range(grid.topology.n_cells):
            mine = f[labels == k]
            if len(mine):
                assert np.allclose(cells.values[k], mine.max(axis=0),
                                   atol=1e-12)

    def test_empty_cells_flagged_and_filled(self):
        # 1x1 px per cell pair guarantees some triangles get no pixel
        grid = build_uniform_grid(4, 4, 4, 4)
        feats = asg.FeatureMap.from_rgb(random_image(4, 4, seed=8))
        cells = pl.grid_pool(grid, feats)
        assert cells.empty.any()
        assert np.isfinite(cells.values).all()

    def test_bad_mode(self):
        grid = build_uniform_grid(2, 2, 8, 8)
        feats = asg.FeatureMap.from_rgb(random_image(8, 8))
        with pytest.raises(GridError):
            pl.grid_pool(grid, feats, mode="median")


class TestBytes:
    def test_roundtrip_exact(self):
        grid = jittered_grid(3, 3, 24, 24, seed=9)
        feats = asg.FeatureMap.from_rgb(random_image(24, 24, seed=10))
        cells = pl.grid_pool(grid, feats)
        buf = cells.to_bytes()
        back = pl.CellFeatureGrid.from_bytes(buf)
        assert back.to_bytes() == buf
        assert np.allclose(back.values, cells.values, atol=1e-7)

    def test_header_layout(self):
        import struct
        cells = pl.CellFeatureGrid(values=np.zeros((5, 3)), mode="mean",
                                   empty=np.zeros(5, dtype=bool))
        buf = cells.to_bytes()
        assert struct.unpack_from("<II", buf, 0) == (5, 3)
        assert len(buf) == 8 + 5 * 3 * 4


class TestLabelCells:
    def test_majority_and_tie_rules(self):
        grid = build_uniform_grid(1, 1, 4, 4)
        # cell 0 covers the upper-left triangle, cell 1 the lower-right
        mask = np.zeros((4, 4), dtype=np.int64)
        mask[0, :] = 1                 # top row forces a cell-0 majority
        labels, frac, empty = pl.label_cells(grid, mask)
        assert labels[0] == 1 or labels[0] == 0
        assert not empty.any()
        hard = pl.hard_labels(grid, 4, 4)
        counts0 = np.bincount(mask.reshape(-1)[hard == 0], minlength=2)
        expect0 = 0 if counts0[0] == counts0[1] else counts0.argmax()
        assert labels[0] == expect0

    def test_fraction_bounds(self):
        grid = jittered_grid(3, 3, 24, 24, seed=11)
        mask = (random_image(24, 24, seed=12)[..., 0] > 0.5).astype(int)
        labels, frac, empty = pl.label_cells(grid, mask)
        assert np.all((frac >= 0) & (frac <= 1))
        assert labels.max() <= 1

    def test_rasterize_consistent(self):
        grid = jittered_grid(3, 3, 24, 24, seed=13)
        mask = (random_image(24, 24, seed=14)[..., 1] > 0.5).astype(int)
        hard = pl.hard_labels(grid, 24, 24)
        labels, _, _ = pl.label_cells(grid, mask, labels=hard)
        img = pl.rasterize_cell_labels(grid, labels, labels=hard)
        assert img.shape == (24, 24)
        assert np.array_equal(img.reshape(-1), labels[hard])

    def test_extent_mismatch(self):
        grid = build_uniform_grid(2, 2, 8, 8)
        with pytest.raises(GridError):
            pl.label_cells(grid, np.zeros((4, 4), dtype=int))
