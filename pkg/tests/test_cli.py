import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from conftest import two_tone_image
from defgrid import imageio as iio


def run_cli(args, **kw):
    return subprocess.run([sys.executable, "-m", "defgrid.cli", *args],
                          capture_output=True, text=True, **kw)


@pytest.fixture(scope="module")
def image_path(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    img = two_tone_image(32, 32, split=14, noise=0.02)
    path = d / "img.png"
    Image.fromarray((img * 255).astype(np.uint8)).save(path)
    return path


@pytest.fixture(scope="module")
def mask_path(tmp_path_factory):
    d = tmp_path_factory.mktemp("clim")
    mask = np.zeros((32, 32), dtype=np.uint8)
    mask[8:26, 6:24] = 255
    path = d / "mask.pgm"
    iio.save_pgm(path, mask)
    return path


class TestPartition:
    def test_outputs_and_determinism(self, image_path, tmp_path):
        args = ["partition", "--image", str(image_path), "--quads", "4x4",
                "--iters", "20", "--superpixels", "4", "--trace-energy"]
        r1 = run_cli(args + ["--out", str(tmp_path / "a")])
        r2 = run_cli(args + ["--out", str(tmp_path / "b")])
        assert r1.returncode == 0, r1.stderr
        assert r2.returncode == 0
        for name in ("grid.json", "labels.pgm", "trace.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_metrics_csv(self, image_path, tmp_path):
        gt = np.zeros((32, 32), dtype=np.uint8)
        gt[:, 14:] = 1
        iio.save_pgm(tmp_path / "gt.pgm", gt)
        r = run_cli(["partition", "--image", str(image_path), "--quads",
                     "4x4", "--iters", "10", "--superpixels", "2",
                     "--gt", str(tmp_path / "gt.pgm"),
                     "--out", str(tmp_path / "o")])
        assert r.returncode == 0, r.stderr
        lines = (tmp_path / "o" / "metrics.csv").read_text().splitlines()
        assert lines[0] == "image,n,asa,bp,br,f"
        assert lines[1].startswith("img.png,2,")

    def test_labels_pgm_16bit(self, image_path, tmp_path):
        r = run_cli(["partition", "--image", str(image_path), "--quads",
                     "4x4", "--iters", "5", "--superpixels", "4",
                     "--out", str(tmp_path / "o")])
        assert r.returncode == 0
        head = (tmp_path / "o" / "labels.pgm").read_bytes()[:20]
        assert head.startswith(b"P5")
        assert b"65535" in head
        ids = iio.load_pgm(tmp_path / "o" / "labels.pgm")
        assert ids.shape == (32, 32)
        assert ids.max() == 3


class TestTrace:
    def test_mask_mode(self, image_path, mask_path, tmp_path):
        r = run_cli(["trace", "--image", str(image_path), "--mask",
                     str(mask_path), "--quads", "4x4", "--iters", "10",
                     "--out", str(tmp_path / "t")])
        assert r.returncode == 0, r.stderr
        poly = json.loads((tmp_path / "t" / "polygon.json").read_text())
        assert set(poly) == {"vertices", "vertex_indices", "energy"}
        assert len(poly["vertices"]) == len(poly["vertex_indices"])

    def test_explicit_seeds_and_gt_metrics(self, image_path, mask_path,
                                           tmp_path):
        seeds = tmp_path / "seeds.json"
        seeds.write_text(json.dumps(
            [[6.0, 8.0], [24.0, 8.0], [24.0, 26.0], [6.0, 26.0]]))
        r = run_cli(["trace", "--image", str(image_path), "--mask",
                     str(mask_path), "--seeds", str(seeds), "--quads",
                     "4x4", "--iters", "10", "--gt", str(mask_path),
                     "--out", str(tmp_path / "t")])
        assert r.returncode == 0, r.stderr
        assert "miou=" in r.stdout and "f1px=" in r.stdout

    def test_requires_mask_or_seeds(self, image_path, tmp_path):
        r = run_cli(["trace", "--image", str(image_path),
                     "--out", str(tmp_path / "t")])
        assert r.returncode == 1
        assert "need --mask or --seeds" in r.stderr

    def test_determinism(self, image_path, mask_path, tmp_path):
        args = ["trace", "--image", str(image_path), "--mask",
                str(mask_path), "--quads", "4x4", "--iters", "10"]
        run_cli(args + ["--out", str(tmp_path / "a")])
        run_cli(args + ["--out", str(tmp_path / "b")])
        for name in ("grid.json", "polygon.json", "mask.png"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()


class TestPool:
    def test_outputs(self, image_path, tmp_path):
        r = run_cli(["pool", "--image", str(image_path), "--quads", "4x4",
                     "--iters", "5", "--out", str(tmp_path / "p")])
        assert r.returncode == 0, r.stderr
        from defgrid.pooling import CellFeatureGrid
        cells = CellFeatureGrid.from_bytes(
            (tmp_path / "p" / "cells.bin").read_bytes())
        assert cells.n_cells == 32
        assert cells.channels == 3
        assert (tmp_path / "p" / "recon.png").exists()


class TestErrors:
    def test_missing_image_is_user_error(self, tmp_path):
        r = run_cli(["partition", "--image", str(tmp_path / "nope.png"),
                     "--out", str(tmp_path / "o")])
        assert r.returncode == 1
        assert "does not exist" in r.stderr

    def test_bad_quads(self, image_path, tmp_path):
        r = run_cli(["partition", "--image", str(image_path), "--quads",
                     "banana", "--out", str(tmp_path / "o")])
        assert r.returncode == 1
