import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from trackaug.cli import MANIFEST_HEADER, main
from trackaug.geometry import BBox


def read_manifest(out_dir: Path):
    lines = (out_dir / "manifest.txt").read_text().splitlines()
    assert lines[0] == MANIFEST_HEADER
    return [json.loads(ln) for ln in lines[1:]]


def dir_bytes(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


class TestAugment:
    def test_counts(self, config_path, tmp_path):
        out = tmp_path / "out"
        assert main(["augment", "--config", str(config_path), "--out", str(out),
                     "--epochs", "1"]) == 0
        records = read_manifest(out)
        assert len(records) == 8
        pngs = list(out.glob("*.png"))
        assert len(pngs) == 16
        for r in records:
            assert (out / r["search_png"]).is_file()
            assert (out / r["template_png"]).is_file()

    def test_rerun_byte_identical(self, config_path, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["augment", "--config", str(config_path), "--out", str(a)])
        main(["augment", "--config", str(config_path), "--out", str(b)])
        assert dir_bytes(a) == dir_bytes(b)

    def test_workers_content_identical(self, config_path, tmp_path):
        a, b = tmp_path / "w1", tmp_path / "w8"
        main(["augment", "--config", str(config_path), "--out", str(a), "--workers", "1"])
        main(["augment", "--config", str(config_path), "--out", str(b), "--workers", "8"])
        assert dir_bytes(a) == dir_bytes(b)

    def test_boxes_reproject_into_frames(self, geometric_free_config_path, tmp_path):
        out = tmp_path / "out"
        main(["augment", "--config", str(geometric_free_config_path), "--out", str(out)])
        for r in read_manifest(out):
            tf = r["search_to_image"]
            x, y, w, h = r["search_box"]
            gx = x * tf["scale"] + tf["offset"][0]
            gy = y * tf["scale"] + tf["offset"][1]
            ix, iy, iw, ih = r["search_box_image"]
            assert abs(gx - ix) <= 0.5
            assert abs(gy - iy) <= 0.5
            assert abs(w * tf["scale"] - iw) <= 0.5
            assert abs(h * tf["scale"] - ih) <= 0.5
            # fixture frames are 128x96; annotation boxes live inside them
            assert -0.5 <= gx and gx + w * tf["scale"] <= 128.5
            assert -0.5 <= gy and gy + h * tf["scale"] <= 96.5

    def test_epoch_range(self, config_path, tmp_path):
        out = tmp_path / "out"
        main(["augment", "--config", str(config_path), "--out", str(out), "--epochs", "1:2"])
        records = read_manifest(out)
        assert {r["epoch"] for r in records} == {1}

    def test_bad_config_exit_code(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("seed: 1\nnope: 2\n")
        assert main(["augment", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


class TestPreview:
    def test_grid_file(self, config_path, tmp_path):
        out = tmp_path / "grid.png"
        assert main(["preview", "--config", str(config_path), "--out", str(out), "--n", "8"]) == 0
        img = Image.open(out)
        assert img.size == (3 * 64, 3 * 64)

    def test_boundary_tiles_cross_edge(self, config_path, tmp_path, image_dataset_path,
                                       sequence_dataset_path):
        from conftest import write_config
        cfg = write_config(tmp_path / "boundary.yaml", image_dataset_path,
                           sequence_dataset_path, p_flip=0.0, p_rotate=0.0)
        text = cfg.read_text().replace("p_boundary: 0.05", "p_boundary: 1.0")
        cfg.write_text(text)
        out = tmp_path / "aug"
        main(["augment", "--config", str(cfg), "--out", str(out), "--epochs", "1"])
        records = read_manifest(out)
        for r in records:
            assert r["kind"] == "boundary"
            x, y, w, h = r["search_box"]
            d = r["direction"]
            crossing = {
                "left": x < 0 < x + w,
                "right": x < 64 < x + w,
                "top": y < 0 < y + h,
                "bottom": y < 64 < y + h,
            }
            assert crossing[d]
            # the drawn box must touch the patch edge it crosses
            tile = np.asarray(Image.open(out / r["search_png"]))
            assert tile.shape == (64, 64, 3)
        assert main(["preview", "--config", str(cfg), "--out",
                     str(tmp_path / "bgrid.png"), "--n", "4"]) == 0
        grid = np.asarray(Image.open(tmp_path / "bgrid.png"))
        red = (grid[:, :, 0] > 200) & (grid[:, :, 1] < 90) & (grid[:, :, 2] < 90)
        assert red.sum() > 20  # drawn boxes present

    def test_n_zero_usage_error(self, config_path, tmp_path):
        assert main(["preview", "--config", str(config_path), "--out",
                     str(tmp_path / "g.png"), "--n", "0"]) == 2


class TestStats:
    def test_crop_mode_orc(self, config_path, tmp_path):
        out = tmp_path / "stats"
        assert main(["stats", "--config", str(config_path), "--out", str(out),
                     "--mode", "crop", "--n", "3000"]) == 0
        text = (out / "crop_report.txt").read_text()
        assert "uninformative_rate: 0.000000" in text
        assert (out / "crop_report.csv").is_file()

    def test_sweep_mode(self, config_path, tmp_path):
        out = tmp_path / "stats"
        assert main(["stats", "--config", str(config_path), "--out", str(out),
                     "--mode", "sweep", "--n", "300"]) == 0
        rows = (out / "sweep.csv").read_text().strip().splitlines()
        assert len(rows) == 17

    def test_mix_mode(self, config_path, tmp_path):
        out = tmp_path / "stats"
        assert main(["stats", "--config", str(config_path), "--out", str(out),
                     "--mode", "mix", "--n", "500"]) == 0
        text = (out / "mix_report.txt").read_text()
        assert "max_mean_residual" in text
        for line in text.splitlines():
            if line.startswith("max_mean_residual") or line.startswith("max_std_residual"):
                assert float(line.split(":")[1]) < 1e-5


class TestBench:
    def test_report_fields_and_scaling(self, config_path, tmp_path):
        out = tmp_path / "bench.json"
        assert main(["bench", "--config", str(config_path), "--n", "50",
                     "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        for key in ("crops_per_s", "full_pairs_per_s", "tfmix_ops_per_s"):
            assert rep[key] > 0
        out2 = tmp_path / "bench2.json"
        main(["bench", "--config", str(config_path), "--n", "100", "--out", str(out2)])
        rep2 = json.loads(out2.read_text())
        assert rep2["ops_per_batch"]["crops"] == 2 * rep["ops_per_batch"]["crops"]

    def test_worker_counts_share_digest(self, config_path, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["bench", "--config", str(config_path), "--n", "20", "--out", str(a)])
        main(["bench", "--config", str(config_path), "--n", "20", "--workers", "2",
              "--out", str(b)])
        ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
        assert ra["content_digest"] == rb["content_digest"]
