import json

import numpy as np
import pytest

from trackaug.datasets import (
    DatasetError,
    draw_pair,
    epoch_schedule,
    load_frame,
    load_image_dataset,
    load_sequence_dataset,
    rng_for,
    subset_fraction,
)
from trackaug.geometry import BBox
from trackaug.mixing import NoDistractorError, TfmixConfig, select_distractor

from conftest import build_sequence_dataset


class TestImageDataset:
    def test_loads_fixture(self, image_dataset_path):
        ds = load_image_dataset(image_dataset_path)
        assert len(ds) == 6
        first = ds.sample_for_object("ann1", np.random.default_rng(0))
        assert first.template_box == BBox(14.0, 12.0, 24.0, 18.0)
        assert first.category == "cat"

    def test_single_image_two_objects(self, tmp_path):
        p = tmp_path / "ann.json"
        p.write_text(json.dumps({
            "images": [{"id": 1, "file_name": "a.png"}],
            "annotations": [
                {"id": 1, "image_id": 1, "bbox": [1.0, 2.0, 3.0, 4.0], "category_id": 9},
                {"id": 2, "image_id": 1, "bbox": [5, 6, 7, 8]},
            ],
            "categories": [],
        }))
        ds = load_image_dataset(p)
        assert len(ds) == 2
        s = ds.sample_for_object("ann2", np.random.default_rng(0))
        assert s.search_box == BBox(5, 6, 7, 8)
        assert ds.category_of("ann1") == "9"

    def test_empty_annotations_ok(self, tmp_path):
        p = tmp_path / "ann.json"
        p.write_text(json.dumps({"images": [], "annotations": [], "categories": []}))
        assert len(load_image_dataset(p)) == 0

    def test_malformed_field_named(self, tmp_path):
        p = tmp_path / "ann.json"
        p.write_text(json.dumps({
            "images": [{"id": 1, "file_name": "a.png"}],
            "annotations": [{"id": "x", "image_id": 1, "bbox": [1, 2, 3, 4]}],
        }))
        with pytest.raises(DatasetError, match="'id'"):
            load_image_dataset(p)

    def test_bad_bbox_named(self, tmp_path):
        p = tmp_path / "ann.json"
        p.write_text(json.dumps({
            "images": [{"id": 1, "file_name": "a.png"}],
            "annotations": [{"id": 1, "image_id": 1, "bbox": [1, 2, "w", 4]}],
        }))
        with pytest.raises(DatasetError, match="bbox"):
            load_image_dataset(p)


class TestSequenceDataset:
    def test_loads_fixture(self, sequence_dataset_path):
        ds = load_sequence_dataset(sequence_dataset_path)
        assert ds.object_ids() == ["seq_a", "seq_b"]
        assert ds.category_of("seq_b") == "dog"
        seq = ds.sequences[0]
        assert len(seq.frame_paths) == 6 == len(seq.boxes)
        assert seq.boxes[0] == BBox(10.0, 20.0, 22.0, 16.0)

    def test_frame_count_mismatch(self, tmp_path):
        root = build_sequence_dataset(tmp_path / "seqs", specs=(("broken", "cat", 3),))
        gt = root / "broken" / "groundtruth.txt"
        gt.write_text(gt.read_text() + "1,2,3,4\n")
        with pytest.raises(DatasetError, match="broken"):
            load_sequence_dataset(root)

    def test_frame_pixels_loadable(self, sequence_dataset_path):
        ds = load_sequence_dataset(sequence_dataset_path)
        img = load_frame(ds.sequences[0].frame_paths[0])
        assert img.shape == (96, 128, 3) and img.dtype == np.uint8


class TestSubsetFraction:
    def test_full_fraction_identity(self, sequence_dataset_path):
        ds = load_sequence_dataset(sequence_dataset_path)
        sub = subset_fraction(ds, 1.0, seed=3)
        assert sub.object_ids() == ds.object_ids()

    def test_quarter_of_eight(self, tmp_path):
        specs = tuple((f"s{i}", "cat", 2) for i in range(8))
        ds = load_sequence_dataset(build_sequence_dataset(tmp_path / "seqs", specs=specs))
        sub = subset_fraction(ds, 0.25, seed=0)
        assert len(sub) == 2

    def test_deterministic_and_varied(self, tmp_path):
        specs = tuple((f"s{i:03d}", "cat", 2) for i in range(100))
        ds = load_sequence_dataset(build_sequence_dataset(tmp_path / "seqs", specs=specs))
        a = subset_fraction(ds, 0.0625, seed=5).object_ids()
        b = subset_fraction(ds, 0.0625, seed=5).object_ids()
        assert a == b and len(a) == 7
        others = [subset_fraction(ds, 0.0625, seed=s).object_ids() for s in range(6, 16)]
        assert any(o != a for o in others)

    def test_image_dataset_subsets_by_image(self, image_dataset_path):
        ds = load_image_dataset(image_dataset_path)
        sub = subset_fraction(ds, 1 / 3, seed=0)
        images = {o.image_path for o in sub.objects}
        assert len(images) == 1 and len(sub) == 2


class TestDrawPair:
    def test_image_dataset_same_frame(self, image_dataset_path):
        ds = load_image_dataset(image_dataset_path)
        pair = draw_pair(ds, np.random.default_rng(0))
        assert pair.template_frame == pair.search_frame
        assert pair.frame_indices == (0, 0)

    def test_zero_gap_same_frame(self, sequence_dataset_path):
        ds = load_sequence_dataset(sequence_dataset_path)
        for seed in range(50):
            pair = draw_pair(ds, np.random.default_rng(seed), max_frame_gap=0)
            assert pair.template_frame == pair.search_frame

    def test_gap_bound(self, tmp_path):
        ds = load_sequence_dataset(build_sequence_dataset(
            tmp_path / "seqs", specs=(("long", "cat", 80),)))
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            pair = draw_pair(ds, rng, max_frame_gap=50)
            t, q = pair.frame_indices
            assert 0 <= abs(t - q) <= 50

    def test_empty_dataset_error(self, tmp_path):
        (tmp_path / "empty").mkdir()
        ds = load_sequence_dataset(tmp_path / "empty")
        with pytest.raises(DatasetError):
            draw_pair(ds, np.random.default_rng(0))


class TestSelectDistractor:
    def test_same_category_preferred(self, image_dataset_path):
        ds = load_image_dataset(image_dataset_path)
        rng = np.random.default_rng(0)
        for _ in range(50):
            out = select_distractor(ds, "cat", "ann1", rng)
            assert out.category == "cat"
            assert out.sequence_id != "ann1"

    def test_category_singleton_falls_back(self, tmp_path):
        root = build_sequence_dataset(tmp_path / "seqs",
                                      specs=(("only_cat", "cat", 2), ("a_dog", "dog", 2)))
        ds = load_sequence_dataset(root)
        out = select_distractor(ds, "cat", "only_cat", np.random.default_rng(0))
        assert out.sequence_id == "a_dog"

    def test_no_other_object_error(self, tmp_path):
        root = build_sequence_dataset(tmp_path / "seqs", specs=(("solo", "cat", 2),))
        ds = load_sequence_dataset(root)
        with pytest.raises(NoDistractorError):
            select_distractor(ds, "cat", "solo", np.random.default_rng(0))

    def test_never_returns_query(self, image_dataset_path):
        ds = load_image_dataset(image_dataset_path)
        rng = np.random.default_rng(2)
        for obj in ds.object_ids():
            for _ in range(10):
                out = select_distractor(ds, ds.category_of(obj), obj, rng)
                assert out.sequence_id != obj


class TestCategoryIndex:
    def test_every_object_reachable_by_category(self, image_dataset_path, sequence_dataset_path):
        for ds in (load_image_dataset(image_dataset_path),
                   load_sequence_dataset(sequence_dataset_path)):
            via_categories = [o for members in ds.by_category.values() for o in members]
            assert sorted(via_categories) == sorted(ds.object_ids())
            for cat, members in ds.by_category.items():
                assert all(ds.category_of(o) == cat for o in members)


class TestEpochSchedule:
    def test_default_phase(self):
        cfg = TfmixConfig(epoch_period=11)
        active = [e for e in range(40) if epoch_schedule(e, cfg).tfmix_active]
        assert active == [10, 21, 32]

    def test_period_one_always_active(self):
        cfg = TfmixConfig(epoch_period=1)
        assert all(epoch_schedule(e, cfg).tfmix_active for e in range(20))

    def test_offset_selects_other_phase(self):
        cfg = TfmixConfig(epoch_period=11, epoch_offset=1)
        active = [e for e in range(40) if epoch_schedule(e, cfg).tfmix_active]
        assert active == [0, 11, 22, 33]

    def test_window_counts(self):
        cfg = TfmixConfig(epoch_period=11)
        for start in range(0, 60, 7):
            for n in (11, 25, 40):
                count = sum(epoch_schedule(e, cfg).tfmix_active for e in range(start, start + n))
                assert n // 11 - 1 <= count <= n // 11 + 1

    def test_disabled(self):
        cfg = TfmixConfig(enabled=False, epoch_period=1)
        assert not epoch_schedule(0, cfg).tfmix_active


class TestRngStreams:
    def test_reproducible(self):
        a = rng_for(7, "ds", 3, 11, "crop").generator().random(1000)
        b = rng_for(7, "ds", 3, 11, "crop").generator().random(1000)
        assert np.array_equal(a, b)

    def test_stage_changes_stream(self):
        a = rng_for(7, "ds", 3, 11, "crop").generator().random(10)
        b = rng_for(7, "ds", 3, 11, "mix").generator().random(10)
        assert not np.array_equal(a, b)

    def test_each_coordinate_matters(self):
        base = rng_for(7, "ds", 3, 11, "crop").generator().random(4)
        variants = [
            rng_for(8, "ds", 3, 11, "crop"),
            rng_for(7, "ds2", 3, 11, "crop"),
            rng_for(7, "ds", 4, 11, "crop"),
            rng_for(7, "ds", 3, 12, "crop"),
        ]
        for v in variants:
            assert not np.array_equal(base, v.generator().random(4))

    def test_collision_smoke(self):
        # one million streams, no duplicated first 64-bit output
        seen = np.empty(1_000_000, dtype=np.uint64)
        k = 0
        for epoch in range(10):
            for index in range(100_000):
                g = rng_for(0, "ds", epoch, index, "crop").generator()
                seen[k] = g.integers(0, 2 ** 64, dtype=np.uint64)
                k += 1
        assert len(np.unique(seen)) == 1_000_000
