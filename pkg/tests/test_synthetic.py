import numpy as np
import pytest

from camtrap.manifest import FP_NAME, load_manifest
from camtrap.synthetic import SceneConfig, gen_synthetic, save_synthetic

SMALL = SceneConfig(width=48, height=48, cameras=2, frames_per_camera=15,
                    blob_size=(10, 16))


class TestGenerator:
    def test_no_animals_when_p_zero(self):
        cfg = SceneConfig(width=48, height=48, cameras=2, frames_per_camera=12,
                          blob_size=(10, 16), p_animal=0.0)
        data = gen_synthetic(cfg, seed=0)
        assert all(rec.label.name == FP_NAME for rec in data.manifest.records)
        assert all(rec.gt_box is None for rec in data.manifest.records)

    def test_deterministic_across_runs(self):
        a = gen_synthetic(SMALL, seed=5)
        b = gen_synthetic(SMALL, seed=5)
        assert [r.label.name for r in a.manifest.records] == \
            [r.label.name for r in b.manifest.records]
        assert [r.gt_box for r in a.manifest.records] == \
            [r.gt_box for r in b.manifest.records]
        for cam in a.frames:
            for fa, fb in zip(a.frames[cam], b.frames[cam]):
                assert np.array_equal(fa, fb)

    def test_gt_boxes_within_bounds_and_min_area(self):
        # property over > 1000 generated frames
        cfg = SceneConfig(width=64, height=56, cameras=3, frames_per_camera=40,
                          blob_size=(12, 20))
        frames = boxes = 0
        for seed in range(9):
            data = gen_synthetic(cfg, seed=seed)
            frames += len(data.manifest.records)
            for rec in data.manifest.records:
                if rec.gt_box is None:
                    continue
                boxes += 1
                b = rec.gt_box
                assert b.x >= 0 and b.y >= 0
                assert b.x + b.w <= cfg.width
                assert b.y + b.h <= cfg.height
                assert b.area >= 0.001 * cfg.width * cfg.height
        assert frames >= 1000
        assert boxes >= frames // 2

    def test_frames_in_unit_range(self):
        data = gen_synthetic(SMALL, seed=2)
        for frames in data.frames.values():
            for f in frames:
                assert f.shape == (48, 48, 3)
                assert f.min() >= 0.0 and f.max() <= 1.0

    def test_illumination_jitter_leaves_geometry(self):
        base = SceneConfig(width=48, height=48, cameras=1, frames_per_camera=15,
                           blob_size=(10, 16), illumination_jitter=0.0,
                           noise_sigma=0.0)
        lit = SceneConfig(width=48, height=48, cameras=1, frames_per_camera=15,
                          blob_size=(10, 16), illumination_jitter=0.3,
                          noise_sigma=0.0)
        a = gen_synthetic(base, seed=3)
        b = gen_synthetic(lit, seed=3)
        # same geometry and labels, different pixel values
        assert [r.gt_box for r in a.manifest.records] == \
            [r.gt_box for r in b.manifest.records]
        assert [r.label.name for r in a.manifest.records] == \
            [r.label.name for r in b.manifest.records]
        diffs = [np.abs(fa - fb).max()
                 for fa, fb in zip(a.frames["cam00"], b.frames["cam00"])]
        assert max(diffs) > 0.01

    def test_degenerate_blob_rejected(self):
        with pytest.raises(ValueError, match="blob larger"):
            SceneConfig(width=32, height=32, blob_size=(20, 40))

    def test_label_set_has_fp_last(self):
        data = gen_synthetic(SMALL, seed=1)
        names = [lab.name for lab in data.manifest.label_set]
        assert names[-1] == FP_NAME
        assert len(names) == len(SMALL.genus_names) + 1


class TestSaveSynthetic:
    def test_manifest_and_frames_on_disk(self, tmp_path):
        data = gen_synthetic(SMALL, seed=4)
        manifest_path = save_synthetic(data, tmp_path / "scene")
        manifest = load_manifest(manifest_path)
        assert len(manifest.records) == len(data.manifest.records)
        from camtrap.imaging import load_image
        rec = manifest.records[0]
        img = load_image(rec.image_path)
        original = data.frames[rec.camera_id][rec.frame_index]
        assert np.abs(img - original).max() <= 0.5 / 255.0 + 1e-12

    def test_saved_dataset_deterministic(self, tmp_path):
        d1 = gen_synthetic(SMALL, seed=6)
        d2 = gen_synthetic(SMALL, seed=6)
        p1 = save_synthetic(d1, tmp_path / "a")
        p2 = save_synthetic(d2, tmp_path / "b")
        assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == \
            (tmp_path / "b" / "manifest.jsonl").read_bytes()
