"""
Tests for dataset IO, cropping, filtering and paired training examples.
"""
import os

import numpy as np
import pytest
import torch

from dataset.io import (denormalize_image, image_path, mask_path, normalize_image, read_image, read_landmarks,
                        read_mask, write_image, write_mask)
from dataset.manifest import (DatasetManifest, PairRecord, load_manifest, manifest_from_dataset,
                              read_pairs_file, save_manifest)
from dataset.paired import EpochSampler, FeatureCache, PairedDataset, compute_image_features, load_pair
from dataset.preprocess import bbox_from_mask, crop_and_pad, filter_detectable
from dataset.synthetic import make_synthetic_dataset
from pose.geometry import NUM_PARTS
from pose.partition import binarize_mask
from tests.conftest import MICRO_SIZE, landmarks_from_dict
from utils.exceptions import DataLoadError, InvalidArgumentError, SampleRejectedError


class TestNormalization:
    """8-bit to [-1, 1] mapping."""

    def test_endpoints(self):
        values = normalize_image(np.array([[[0, 128, 255]]], dtype=np.uint8))
        assert values.dtype == np.float32
        assert values[0, 0, 0] == -1.0
        assert values[0, 0, 1] == pytest.approx(0.00392, abs=1e-5)
        assert values[0, 0, 2] == 1.0

    def test_every_level_round_trips(self):
        levels = np.arange(256, dtype=np.uint8).reshape(16, 16, 1).repeat(3, axis=2)
        np.testing.assert_array_equal(denormalize_image(normalize_image(levels)), levels)

    def test_mask_value_200_is_person(self):
        assert binarize_mask(np.array([[200]], dtype=np.uint8))[0, 0] == 1


class TestFileIO:
    """Image, mask and landmark files."""

    def test_image_and_mask_round_trip(self, tmp_path):
        rgb = np.random.default_rng(0).integers(0, 256, size=(8, 4, 3), dtype=np.uint8)
        mask = np.zeros((8, 4), dtype=np.uint8)
        mask[2:5] = 255
        path = write_image(image_path(str(tmp_path), "a_0"), rgb)
        write_mask(mask_path(str(tmp_path), "a_0"), mask)
        np.testing.assert_array_equal(read_image(path), rgb)
        np.testing.assert_array_equal(read_mask(mask_path(str(tmp_path), "a_0")), mask)

    def test_missing_files_name_path_and_field(self, tmp_path):
        with pytest.raises(DataLoadError) as info:
            read_image(str(tmp_path / "nope.png"))
        assert info.value.field == "image" and "nope.png" in info.value.path
        with pytest.raises(DataLoadError, match="landmarks"):
            read_landmarks(str(tmp_path), "nope")

    def test_corrupt_image(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"not a png")
        with pytest.raises(DataLoadError, match="decode"):
            read_image(str(path))


class TestManifest:
    """Pairs files and manifests."""

    def test_pairs_file_skips_comments(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("# header\n\na_0 a_1\nb_0 b_1\n")
        assert read_pairs_file(str(path)) == [PairRecord("a_0", "a_1"), PairRecord("b_0", "b_1")]

    def test_malformed_pairs_line(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("a_0 a_1 extra\n")
        with pytest.raises(DataLoadError, match="line 1"):
            read_pairs_file(str(path))

    def test_reverse_pairs(self):
        manifest = DatasetManifest("r", pairs=[PairRecord("a", "b"), PairRecord("b", "a"), PairRecord("c", "d")])
        pairs = manifest.with_reverse_pairs().pairs
        assert pairs == [PairRecord("a", "b"), PairRecord("b", "a"), PairRecord("c", "d"), PairRecord("d", "c")]

    def test_save_and_load(self, tmp_path):
        manifest = DatasetManifest(str(tmp_path), resolution=(64, 32), pairs=[PairRecord("a_0", "a_1")],
                                   dropped=[{"pair": "b_0:b_1", "image_id": "b_1", "reason": "x"}])
        save_manifest(manifest, str(tmp_path))
        assert load_manifest(str(tmp_path)) == manifest

    def test_load_missing_manifest(self, tmp_path):
        with pytest.raises(DataLoadError, match="manifest"):
            load_manifest(str(tmp_path / "manifest.json"))


class TestCropAndPad:
    """Person crops at the 2:1 target ratio."""

    def test_exact_ratio_is_pure_resize(self):
        image = np.full((300, 200, 3), 255, dtype=np.uint8)
        cropped = crop_and_pad(image, (50, 50, 200, 100))
        assert cropped.image.shape == (128, 64, 3)
        assert cropped.padding == (0, 0, 0, 0)
        assert cropped.scale == pytest.approx((0.64, 0.64))
        assert (cropped.image == 255).all()

    def test_narrow_box_is_padded_evenly(self):
        image = np.full((300, 200, 3), 255, dtype=np.uint8)
        mask = np.full((300, 200), 255, dtype=np.uint8)
        landmarks = landmarks_from_dict({"nose": (110.0, 60.0), "neck": (5.0, 5.0)}, 300, 200)
        cropped = crop_and_pad(image, (10, 20, 200, 80), mask=mask, landmarks=landmarks)
        assert cropped.padding == (0, 0, 10, 10)
        assert cropped.image.shape == (128, 64, 3)
        assert cropped.mask.shape == (128, 64)
        # 10 padded columns scale to 6.4 output columns on each side
        assert not cropped.mask[:, :6].any() and not cropped.mask[:, -6:].any()
        assert cropped.mask[:, 7:57].all()
        np.testing.assert_allclose(cropped.landmarks.point("nose"), [63.82, 31.82])
        assert cropped.landmarks.point("neck") is None

    def test_landmarks_follow_resized_pixels(self):
        """A landmark lands where the resized image shows the content it marked."""
        rows, cols = np.indices((300, 200), dtype=np.float32)
        image = np.stack([rows - 10, cols - 20, np.zeros_like(rows)], axis=-1)
        points = {"nose": (40.0, 50.0), "neck": (137.0, 83.0), "r_hip": (221.0, 131.0)}
        cropped = crop_and_pad(image, (10, 20, 256, 128), landmarks=landmarks_from_dict(points, 300, 200))
        for name, (r, c) in points.items():
            q_r, q_c = cropped.landmarks.point(name)
            row_ramp = cropped.image[:, int(round(q_c)), 0]
            col_ramp = cropped.image[int(round(q_r)), :, 1]
            assert np.interp(q_r, np.arange(128), row_ramp) == pytest.approx(r - 10, abs=1e-3)
            assert np.interp(q_c, np.arange(64), col_ramp) == pytest.approx(c - 20, abs=1e-3)

    def test_small_box_rejected(self):
        with pytest.raises(SampleRejectedError):
            crop_and_pad(np.zeros((300, 200, 3), np.uint8), (0, 0, 100, 64))

    def test_box_outside_image(self):
        with pytest.raises(InvalidArgumentError):
            crop_and_pad(np.zeros((100, 100, 3), np.uint8), (50, 0, 60, 10))

    def test_bbox_from_mask(self):
        mask = np.zeros((10, 8), np.uint8)
        mask[2:5, 3:7] = 200
        assert bbox_from_mask(mask) == (2, 3, 3, 4)
        assert bbox_from_mask(np.zeros((4, 4), np.uint8)) is None


class TestFilter:
    """Dropping pairs without a detectable person."""

    def test_three_defects_of_ten(self, tmp_path):
        info = make_synthetic_dataset(str(tmp_path / "raw"), num_identities=10, height=64, width=32, seed=1,
                                      defects={1: "no_landmarks", 4: "empty_mask", 7: "no_landmarks"})
        filtered, report = filter_detectable(manifest_from_dataset(info.root, MICRO_SIZE))
        assert len(filtered.pairs) == 7
        assert report.kept == 7
        assert report.dropped_ids == ["p001_1", "p004_1", "p007_1"]
        assert {entry["reason"] for entry in report.dropped} == {"no landmarks detected", "empty person mask"}

    def test_missing_limb_is_kept(self, tmp_path):
        info = make_synthetic_dataset(str(tmp_path / "raw"), num_identities=3, height=64, width=32,
                                      defects={0: "missing_left_arm"})
        filtered, report = filter_detectable(manifest_from_dataset(info.root, MICRO_SIZE))
        assert len(filtered.pairs) == 3 and not report.dropped

    def test_unreadable_file_is_dropped(self, tmp_path):
        info = make_synthetic_dataset(str(tmp_path / "raw"), num_identities=2, height=64, width=32)
        os.remove(mask_path(info.root, "p000_0"))
        filtered, report = filter_detectable(manifest_from_dataset(info.root, MICRO_SIZE))
        assert len(filtered.pairs) == 1
        assert report.dropped_ids == ["p000_0"]


class TestPrepare:
    """Prepared dataset directories."""

    def test_prepared_layout(self, prepared):
        manifest = prepared.manifest
        assert len(manifest.pairs) == 10
        assert manifest.resolution == MICRO_SIZE
        assert os.path.isfile(prepared.manifest_path) and os.path.isfile(prepared.report_path)
        assert len(os.listdir(manifest.cache_dir)) == 20
        assert load_manifest(prepared.manifest_path) == manifest

    def test_larger_images_are_cropped(self, tmp_path, micro_config):
        from dataset.prepare import prepare_dataset

        info = make_synthetic_dataset(str(tmp_path / "raw"), num_identities=2, height=256, width=128, seed=2)
        result = prepare_dataset(info.root, str(tmp_path / "prepared"), micro_config)
        assert len(result.manifest.pairs) == 2
        image = read_image(image_path(result.manifest.root, "p000_0"))
        assert image.shape == (64, 32, 3)
        landmarks = read_landmarks(result.manifest.root, "p000_0")
        assert landmarks.shape == MICRO_SIZE and landmarks.count() > 0

    def test_cache_root_relocates_cache(self, tmp_path, synthetic_root, micro_config):
        from dataset.prepare import prepare_dataset

        micro_config.cache_root = str(tmp_path / "caches")
        result = prepare_dataset(synthetic_root, str(tmp_path / "prepared"), micro_config)
        cache_dir = os.path.join(str(tmp_path / "caches"), "prepared", micro_config.data.cache_dirname)
        assert result.manifest.cache_dir == os.path.abspath(cache_dir)
        assert len(os.listdir(cache_dir)) == 20
        assert not os.path.exists(tmp_path / "prepared" / "cache")


class TestPairedDataset:
    """Training examples built from a prepared manifest."""

    def test_example_keys_and_shapes(self, prepared, micro_config):
        dataset = PairedDataset(prepared.manifest, micro_config)
        assert len(dataset) == 10
        example = dataset[0]
        h, w = MICRO_SIZE
        expected = {
            "src_image": (3, h, w), "tgt_image": (3, h, w),
            "src_heat": (18, h, w), "tgt_heat": (18, h, w),
            "src_in": (21, h, w), "tgt_in": (21, h, w),
            "part_masks": (NUM_PARTS, h, w), "affines": (NUM_PARTS, 2, 3), "tgt_mask": (h, w),
        }
        assert {k: tuple(v.shape) for k, v in example.items()} == expected
        assert example["affines"].dtype == torch.float64
        assert example["src_image"].min() >= -1 and example["src_image"].max() <= 1

    def test_target_input_hides_the_person(self, prepared, micro_config):
        example = PairedDataset(prepared.manifest, micro_config)[0]
        person = example["tgt_mask"].bool()
        assert (example["tgt_in"][:3, person] == 0).all()
        torch.testing.assert_close(example["tgt_in"][:3, ~person], example["tgt_image"][:, ~person])
        torch.testing.assert_close(example["tgt_in"][3:], example["tgt_heat"])

    def test_reverse_pairs_option(self, prepared, micro_config):
        micro_config.data.emit_reverse_pairs = True
        assert len(PairedDataset(prepared.manifest, micro_config)) == 20

    def test_cache_matches_fresh_computation(self, prepared, micro_config):
        pair = prepared.manifest.pairs[0]
        sample = load_pair(prepared.manifest.root, pair)
        cached = FeatureCache(prepared.manifest.cache_dir).load(pair.src_id)
        fresh = compute_image_features(sample.src_landmarks, sample.src_mask, micro_config)
        np.testing.assert_array_equal(cached.heatmaps, fresh.heatmaps)
        np.testing.assert_array_equal(cached.masks.refined, fresh.masks.refined)
        assert cached.d_s == fresh.d_s

    def test_cache_miss_writes_file(self, prepared, micro_config, tmp_path):
        cache = FeatureCache(str(tmp_path / "cache"))
        pair = prepared.manifest.pairs[0]
        sample = load_pair(prepared.manifest.root, pair)
        cache.get(pair.src_id, sample.src_landmarks, sample.src_mask, micro_config)
        assert os.path.isfile(cache.path(pair.src_id))

    def test_mismatched_resolution_rejected(self, prepared):
        pair = prepared.manifest.pairs[0]
        sample = load_pair(prepared.manifest.root, pair)
        with pytest.raises(InvalidArgumentError):
            type(sample)(sample.src_image, sample.tgt_image[:32], sample.src_landmarks, sample.tgt_landmarks,
                         sample.src_mask, sample.tgt_mask, sample.ids)


class TestEpochSampler:
    """Per-epoch index streams."""

    def test_same_epoch_same_indices(self):
        a, b = EpochSampler(10, 24, seed=3), EpochSampler(10, 24, seed=3)
        a.set_epoch(2)
        b.set_epoch(2)
        assert a.indices() == b.indices()
        assert len(a) == 24 and all(0 <= i < 10 for i in a)

    def test_epochs_differ(self):
        sampler = EpochSampler(10, 24, seed=3)
        sampler.set_epoch(1)
        first = sampler.indices()
        sampler.set_epoch(2)
        assert sampler.indices() != first

    def test_without_replacement_covers_dataset(self):
        sampler = EpochSampler(5, 10, seed=0, replacement=False)
        indices = sampler.indices()
        assert sorted(indices[:5]) == list(range(5)) and sorted(indices[5:]) == list(range(5))

    def test_empty_dataset(self):
        with pytest.raises(InvalidArgumentError):
            EpochSampler(0, 4, seed=0)
