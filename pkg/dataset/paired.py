"""
Paired samples, per-image feature cache and the torch dataset feeding training.
"""
import os
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import torch
from torch.utils.data import Dataset, Sampler

from config import AppConfig
from dataset.io import image_path, mask_path, normalize_image, read_image, read_landmarks, read_mask
from dataset.manifest import DatasetManifest, PairRecord
from pose.geometry import body_shape_index_or_fallback, build_region_masks, heatmaps_from_landmarks
from pose.landmarks import LandmarkSet
from pose.partition import MaskSet, binarize_mask, skip_masks, split_background
from pose.transform import fit_part_affines
from utils.exceptions import DataLoadError, InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class PairedSample:
    """Source and target images of one person with their landmarks and binary masks."""
    src_image: np.ndarray
    tgt_image: np.ndarray
    src_landmarks: LandmarkSet
    tgt_landmarks: LandmarkSet
    src_mask: np.ndarray
    tgt_mask: np.ndarray
    ids: Tuple[str, str]

    def __post_init__(self):
        shape = self.src_image.shape[:2]
        for name, value in (("tgt_image", self.tgt_image.shape[:2]),
                            ("src_mask", self.src_mask.shape),
                            ("tgt_mask", self.tgt_mask.shape),
                            ("src_landmarks", self.src_landmarks.shape),
                            ("tgt_landmarks", self.tgt_landmarks.shape)):
            if tuple(value) != tuple(shape):
                raise InvalidArgumentError(
                    f"{name} resolution {tuple(value)} differs from source image {tuple(shape)} in pair {self.ids}")
        for name, landmarks in (("source", self.src_landmarks), ("target", self.tgt_landmarks)):
            if landmarks.count() == 0:
                raise InvalidArgumentError(f"The {name} of pair {self.ids} has no landmarks")


def load_image_record(root: str, image_id: str, mask_threshold: int = 128) -> Tuple[np.ndarray, LandmarkSet, np.ndarray]:
    """Load one normalized image, its landmarks and its binary mask."""
    path = image_path(root, image_id)
    image = normalize_image(read_image(path))
    landmarks = read_landmarks(root, image_id)
    mask = binarize_mask(read_mask(mask_path(root, image_id)), mask_threshold)
    if landmarks.shape != image.shape[:2]:
        raise DataLoadError(path, "landmarks",
                            f"landmark frame {landmarks.shape} differs from image {image.shape[:2]}")
    return image, landmarks, mask


def load_pair(root: str, record: PairRecord, mask_threshold: int = 128) -> PairedSample:
    """
    Load a pair from a dataset directory.

    Images are normalized to [-1, 1], masks binarized at ``mask_threshold``.

    Raises:
        DataLoadError: If a file is missing or malformed; the message names the path and field
    """
    src_image, src_landmarks, src_mask = load_image_record(root, record.src_id, mask_threshold)
    tgt_image, tgt_landmarks, tgt_mask = load_image_record(root, record.tgt_id, mask_threshold)
    return PairedSample(src_image, tgt_image, src_landmarks, tgt_landmarks, src_mask, tgt_mask,
                        (record.src_id, record.tgt_id))


@dataclass
class ImageFeatures:
    """Precomputed heat maps and masks of one image."""
    heatmaps: np.ndarray
    masks: MaskSet
    d_s: float
    used_fallback: bool


def compute_image_features(landmarks: LandmarkSet, body: np.ndarray, config: AppConfig) -> ImageFeatures:
    geometry = config.geometry
    height, width = body.shape
    d_s, used_fallback = body_shape_index_or_fallback(landmarks, geometry.fallback_body_shape_ratio)
    heatmaps = heatmaps_from_landmarks(landmarks, geometry.sigma, geometry.squared_distance).astype(np.float32)
    regions = build_region_masks(landmarks, d_s, height, width, geometry)
    return ImageFeatures(heatmaps, MaskSet.build(body, regions), d_s, used_fallback)


class FeatureCache:
    """``<cache_dir>/<image_id>.npz`` files of heat maps, masks and body-shape index."""

    def __init__(self, cache_dir: Optional[str]):
        self.cache_dir = cache_dir
        if cache_dir:
            os.makedirs(cache_dir, exist_ok=True)

    def path(self, image_id: str) -> str:
        return os.path.join(self.cache_dir, f"{image_id}.npz")

    def save(self, image_id: str, features: ImageFeatures) -> str:
        path = self.path(image_id)
        np.savez_compressed(
            path, heatmaps=features.heatmaps, body=features.masks.body,
            regions=features.masks.regions, refined=features.masks.refined,
            d_s=np.float64(features.d_s), used_fallback=np.bool_(features.used_fallback))
        return path

    def load(self, image_id: str) -> Optional[ImageFeatures]:
        if not self.cache_dir or not os.path.isfile(self.path(image_id)):
            return None
        try:
            with np.load(self.path(image_id)) as data:
                masks = MaskSet(body=data["body"], regions=data["regions"], refined=data["refined"])
                return ImageFeatures(data["heatmaps"], masks, float(data["d_s"]), bool(data["used_fallback"]))
        except (OSError, KeyError, ValueError) as e:
            raise DataLoadError(self.path(image_id), "cache", str(e))

    def get(self, image_id: str, landmarks: LandmarkSet, body: np.ndarray, config: AppConfig) -> ImageFeatures:
        features = self.load(image_id)
        if features is None:
            features = compute_image_features(landmarks, body, config)
            if features.used_fallback:
                logger.warning(f"Incomplete torso in '{image_id}', using fallback body-shape index {features.d_s:.2f}")
            if self.cache_dir:
                self.save(image_id, features)
        return features


def build_training_example(sample: PairedSample, src: ImageFeatures, tgt: ImageFeatures,
                           config: AppConfig) -> Dict[str, torch.Tensor]:
    """
    Network inputs of one pair, channels first.

    Keys: src_image, tgt_image, src_heat, tgt_heat, src_in (source image and heat
    maps), tgt_in (target background and heat maps), part_masks, affines, tgt_mask.
    """
    height, width = sample.src_mask.shape
    background = split_background(sample.tgt_image, sample.tgt_mask, config.partition.masked_value)
    affines = fit_part_affines(sample.src_landmarks, sample.tgt_landmarks, src.d_s,
                               config.geometry, frame=(height, width))

    def chw(image: np.ndarray) -> torch.Tensor:
        return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1), dtype=np.float32))

    src_heat = torch.from_numpy(np.ascontiguousarray(src.heatmaps, dtype=np.float32))
    tgt_heat = torch.from_numpy(np.ascontiguousarray(tgt.heatmaps, dtype=np.float32))
    src_image, tgt_image = chw(sample.src_image), chw(sample.tgt_image)
    return {
        "src_image": src_image,
        "tgt_image": tgt_image,
        "src_heat": src_heat,
        "tgt_heat": tgt_heat,
        "src_in": torch.cat([src_image, src_heat], dim=0),
        "tgt_in": torch.cat([chw(background), tgt_heat], dim=0),
        "part_masks": torch.from_numpy(skip_masks(src.masks, config.partition.skip_mask_mode).astype(np.float32)),
        "affines": torch.from_numpy(affines.transforms.astype(np.float64)),
        "tgt_mask": torch.from_numpy(sample.tgt_mask.astype(np.float32)),
    }


class PairedDataset(Dataset):
    """Training examples for every pair of a prepared manifest."""

    def __init__(self, manifest: DatasetManifest, config: AppConfig, cache_dir: Optional[str] = None):
        self.manifest = manifest.with_reverse_pairs() if config.data.emit_reverse_pairs else manifest
        self.config = config
        self.cache = FeatureCache(cache_dir if cache_dir is not None else manifest.cache_dir)

    def __len__(self) -> int:
        return len(self.manifest.pairs)

    def sample(self, index: int) -> PairedSample:
        return load_pair(self.manifest.root, self.manifest.pairs[index], self.config.partition.mask_threshold)

    def __getitem__(self, index: int) -> Dict[str, torch.Tensor]:
        sample = self.sample(index)
        src_id, tgt_id = sample.ids
        src = self.cache.get(src_id, sample.src_landmarks, sample.src_mask, self.config)
        tgt = self.cache.get(tgt_id, sample.tgt_landmarks, sample.tgt_mask, self.config)
        return build_training_example(sample, src, tgt, self.config)


class EpochSampler(Sampler):
    """
    Fixed-length index stream for one epoch, uniform with or without replacement.

    The generator is reseeded with ``seed + epoch`` so a resumed run draws the same
    batches as an uninterrupted one.
    """

    def __init__(self, dataset_size: int, num_samples: int, seed: int, replacement: bool = True):
        if dataset_size <= 0:
            raise InvalidArgumentError("Cannot sample from an empty dataset")
        self.dataset_size = dataset_size
        self.num_samples = num_samples
        self.seed = seed
        self.replacement = replacement
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def indices(self) -> List[int]:
        generator = torch.Generator().manual_seed(self.seed + self.epoch)
        if self.replacement:
            return torch.randint(self.dataset_size, (self.num_samples,), generator=generator).tolist()
        out: List[int] = []
        while len(out) < self.num_samples:
            out.extend(torch.randperm(self.dataset_size, generator=generator).tolist())
        return out[:self.num_samples]

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices())

    def __len__(self) -> int:
        return self.num_samples
