"""
Dataset preparation: layout validation, filtering, cropping and feature caching.
"""
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from config import AppConfig, save_config
from dataset.io import (image_path, mask_path, read_image, read_landmarks, read_mask, write_image,
                        write_landmarks, write_mask)
from dataset.manifest import DatasetManifest, manifest_from_dataset, save_manifest
from dataset.paired import FeatureCache, compute_image_features
from dataset.preprocess import FilterReport, bbox_from_mask, crop_and_pad, filter_detectable
from pose.partition import binarize_mask
from utils.exceptions import SampleRejectedError
from utils.file_handler import FileHandler
from utils.logger import get_logger

logger = get_logger(__name__)

REPORT_FILE = "prepare_report.json"


@dataclass
class PrepareResult:
    manifest: DatasetManifest
    manifest_path: str
    report_path: str
    dropped: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def dropped_ids(self) -> List[str]:
        return sorted({entry["image_id"] for entry in self.dropped})


def _standardize(root: str, image_id: str, target: Tuple[int, int], threshold: int):
    """Image, mask and landmarks at the target resolution, cropping around the person if needed."""
    image = read_image(image_path(root, image_id))
    mask = read_mask(mask_path(root, image_id))
    landmarks = read_landmarks(root, image_id)
    if image.shape[:2] == tuple(target):
        return image, mask, landmarks
    bbox = bbox_from_mask(mask, threshold)
    if bbox is None:
        raise SampleRejectedError(f"'{image_id}' has an empty person mask")
    cropped = crop_and_pad(image, bbox, target, mask=mask, landmarks=landmarks)
    if cropped.landmarks.count() == 0:
        raise SampleRejectedError(f"'{image_id}' has no landmarks inside its person box")
    return cropped.image, cropped.mask, cropped.landmarks


def resolve_cache_dir(out_root: str, config: AppConfig) -> str:
    """Feature cache directory of a prepared dataset; ``cache_root`` moves it out of ``out_root``."""
    if config.cache_root:
        name = os.path.basename(os.path.normpath(os.path.abspath(out_root)))
        return os.path.join(config.cache_root, name, config.data.cache_dirname)
    return os.path.join(out_root, config.data.cache_dirname)


def prepare_dataset(dataset_root: str, out_root: str, config: AppConfig,
                    file_handler: Optional[FileHandler] = None) -> PrepareResult:
    """
    Turn a raw dataset directory into a prepared one.

    Validates the layout, drops pairs without a detectable person, brings every
    image to ``config.data.crop_target`` (cropping and padding larger images
    around the person mask), caches heat maps and masks per image and writes
    the manifest, a drop report and the resolved configuration into ``out_root``.

    Raises:
        DatasetLayoutError: If the raw layout is malformed
    """
    handler = file_handler or FileHandler()
    handler.require_dataset_layout(dataset_root)
    target = tuple(config.data.crop_target)
    threshold = config.partition.mask_threshold
    logger.info(f"Preparing {os.path.abspath(dataset_root)} -> {os.path.abspath(out_root)} at {target[0]}x{target[1]}")

    manifest = manifest_from_dataset(dataset_root, target)
    filtered, report = filter_detectable(manifest, threshold)

    cache_dir = resolve_cache_dir(out_root, config)
    cache = FeatureCache(cache_dir)
    rejected: Dict[str, str] = {}
    for image_id in filtered.image_ids:
        try:
            image, mask, landmarks = _standardize(dataset_root, image_id, target, threshold)
        except SampleRejectedError as e:
            logger.warning(f"Rejecting '{image_id}': {e}")
            rejected[image_id] = str(e)
            continue
        write_image(image_path(out_root, image_id), image)
        write_mask(mask_path(out_root, image_id), mask)
        write_landmarks(out_root, image_id, landmarks)
        features = compute_image_features(landmarks, binarize_mask(mask, threshold), config)
        if features.used_fallback:
            logger.warning(f"Incomplete torso in '{image_id}', using fallback body-shape index {features.d_s:.2f}")
        cache.save(image_id, features)

    pairs = []
    dropped = list(report.dropped)
    for pair in filtered.pairs:
        bad = [i for i in (pair.src_id, pair.tgt_id) if i in rejected]
        if bad:
            dropped.extend({"pair": pair.pair_id, "image_id": i, "reason": rejected[i]} for i in bad)
        else:
            pairs.append(pair)

    prepared = DatasetManifest(
        root=os.path.abspath(out_root),
        split=manifest.split,
        resolution=target,
        identity_disjoint=manifest.identity_disjoint,
        pairs=pairs,
        cache_dir=os.path.abspath(cache_dir),
        dropped=dropped,
    )
    manifest_path = save_manifest(prepared, out_root)
    final_report = FilterReport(kept=len(pairs), dropped=dropped)
    report_path = os.path.join(out_root, REPORT_FILE)
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump({"total": len(manifest.pairs), "kept": final_report.kept,
                   "dropped_ids": final_report.dropped_ids, "dropped": dropped}, f, indent=2)
    save_config(config, out_root)
    logger.info(f"Prepared {len(pairs)} of {len(manifest.pairs)} pairs; manifest at {manifest_path}")
    return PrepareResult(prepared, manifest_path, report_path, dropped)
