"""
Metric reports: one JSON record per line.
"""
import json
import os
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

import numpy as np

from dataset.io import normalize_image, read_image, read_mask
from evaluation.backends import ClassifierBackend
from evaluation.metrics import frechet_distance, inception_score, mask_inception_score
from utils.exceptions import DataLoadError, InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass
class MetricRecord:
    metric: str
    value: float
    std: Optional[float]
    n: int
    backend: str
    config_hash: str


def write_report(path: str, records: List[MetricRecord]) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(asdict(record), sort_keys=True) + "\n")
    return path


def read_report(path: str) -> List[MetricRecord]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return [MetricRecord(**json.loads(line)) for line in f if line.strip()]
    except (OSError, ValueError, TypeError) as e:
        raise DataLoadError(path, "metric report", str(e))


def load_image_directory(directory: str) -> Tuple[List[str], np.ndarray]:
    """
    Read every image of a directory, sorted by file name.

    Returns:
        Tuple of (ids, (N, H, W, 3) images in [-1, 1])
    """
    if not os.path.isdir(directory):
        raise InvalidArgumentError(f"Image directory does not exist: {directory}")
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(IMAGE_SUFFIXES))
    if not names:
        raise InvalidArgumentError(f"No images found in {directory}")
    images = [normalize_image(read_image(os.path.join(directory, n))) for n in names]
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise InvalidArgumentError(f"Images in {directory} differ in size: {sorted(shapes)}")
    return [os.path.splitext(n)[0] for n in names], np.stack(images)


def load_masks_for(directory: str, ids: List[str], threshold: int = 128) -> np.ndarray:
    """Binary masks ``<directory>/<id>.png`` for the given ids."""
    masks = []
    for image_id in ids:
        masks.append((read_mask(os.path.join(directory, image_id + ".png")) >= threshold).astype(np.uint8))
    return np.stack(masks)


def evaluate_directories(dir_generated: str, dir_real: str, backend: ClassifierBackend,
                         splits: int = 10, mask_dir: Optional[str] = None,
                         config_hash: str = "") -> List[MetricRecord]:
    """
    IS of the generated images, mask-IS when a mask directory is given, and the
    Frechet distance between generated and real features.

    Splits are capped at the number of generated images.
    """
    ids, generated = load_image_directory(dir_generated)
    real_ids, real = load_image_directory(dir_real)
    splits = max(1, min(splits, len(ids)))
    records = []

    mean, std = inception_score(backend.predict(generated), splits, ids)
    records.append(MetricRecord("IS", mean, std, len(ids), backend.name, config_hash))
    logger.info(f"IS = {mean:.4f} +- {std:.4f} over {len(ids)} images")

    if mask_dir:
        masks = load_masks_for(mask_dir, ids)
        mean, std = mask_inception_score(generated, masks, backend, splits, ids)
        records.append(MetricRecord("mask-IS", mean, std, len(ids), backend.name, config_hash))
        logger.info(f"mask-IS = {mean:.4f} +- {std:.4f}")

    fid = frechet_distance(backend.features(generated), backend.features(real))
    records.append(MetricRecord("FID", fid, None, len(ids) + len(real_ids), backend.name, config_hash))
    logger.info(f"FID = {fid:.6f} ({len(ids)} generated, {len(real_ids)} real)")
    return records
