"""
Image dumps of the body partition of one sample: region masks, refined masks,
a heat-map composite and the foreground/background split.
"""
import os
from typing import List

import matplotlib
import numpy as np

from config import AppConfig
from dataset.io import denormalize_image, write_image, write_mask
from dataset.paired import ImageFeatures
from pose.geometry import PART_NAMES
from pose.partition import split_background, split_foreground
from utils.logger import get_logger

logger = get_logger(__name__)


def heatmap_composite(image: np.ndarray, heatmaps: np.ndarray, colormap: str = "jet",
                      alpha: float = 0.5) -> np.ndarray:
    """
    Blend the per-pixel maximum over all heat maps, colored by a matplotlib
    colormap, onto an image.

    Args:
        image: (H, W, 3) image in [-1, 1]
        heatmaps: (18, H, W) heat maps in [0, 1]
        colormap: Colormap name
        alpha: Weight of the colored heat map

    Returns:
        uint8 RGB image
    """
    peak = heatmaps.max(axis=0) if len(heatmaps) else np.zeros(image.shape[:2])
    colored = matplotlib.colormaps[colormap](np.clip(peak, 0.0, 1.0))[..., :3] * 255.0
    base = denormalize_image(image).astype(np.float64)
    return np.clip(np.rint(alpha * colored + (1 - alpha) * base), 0, 255).astype(np.uint8)


def write_partition_debug(out_dir: str, image: np.ndarray, features: ImageFeatures,
                          config: AppConfig) -> List[str]:
    """
    Write the partition images of one sample.

    Files: ``region_<i>_<part>.png`` and ``refined_<i>_<part>.png`` for the 10
    parts, ``heatmaps.png``, ``foreground.png`` and ``background.png``. Absent
    parts are written all black.

    Args:
        out_dir: Output directory
        image: (H, W, 3) image in [-1, 1]
        features: Heat maps and masks of the image
        config: Configuration (masked value of the split)

    Returns:
        Written paths
    """
    os.makedirs(out_dir, exist_ok=True)
    masks = features.masks
    paths = []
    for i, part in enumerate(PART_NAMES):
        paths.append(write_mask(os.path.join(out_dir, f"region_{i:02d}_{part}.png"), masks.regions[i] * 255))
    for i, part in enumerate(PART_NAMES):
        paths.append(write_mask(os.path.join(out_dir, f"refined_{i:02d}_{part}.png"), masks.refined[i] * 255))
    paths.append(write_image(os.path.join(out_dir, "heatmaps.png"), heatmap_composite(image, features.heatmaps)))
    value = config.partition.masked_value
    paths.append(write_image(os.path.join(out_dir, "foreground.png"),
                             denormalize_image(split_foreground(image, masks.body, value))))
    paths.append(write_image(os.path.join(out_dir, "background.png"),
                             denormalize_image(split_background(image, masks.body, value))))
    logger.info(f"Wrote {len(paths)} partition images to {out_dir}")
    return paths
