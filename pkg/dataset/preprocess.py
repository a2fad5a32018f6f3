"""
Person cropping and sample filtering.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import cv2
import numpy as np

from dataset.io import read_landmarks, read_mask, mask_path
from dataset.manifest import DatasetManifest
from pose.landmarks import LandmarkSet
from utils.exceptions import DataLoadError, InvalidArgumentError, SampleRejectedError
from utils.logger import get_logger

logger = get_logger(__name__)

BBox = Tuple[int, int, int, int]


@dataclass
class CroppedSample:
    """Output of crop_and_pad; mask and landmarks are None when not supplied."""
    image: np.ndarray
    mask: Optional[np.ndarray] = None
    landmarks: Optional[LandmarkSet] = None
    padding: Tuple[int, int, int, int] = (0, 0, 0, 0)
    scale: Tuple[float, float] = (1.0, 1.0)


def bbox_from_mask(mask: np.ndarray, threshold: int = 128) -> Optional[BBox]:
    """Tight (top, left, height, width) box around the person pixels, None for an empty mask."""
    rows, cols = np.nonzero(np.asarray(mask) >= threshold)
    if rows.size == 0:
        return None
    top, left = int(rows.min()), int(cols.min())
    return top, left, int(rows.max()) - top + 1, int(cols.max()) - left + 1


def _padding_for_ratio(height: int, width: int, target: Tuple[int, int]) -> Tuple[int, int, int, int]:
    """(top, bottom, left, right) zero padding giving the target aspect ratio; the odd pixel goes last."""
    target_h, target_w = target
    pad_h = pad_w = 0
    if height * target_w > width * target_h:
        pad_w = int(round(height * target_w / target_h)) - width
    elif height * target_w < width * target_h:
        pad_h = int(round(width * target_h / target_w)) - height
    pad_h, pad_w = max(pad_h, 0), max(pad_w, 0)
    return pad_h // 2, pad_h - pad_h // 2, pad_w // 2, pad_w - pad_w // 2


def crop_and_pad(image: np.ndarray, bbox: BBox, target: Tuple[int, int] = (128, 64),
                 mask: Optional[np.ndarray] = None,
                 landmarks: Optional[LandmarkSet] = None) -> CroppedSample:
    """
    Cut a person out by its bounding box, zero-pad to the target aspect ratio and resize.

    Padding is split evenly between both sides of the short axis. The image is
    resized bilinearly, the mask with nearest neighbour. Landmarks go through the
    same crop, pad and scale map, using the pixel-centre convention of the
    resize; points outside the box become MISSING.

    Args:
        image: (height, width, 3) uint8 image
        bbox: (top, left, height, width) box inside the image
        target: Output (height, width)
        mask: Optional (height, width) mask
        landmarks: Optional landmarks in image coordinates

    Returns:
        CroppedSample at the target resolution

    Raises:
        InvalidArgumentError: If the box leaves the image
        SampleRejectedError: If the box is not larger than the target
    """
    top, left, box_h, box_w = (int(v) for v in bbox)
    img_h, img_w = image.shape[:2]
    if top < 0 or left < 0 or box_h <= 0 or box_w <= 0 or top + box_h > img_h or left + box_w > img_w:
        raise InvalidArgumentError(f"Bounding box {bbox} is outside the {img_h}x{img_w} image")
    target_h, target_w = target
    if box_h <= target_h or box_w <= target_w:
        raise SampleRejectedError(
            f"Bounding box {box_h}x{box_w} is not larger than {target_h}x{target_w}")

    pad_top, pad_bottom, pad_left, pad_right = _padding_for_ratio(box_h, box_w, target)
    padded_h = box_h + pad_top + pad_bottom
    padded_w = box_w + pad_left + pad_right
    scale_r, scale_c = target_h / padded_h, target_w / padded_w

    def _crop_pad(array: np.ndarray) -> np.ndarray:
        crop = array[top:top + box_h, left:left + box_w]
        widths = [(pad_top, pad_bottom), (pad_left, pad_right)] + [(0, 0)] * (crop.ndim - 2)
        return np.pad(crop, widths, mode="constant", constant_values=0)

    result = CroppedSample(
        image=cv2.resize(_crop_pad(image), (target_w, target_h), interpolation=cv2.INTER_LINEAR),
        padding=(pad_top, pad_bottom, pad_left, pad_right),
        scale=(scale_r, scale_c),
    )
    if mask is not None:
        result.mask = cv2.resize(_crop_pad(mask), (target_w, target_h), interpolation=cv2.INTER_NEAREST)
    if landmarks is not None:
        points = landmarks.points.copy()
        outside = ((points[:, 0] < top) | (points[:, 0] >= top + box_h)
                   | (points[:, 1] < left) | (points[:, 1] >= left + box_w))
        points[outside] = np.nan
        offset = np.array([pad_top - top, pad_left - left], dtype=np.float64)
        scale = np.array([scale_r, scale_c])
        result.landmarks = LandmarkSet(points, img_h, img_w).mapped(
            lambda p: (p + offset + 0.5) * scale - 0.5, target_h, target_w)
    return result


@dataclass
class FilterReport:
    """Records removed by filter_detectable."""
    kept: int = 0
    dropped: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def dropped_ids(self) -> List[str]:
        return sorted({entry["image_id"] for entry in self.dropped})


def _detect_problem(root: str, image_id: str, threshold: int) -> Optional[str]:
    try:
        if read_landmarks(root, image_id).count() == 0:
            return "no landmarks detected"
        if not (read_mask(mask_path(root, image_id)) >= threshold).any():
            return "empty person mask"
    except DataLoadError as e:
        return str(e)
    return None


def filter_detectable(manifest: DatasetManifest, mask_threshold: int = 128) -> Tuple[DatasetManifest, FilterReport]:
    """
    Drop pairs referencing an image without a detectable person.

    An image is undetectable when all 18 landmarks are MISSING or its mask has no
    person pixel.

    Returns:
        Tuple of (filtered manifest, report listing the dropped image ids)
    """
    problems: Dict[str, Optional[str]] = {}
    report = FilterReport()
    kept = []
    for pair in manifest.pairs:
        reasons = []
        for image_id in (pair.src_id, pair.tgt_id):
            if image_id not in problems:
                problems[image_id] = _detect_problem(manifest.root, image_id, mask_threshold)
            if problems[image_id] is not None:
                reasons.append({"pair": pair.pair_id, "image_id": image_id, "reason": problems[image_id]})
        if reasons:
            report.dropped.extend(reasons)
        else:
            kept.append(pair)
    report.kept = len(kept)
    for image_id in report.dropped_ids:
        logger.warning(f"Dropping '{image_id}': {problems[image_id]}")
    logger.info(f"filter_detectable kept {report.kept} of {len(manifest.pairs)} pairs")
    filtered = DatasetManifest(manifest.root, manifest.split, manifest.resolution,
                               manifest.identity_disjoint, kept, manifest.cache_dir,
                               list(manifest.dropped) + report.dropped)
    return filtered, report
