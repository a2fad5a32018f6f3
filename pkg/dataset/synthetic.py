"""
Stick-figure dataset generator with exact landmarks and masks.

Produces a dataset directory in the standard layout so every pipeline stage can
run without external data.
"""
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import cv2
import numpy as np

from dataset.io import DATASET_INFO_FILE, PAIRS_FILE, image_path, mask_path, write_image, write_landmarks, write_mask
from dataset.manifest import PairRecord, write_pairs_file
from pose.landmarks import LANDMARK_INDEX, LANDMARK_NAMES, LandmarkSet
from utils.exceptions import InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

# (row, col) as fractions of the frame
TEMPLATE_POSE: Dict[str, Tuple[float, float]] = {
    "nose": (0.12, 0.50), "neck": (0.22, 0.50),
    "r_shoulder": (0.24, 0.32), "r_elbow": (0.38, 0.26), "r_wrist": (0.52, 0.24),
    "l_shoulder": (0.24, 0.68), "l_elbow": (0.38, 0.74), "l_wrist": (0.52, 0.76),
    "r_hip": (0.52, 0.40), "r_knee": (0.70, 0.38), "r_ankle": (0.88, 0.37),
    "l_hip": (0.52, 0.60), "l_knee": (0.70, 0.62), "l_ankle": (0.88, 0.63),
    "r_eye": (0.10, 0.46), "l_eye": (0.10, 0.54), "r_ear": (0.11, 0.42), "l_ear": (0.11, 0.58),
}

LIMBS = (
    ("r_shoulder", "r_elbow"), ("r_elbow", "r_wrist"),
    ("l_shoulder", "l_elbow"), ("l_elbow", "l_wrist"),
    ("r_hip", "r_knee"), ("r_knee", "r_ankle"),
    ("l_hip", "l_knee"), ("l_knee", "l_ankle"),
)

DEFECTS = ("no_landmarks", "empty_mask", "missing_left_arm")


@dataclass
class SyntheticDataset:
    root: str
    image_ids: List[str] = field(default_factory=list)
    pairs: List[PairRecord] = field(default_factory=list)
    defective_ids: List[str] = field(default_factory=list)


def _pose_points(rng: np.random.Generator, height: int, width: int, pose: int, jitter: float) -> np.ndarray:
    points = np.array([TEMPLATE_POSE[name] for name in LANDMARK_NAMES], dtype=np.float64)
    if pose % 2 == 1:
        # raise both forearms
        for side in ("r", "l"):
            elbow = points[LANDMARK_INDEX[f"{side}_elbow"]]
            points[LANDMARK_INDEX[f"{side}_wrist"]] = elbow + np.array([-0.12, 0.0])
    points += rng.uniform(-jitter, jitter, size=points.shape)
    points[:, 0] = np.clip(points[:, 0] * height, 0, height - 1)
    points[:, 1] = np.clip(points[:, 1] * width, 0, width - 1)
    return points


def _xy(point: np.ndarray) -> Tuple[int, int]:
    return int(round(point[1])), int(round(point[0]))


def render_stick_figure(points: np.ndarray, height: int, width: int,
                        colors: Dict[str, Tuple[int, int, int]],
                        background: Tuple[Tuple[int, int, int], Tuple[int, int, int]]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw a person from 18 (row, col) landmarks.

    Returns:
        Tuple of (uint8 RGB image, uint8 mask with 255 on person pixels)
    """
    ramp = np.linspace(0.0, 1.0, height)[:, None, None]
    top, bottom = (np.array(c, dtype=np.float64) for c in background)
    image = np.ascontiguousarray(np.broadcast_to(top * (1 - ramp) + bottom * ramp, (height, width, 3)).astype(np.uint8))
    mask = np.zeros((height, width), dtype=np.uint8)
    p = {name: points[j] for j, name in enumerate(LANDMARK_NAMES)}
    thickness = max(2, int(round(0.08 * width)))

    torso = np.array([_xy(p[n]) for n in ("r_shoulder", "l_shoulder", "l_hip", "r_hip")], dtype=np.int32)
    for canvas, color in ((image, colors["shirt"]), (mask, 255)):
        cv2.fillConvexPoly(canvas, torso, color)
    for a, b in LIMBS:
        color = colors["pants"] if "hip" in a or "knee" in a else colors["skin"]
        for canvas, value in ((image, color), (mask, 255)):
            cv2.line(canvas, _xy(p[a]), _xy(p[b]), value, thickness)
    radius = max(2, int(round(0.07 * height)))
    for canvas, value in ((image, colors["skin"]), (mask, 255)):
        cv2.line(canvas, _xy(p["neck"]), _xy(p["nose"]), value, thickness)
        cv2.circle(canvas, _xy(p["nose"]), radius, value, -1)
    return image, mask


def make_synthetic_dataset(root: str, num_identities: int = 10, poses_per_identity: int = 2,
                           height: int = 128, width: int = 64, seed: int = 0,
                           defects: Optional[Dict[int, str]] = None, jitter: float = 0.02) -> SyntheticDataset:
    """
    Write a stick-figure dataset.

    Image ids are ``p<identity>_<pose>``; one pair (pose 0 -> pose 1) is written
    per identity.

    Args:
        root: Output dataset directory
        num_identities: Number of persons
        poses_per_identity: Images per person, at least 2
        height: Image height
        width: Image width
        seed: Random seed
        defects: Identity index -> one of 'no_landmarks', 'empty_mask',
            'missing_left_arm', applied to that identity's pose-1 image
        jitter: Landmark jitter as a fraction of the frame

    Returns:
        Description of what was written
    """
    if poses_per_identity < 2:
        raise InvalidArgumentError("poses_per_identity must be at least 2")
    defects = defects or {}
    unknown = set(defects.values()) - set(DEFECTS)
    if unknown:
        raise InvalidArgumentError(f"Unknown defect kinds: {sorted(unknown)}")

    rng = np.random.default_rng(seed)
    result = SyntheticDataset(root=os.path.abspath(root))
    for k in range(num_identities):
        colors = {name: tuple(int(v) for v in rng.integers(40, 256, size=3)) for name in ("shirt", "pants", "skin")}
        for pose in range(poses_per_identity):
            image_id = f"p{k:03d}_{pose}"
            background = tuple(tuple(int(v) for v in rng.integers(0, 120, size=3)) for _ in range(2))
            points = _pose_points(rng, height, width, pose, jitter)
            image, mask = render_stick_figure(points, height, width, colors, background)
            landmarks = LandmarkSet(points, height, width)

            defect = defects.get(k) if pose == 1 else None
            if defect == "no_landmarks":
                landmarks = LandmarkSet.empty(height, width)
            elif defect == "empty_mask":
                mask[:] = 0
            elif defect == "missing_left_arm":
                arm = points.copy()
                arm[[LANDMARK_INDEX["l_elbow"], LANDMARK_INDEX["l_wrist"]]] = np.nan
                landmarks = LandmarkSet(arm, height, width)
            if defect:
                result.defective_ids.append(image_id)

            write_image(image_path(root, image_id), image)
            write_mask(mask_path(root, image_id), mask)
            write_landmarks(root, image_id, landmarks)
            result.image_ids.append(image_id)
        result.pairs.append(PairRecord(f"p{k:03d}_0", f"p{k:03d}_1"))

    write_pairs_file(os.path.join(root, PAIRS_FILE), result.pairs)
    with open(os.path.join(root, DATASET_INFO_FILE), "w", encoding="utf-8") as f:
        json.dump({"split": "train", "resolution": [height, width], "identity_disjoint": True}, f, indent=2)
    logger.info(f"Wrote synthetic dataset with {len(result.image_ids)} images to {result.root}")
    return result
