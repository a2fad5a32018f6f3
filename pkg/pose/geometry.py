"""
Pose geometry: keypoint heat maps, the body-shape index and body-part region masks.

Pixel (r, c) has its center at integer coordinates (r, c). A pixel belongs to a
region iff its center lies inside the closed region polygon.
"""
from typing import List, Optional, Tuple

import numpy as np

from config import GeometryConfig
from pose.landmarks import NUM_LANDMARKS, LandmarkSet
from utils.exceptions import InvalidArgumentError, MissingTorsoError
from utils.logger import get_logger

logger = get_logger(__name__)

NUM_PARTS = 10
PART_NAMES: Tuple[str, ...] = (
    "torso", "head",
    "l_upper_arm", "l_lower_arm", "r_upper_arm", "r_lower_arm",
    "l_upper_leg", "l_lower_leg", "r_upper_leg", "r_lower_leg",
)
TORSO, HEAD = 0, 1
TORSO_LANDMARKS: Tuple[str, ...] = ("r_shoulder", "l_shoulder", "l_hip", "r_hip")
FACE_LANDMARKS: Tuple[str, ...] = ("nose", "r_eye", "l_eye", "r_ear", "l_ear")
LIMB_ENDPOINTS = {
    2: ("l_shoulder", "l_elbow"),
    3: ("l_elbow", "l_wrist"),
    4: ("r_shoulder", "r_elbow"),
    5: ("r_elbow", "r_wrist"),
    6: ("l_hip", "l_knee"),
    7: ("l_knee", "l_ankle"),
    8: ("r_hip", "r_knee"),
    9: ("r_knee", "r_ankle"),
}

_BOUNDARY_EPS = 1e-9


def heatmaps_from_landmarks(landmarks: LandmarkSet, sigma: float,
                            squared_distance: bool = False) -> np.ndarray:
    """
    Render one heat-map channel per landmark.

    Channel j at pixel p is exp(-||p - p_j|| / sigma^2). The distance is not
    squared unless ``squared_distance`` is set. MISSING landmarks give all-zero
    channels.

    Args:
        landmarks: Landmark set of one person
        sigma: Spread parameter, must be positive
        squared_distance: Use the squared Euclidean distance instead

    Returns:
        Array of shape (18, height, width) with values in [0, 1]

    Raises:
        InvalidArgumentError: If sigma is not positive
    """
    if not sigma > 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    height, width = landmarks.shape
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]
    heatmaps = np.zeros((NUM_LANDMARKS, height, width), dtype=np.float64)
    for j in np.flatnonzero(landmarks.present):
        r, c = landmarks.points[j]
        dist_sq = (rows - r) ** 2 + (cols - c) ** 2
        dist = dist_sq if squared_distance else np.sqrt(dist_sq)
        heatmaps[j] = np.exp(-dist / sigma ** 2)
    return heatmaps


def body_shape_index(landmarks: LandmarkSet) -> float:
    """
    Mean of the right and left shoulder-to-hip distances.

    Raises:
        MissingTorsoError: If any shoulder or hip landmark is MISSING
    """
    missing = [n for n in TORSO_LANDMARKS if not landmarks.has(n)]
    if missing:
        raise MissingTorsoError(f"Cannot compute body-shape index, missing: {', '.join(missing)}")
    p = {n: landmarks.point(n) for n in TORSO_LANDMARKS}
    right = np.linalg.norm(p["r_hip"] - p["r_shoulder"])
    left = np.linalg.norm(p["l_hip"] - p["l_shoulder"])
    return float((right + left) / 2.0)


def body_shape_index_or_fallback(landmarks: LandmarkSet, fallback_ratio: float) -> Tuple[float, bool]:
    """
    Body-shape index with a fallback for incomplete torsos.

    Returns:
        Tuple of (d_s, used_fallback); the fallback is ``fallback_ratio`` times the
        image height
    """
    try:
        d_s = body_shape_index(landmarks)
        if d_s > 0:
            return d_s, False
    except MissingTorsoError as e:
        logger.debug(f"{e}; using fallback body-shape index")
    return fallback_ratio * landmarks.image_height, True


def _limb_corners(a: np.ndarray, b: np.ndarray, width: float) -> Optional[np.ndarray]:
    direction = b - a
    length = np.linalg.norm(direction)
    if length == 0:
        return None
    normal = np.array([-direction[1], direction[0]]) / length * (width / 2.0)
    return np.stack([a + normal, b + normal, b - normal, a - normal])


def _offset_polygon(corners: np.ndarray, delta: float) -> np.ndarray:
    """Move every edge of a simple polygon outward along its normal by ``delta``."""
    n = len(corners)
    nxt = np.roll(corners, -1, axis=0)
    signed_area = 0.5 * np.sum(corners[:, 0] * nxt[:, 1] - nxt[:, 0] * corners[:, 1])
    if abs(signed_area) < 1e-12:
        center = corners.mean(axis=0)
        offsets = corners - center
        norms = np.linalg.norm(offsets, axis=1, keepdims=True)
        return corners + np.divide(offsets, norms, out=np.zeros_like(offsets), where=norms > 0) * delta
    directions = nxt - corners
    lengths = np.linalg.norm(directions, axis=1, keepdims=True)
    directions = np.divide(directions, lengths, out=np.zeros_like(directions), where=lengths > 0)
    # right-hand normal points outward for a positively oriented polygon
    normals = np.sign(signed_area) * np.stack([directions[:, 1], -directions[:, 0]], axis=1)
    anchors = corners + normals * delta

    result = np.empty_like(corners)
    for i in range(n):
        j = i - 1
        system = np.stack([directions[j], -directions[i]], axis=1)
        if abs(np.linalg.det(system)) < 1e-9:
            result[i] = corners[i] + normals[i] * delta
            continue
        t = np.linalg.solve(system, anchors[i] - anchors[j])[0]
        result[i] = anchors[j] + t * directions[j]
    return result


def region_polygons(landmarks: LandmarkSet, d_s: float,
                    config: Optional[GeometryConfig] = None) -> List[Optional[np.ndarray]]:
    """
    Corner polygons of the 10 body-part regions, in (row, col) pixel coordinates.

    Head: axis-aligned square of side head_scale*d_s at the face-landmark centroid.
    Limbs: rectangle spanning the two landmarks with width limb_width_scale*d_s.
    Torso: shoulder/hip quadrilateral with every edge moved outward along its
    normal by torso_dilation_scale*d_s.

    Args:
        landmarks: Landmark set
        d_s: Body-shape index, must be positive
        config: Geometry parameters

    Returns:
        List of 10 entries, a (4, 2) corner array or None for an absent region
    """
    if not d_s > 0:
        raise InvalidArgumentError(f"d_s must be positive, got {d_s}")
    config = config or GeometryConfig()
    polygons: List[Optional[np.ndarray]] = [None] * NUM_PARTS

    if all(landmarks.has(n) for n in TORSO_LANDMARKS):
        quad = np.stack([landmarks.point(n) for n in TORSO_LANDMARKS])
        polygons[TORSO] = _offset_polygon(quad, config.torso_dilation_scale * d_s)

    face = [landmarks.point(n) for n in FACE_LANDMARKS if landmarks.has(n)]
    if face:
        center = np.mean(face, axis=0)
        half = config.head_scale * d_s / 2.0
        polygons[HEAD] = center + np.array([[-half, -half], [-half, half], [half, half], [half, -half]])

    width = config.limb_width_scale * d_s
    for part, (start, end) in LIMB_ENDPOINTS.items():
        if landmarks.has(start, end):
            polygons[part] = _limb_corners(landmarks.point(start), landmarks.point(end), width)

    return polygons


def polygon_mask(corners: np.ndarray, height: int, width: int) -> np.ndarray:
    """
    Rasterize a closed polygon: a pixel is set iff its center is inside or on the boundary.

    Args:
        corners: (n, 2) polygon vertices in (row, col) order
        height: Frame height
        width: Frame width

    Returns:
        uint8 array of shape (height, width) with values {0, 1}
    """
    mask = np.zeros((height, width), dtype=np.uint8)
    r0 = max(int(np.floor(corners[:, 0].min())), 0)
    r1 = min(int(np.ceil(corners[:, 0].max())), height - 1)
    c0 = max(int(np.floor(corners[:, 1].min())), 0)
    c1 = min(int(np.ceil(corners[:, 1].max())), width - 1)
    if r0 > r1 or c0 > c1:
        return mask

    rr, cc = np.meshgrid(np.arange(r0, r1 + 1, dtype=np.float64),
                         np.arange(c0, c1 + 1, dtype=np.float64), indexing="ij")
    inside = np.zeros(rr.shape, dtype=bool)
    on_edge = np.zeros(rr.shape, dtype=bool)
    n = len(corners)
    for k in range(n):
        (ra, ca), (rb, cb) = corners[k], corners[(k + 1) % n]
        # even-odd crossing along +col
        straddles = (ra > rr) != (rb > rr)
        with np.errstate(divide="ignore", invalid="ignore"):
            c_cross = ca + (rr - ra) * (cb - ca) / (rb - ra)
        inside ^= straddles & (cc < c_cross)

        dr, dc = rb - ra, cb - ca
        seg_len_sq = dr * dr + dc * dc
        if seg_len_sq == 0:
            on_edge |= (rr == ra) & (cc == ca)
            continue
        t = np.clip(((rr - ra) * dr + (cc - ca) * dc) / seg_len_sq, 0.0, 1.0)
        dist_sq = (rr - (ra + t * dr)) ** 2 + (cc - (ca + t * dc)) ** 2
        on_edge |= dist_sq <= _BOUNDARY_EPS ** 2

    mask[r0:r1 + 1, c0:c1 + 1] = (inside | on_edge).astype(np.uint8)
    return mask


def build_region_masks(landmarks: LandmarkSet, d_s: float, height: int, width: int,
                       config: Optional[GeometryConfig] = None) -> np.ndarray:
    """
    Rasterize the 10 body-part region masks M_R(i).

    Args:
        landmarks: Landmark set
        d_s: Body-shape index, must be positive
        height: Frame height
        width: Frame width
        config: Geometry parameters

    Returns:
        uint8 array of shape (10, height, width); absent regions are all-zero

    Raises:
        InvalidArgumentError: If d_s is not positive
    """
    regions = np.zeros((NUM_PARTS, height, width), dtype=np.uint8)
    for i, corners in enumerate(region_polygons(landmarks, d_s, config)):
        if corners is not None:
            regions[i] = polygon_mask(corners, height, width)
    return regions

