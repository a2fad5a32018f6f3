"""
Per-part affine transforms between source and target poses, and their application
to encoder feature maps.

Affines are 2x3 matrices acting on (row, col, 1) at full image resolution and map
source coordinates to target coordinates.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from config import GeometryConfig
from pose.geometry import NUM_PARTS, PART_NAMES, polygon_mask, region_polygons
from pose.landmarks import LandmarkSet
from utils.exceptions import InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

IDENTITY = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
_SINGULAR_EPS = 1e-9


@dataclass
class PartAffineSet:
    """One affine per body part plus a validity flag; invalid parts hold the identity."""
    transforms: np.ndarray = field(default_factory=lambda: np.repeat(IDENTITY[None], NUM_PARTS, axis=0))
    valid: np.ndarray = field(default_factory=lambda: np.zeros(NUM_PARTS, dtype=bool))

    @classmethod
    def identity(cls) -> "PartAffineSet":
        return cls()

    def __len__(self) -> int:
        return NUM_PARTS


def estimate_affine_transform(src: np.ndarray, dst: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    Least-squares affine from point correspondences.

    Args:
        src: (n, 2) source points
        dst: (n, 2) target points

    Returns:
        Tuple of (2x3 affine, rank of the design matrix)
    """
    n = len(src)
    A = np.zeros((2 * n, 6))
    A[0::2, 0:2] = src
    A[0::2, 2] = 1
    A[1::2, 3:5] = src
    A[1::2, 5] = 1
    b = np.asarray(dst, dtype=np.float64).reshape(-1)
    T, _residual, rank, _s = np.linalg.lstsq(A, b, rcond=None)
    return T.reshape(2, 3), int(rank)


def apply_affine(affine: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Map (n, 2) points through a 2x3 affine."""
    points = np.asarray(points, dtype=np.float64)
    return points @ affine[:, :2].T + affine[:, 2]


def corner_residual(affine: np.ndarray, src: np.ndarray, dst: np.ndarray) -> float:
    """Sum of squared distances between mapped source corners and target corners."""
    return float(((apply_affine(affine, src) - dst) ** 2).sum())


def _region_present(corners: Optional[np.ndarray], frame: Optional[Tuple[int, int]]) -> bool:
    if corners is None:
        return False
    if frame is None:
        return True
    return bool(polygon_mask(corners, frame[0], frame[1]).any())


def fit_part_affines(src: LandmarkSet, tgt: LandmarkSet, d_s_src: float,
                     config: Optional[GeometryConfig] = None,
                     frame: Optional[Tuple[int, int]] = None) -> PartAffineSet:
    """
    Fit one affine per body part from source to target region corners.

    Both source and target regions are built with the source body-shape index so
    the source person keeps its shape in the target pose.

    Args:
        src: Source landmarks
        tgt: Target landmarks
        d_s_src: Source body-shape index, must be positive
        config: Geometry parameters
        frame: Optional (height, width); regions rasterizing to nothing count as absent

    Returns:
        PartAffineSet; parts with absent regions or degenerate fits keep the identity
    """
    if not d_s_src > 0:
        raise InvalidArgumentError(f"d_s_src must be positive, got {d_s_src}")
    src_polys = region_polygons(src, d_s_src, config)
    tgt_polys = region_polygons(tgt, d_s_src, config)
    result = PartAffineSet()
    for i in range(NUM_PARTS):
        if not (_region_present(src_polys[i], frame) and _region_present(tgt_polys[i], frame)):
            continue
        affine, rank = estimate_affine_transform(src_polys[i], tgt_polys[i])
        if rank < 6 or abs(np.linalg.det(affine[:, :2])) < _SINGULAR_EPS:
            logger.warning(f"Degenerate affine fit for part '{PART_NAMES[i]}', using identity")
            continue
        result.transforms[i] = affine
        result.valid[i] = True
    return result


def rescale_affine(affine: np.ndarray, scale_rows: float, scale_cols: float) -> np.ndarray:
    """Conjugate a full-resolution affine into coordinates downscaled by the given factors."""
    S = np.diag([scale_rows, scale_cols, 1.0])
    S_inv = np.diag([1.0 / scale_rows, 1.0 / scale_cols, 1.0])
    full = np.vstack([affine, [0.0, 0.0, 1.0]])
    return (S_inv @ full @ S)[:2]


def gather_indices(affine: np.ndarray, height: int, width: int) -> np.ndarray:
    """
    Nearest-neighbour inverse map of an affine on a (height, width) grid.

    Args:
        affine: 2x3 forward affine in grid coordinates
        height: Grid height
        width: Grid width

    Returns:
        int64 array (height * width,) of flat source indices, -1 where the
        source cell falls outside the grid
    """
    inv = np.linalg.inv(np.vstack([affine, [0.0, 0.0, 1.0]]))
    rr, cc = np.meshgrid(np.arange(height, dtype=np.float64),
                         np.arange(width, dtype=np.float64), indexing="ij")
    src_r = np.floor(inv[0, 0] * rr + inv[0, 1] * cc + inv[0, 2] + 0.5)
    src_c = np.floor(inv[1, 0] * rr + inv[1, 1] * cc + inv[1, 2] + 0.5)
    inside = (src_r >= 0) & (src_r < height) & (src_c >= 0) & (src_c < width)
    flat = np.where(inside, src_r * width + src_c, -1)
    return flat.astype(np.int64).reshape(-1)


def _as_affine_array(affines: Union[PartAffineSet, Sequence[PartAffineSet], np.ndarray, torch.Tensor],
                     batch: int) -> np.ndarray:
    if isinstance(affines, PartAffineSet):
        array = affines.transforms[None]
    elif isinstance(affines, torch.Tensor):
        array = affines.detach().cpu().double().numpy()
    elif isinstance(affines, np.ndarray):
        array = affines.astype(np.float64)
    else:
        array = np.stack([a.transforms for a in affines])
    if array.ndim == 3:
        array = array[None]
    if array.shape != (batch, NUM_PARTS, 2, 3):
        raise InvalidArgumentError(f"Expected affines of shape ({batch}, {NUM_PARTS}, 2, 3), got {array.shape}")
    return array


def warp_and_merge_features(features: torch.Tensor, part_masks: torch.Tensor, affines,
                            full_h: int, full_w: int) -> torch.Tensor:
    """
    Mask encoder features per body part, warp each part by its affine and sum.

    Masks are max-pooled down to the feature resolution; each affine is rescaled to
    feature coordinates and applied by nearest-neighbour inverse mapping, with
    out-of-frame reads giving zero.

    Args:
        features: (B, C, h, w) feature maps
        part_masks: (B, 10, full_h, full_w) binary part masks
        affines: (B, 10, 2, 3) full-resolution affines, a PartAffineSet, or a
            sequence of them
        full_h: Full image height
        full_w: Full image width

    Returns:
        (B, C, h, w) sum of the 10 warped part features

    Raises:
        InvalidArgumentError: If the feature grid is not an integer downscale
    """
    batch, channels, h, w = features.shape
    if full_h % h or full_w % w:
        raise InvalidArgumentError(f"Feature size {h}x{w} does not divide image size {full_h}x{full_w}")
    if tuple(part_masks.shape) != (batch, NUM_PARTS, full_h, full_w):
        raise InvalidArgumentError(
            f"Expected part masks of shape {(batch, NUM_PARTS, full_h, full_w)}, got {tuple(part_masks.shape)}")
    scale_r, scale_c = full_h // h, full_w // w
    affine_array = _as_affine_array(affines, batch)

    masks = part_masks.to(features.dtype)
    if scale_r > 1 or scale_c > 1:
        masks = F.max_pool2d(masks, kernel_size=(scale_r, scale_c), stride=(scale_r, scale_c))

    index_rows: List[np.ndarray] = []
    for b in range(batch):
        for i in range(NUM_PARTS):
            index_rows.append(gather_indices(rescale_affine(affine_array[b, i], scale_r, scale_c), h, w))
    index = torch.from_numpy(np.stack(index_rows)).to(features.device).view(batch, NUM_PARTS, 1, h * w)
    valid = (index >= 0).to(features.dtype)

    # (B, 10, C, h*w)
    masked = (masks[:, :, None] * features[:, None]).reshape(batch, NUM_PARTS, channels, h * w)
    gathered = torch.gather(masked, 3, index.clamp(min=0).expand(-1, -1, channels, -1)) * valid
    # fixed part order
    merged = gathered[:, 0]
    for i in range(1, NUM_PARTS):
        merged = merged + gathered[:, i]
    return merged.reshape(batch, channels, h, w)
