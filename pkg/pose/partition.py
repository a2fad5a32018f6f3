"""
Foreground/background splitting and refined per-part masks.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pose.geometry import NUM_PARTS, TORSO
from utils.exceptions import InvalidArgumentError


@dataclass
class MaskSet:
    """Body mask M_F, region masks M_R(i) and refined masks M_F(i) of one image."""
    body: np.ndarray
    regions: np.ndarray
    refined: np.ndarray

    @classmethod
    def build(cls, body: np.ndarray, regions: np.ndarray) -> "MaskSet":
        return cls(body=body, regions=regions, refined=refine_part_masks(body, regions))


def binarize_mask(mask: np.ndarray, threshold: int = 128) -> np.ndarray:
    """Person pixels are values >= threshold on a 0-255 scale."""
    return (np.asarray(mask) >= threshold).astype(np.uint8)


def _check_image_and_mask(image: np.ndarray, body: np.ndarray) -> np.ndarray:
    if image.ndim != 3 or body.ndim != 2 or image.shape[:2] != body.shape:
        raise InvalidArgumentError(
            f"Image {image.shape} and mask {body.shape} do not share a spatial shape")
    return body.astype(image.dtype)[:, :, None]


def split_background(image: np.ndarray, body: np.ndarray, masked_value: float = 0.0) -> np.ndarray:
    """
    Keep the background: B(x) = x * (1 - M), person pixels set to ``masked_value``.

    Args:
        image: (height, width, 3) image in [-1, 1]
        body: (height, width) binary person mask
        masked_value: Value written into masked-out pixels

    Returns:
        Background image of the same shape
    """
    keep = 1 - _check_image_and_mask(image, body)
    return image * keep + masked_value * (1 - keep)


def split_foreground(image: np.ndarray, body: np.ndarray, masked_value: float = 0.0) -> np.ndarray:
    """
    Keep the person: F(x) = M * x, background pixels set to ``masked_value``.

    Args:
        image: (height, width, 3) image in [-1, 1]
        body: (height, width) binary person mask
        masked_value: Value written into masked-out pixels

    Returns:
        Foreground image of the same shape
    """
    keep = _check_image_and_mask(image, body)
    return image * keep + masked_value * (1 - keep)


def refine_part_masks(body: np.ndarray, regions: np.ndarray) -> np.ndarray:
    """
    Refined masks M_F(i) = M_F * M_R(i) for the non-torso parts; the torso is
    what remains of the body after removing all other refined parts.

    Args:
        body: (height, width) binary person mask
        regions: (10, height, width) binary region masks

    Returns:
        uint8 array of shape (10, height, width)

    Raises:
        InvalidArgumentError: If shapes do not match
    """
    if regions.shape != (NUM_PARTS,) + tuple(body.shape):
        raise InvalidArgumentError(
            f"Regions {regions.shape} do not match body mask {body.shape} with {NUM_PARTS} parts")
    body = (body > 0).astype(np.uint8)
    refined = (regions > 0).astype(np.uint8) * body[None]
    others = np.zeros_like(body)
    for i in range(NUM_PARTS):
        if i != TORSO:
            others |= refined[i]
    refined[TORSO] = body & (1 - others)
    return refined


def skip_masks(mask_set: MaskSet, mode: Optional[str] = "refined") -> np.ndarray:
    """Masks applied to the generator's skip connections ('refined' or 'region')."""
    if mode == "region":
        return (mask_set.regions > 0).astype(np.uint8)
    if mode == "refined":
        return mask_set.refined
    raise InvalidArgumentError(f"Unknown skip mask mode '{mode}'")
