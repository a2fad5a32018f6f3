"""
Image and mask file IO plus pixel normalization.

Dataset layout::

    <root>/images/<id>.png      8-bit, 3-channel
    <root>/masks/<id>.png       8-bit, single channel, 0=background, 255=person
    <root>/landmarks/<id>.txt   one landmark record (see pose.landmarks)
    <root>/pairs.txt            "<src_id> <tgt_id>" per line
    <root>/dataset.json         optional {"split", "resolution", "identity_disjoint"}
"""
import os

import cv2
import numpy as np

from pose.landmarks import LandmarkSet, read_landmark_file, write_landmark_file
from utils.exceptions import DataLoadError

IMAGES_DIR = "images"
MASKS_DIR = "masks"
LANDMARKS_DIR = "landmarks"
PAIRS_FILE = "pairs.txt"
DATASET_INFO_FILE = "dataset.json"
IMAGE_EXT = ".png"
LANDMARK_EXT = ".txt"


def image_path(root: str, image_id: str) -> str:
    return os.path.join(root, IMAGES_DIR, image_id + IMAGE_EXT)


def mask_path(root: str, image_id: str) -> str:
    return os.path.join(root, MASKS_DIR, image_id + IMAGE_EXT)


def landmark_path(root: str, image_id: str) -> str:
    return os.path.join(root, LANDMARKS_DIR, image_id + LANDMARK_EXT)


def read_image(path: str) -> np.ndarray:
    """
    Read an 8-bit color image.

    Returns:
        uint8 RGB array of shape (height, width, 3)

    Raises:
        DataLoadError: If the file is missing or cannot be decoded
    """
    if not os.path.isfile(path):
        raise DataLoadError(path, "image", "file does not exist")
    bgr = cv2.imread(path, cv2.IMREAD_COLOR)
    if bgr is None:
        raise DataLoadError(path, "image", "cannot decode image")
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)


def write_image(path: str, rgb: np.ndarray) -> str:
    """Write a uint8 RGB image; parent directories are created."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if not cv2.imwrite(path, cv2.cvtColor(np.ascontiguousarray(rgb), cv2.COLOR_RGB2BGR)):
        raise DataLoadError(path, "image", "cannot write image")
    return path


def read_mask(path: str) -> np.ndarray:
    """
    Read an 8-bit single-channel mask.

    Raises:
        DataLoadError: If the file is missing or cannot be decoded
    """
    if not os.path.isfile(path):
        raise DataLoadError(path, "mask", "file does not exist")
    mask = cv2.imread(path, cv2.IMREAD_GRAYSCALE)
    if mask is None:
        raise DataLoadError(path, "mask", "cannot decode mask")
    return mask


def write_mask(path: str, mask: np.ndarray) -> str:
    """Write a uint8 single-channel mask."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if not cv2.imwrite(path, np.ascontiguousarray(mask, dtype=np.uint8)):
        raise DataLoadError(path, "mask", "cannot write mask")
    return path


def read_landmarks(root: str, image_id: str) -> LandmarkSet:
    """Read the landmark record of one image."""
    path = landmark_path(root, image_id)
    if not os.path.isfile(path):
        raise DataLoadError(path, "landmarks", "file does not exist")
    records = read_landmark_file(path)
    if image_id not in records:
        raise DataLoadError(path, "landmarks", f"no record for image id '{image_id}'")
    return records[image_id]


def write_landmarks(root: str, image_id: str, landmarks: LandmarkSet) -> str:
    path = landmark_path(root, image_id)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    return write_landmark_file(path, [(image_id, landmarks)])


def normalize_image(image: np.ndarray) -> np.ndarray:
    """Map 8-bit values to [-1, 1]: 2 * v / 255 - 1."""
    return (2.0 * np.asarray(image, dtype=np.float64) / 255.0 - 1.0).astype(np.float32)


def denormalize_image(image: np.ndarray) -> np.ndarray:
    """Map [-1, 1] values back to 8-bit, rounding to the nearest level."""
    scaled = (np.asarray(image, dtype=np.float64) + 1.0) * 255.0 / 2.0
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
