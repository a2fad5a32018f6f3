"""
Landmark sets and the line-oriented landmark record format.

A record is one line::

    <image_id> <height> <width> <row,col|null> x 18

Lines starting with ``#`` are comments.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.exceptions import DataLoadError, InvalidArgumentError

LANDMARK_NAMES: Tuple[str, ...] = (
    "nose", "neck",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_hip", "r_knee", "r_ankle",
    "l_hip", "l_knee", "l_ankle",
    "r_eye", "l_eye", "r_ear", "l_ear",
)
NUM_LANDMARKS = len(LANDMARK_NAMES)
LANDMARK_INDEX: Dict[str, int] = {name: i for i, name in enumerate(LANDMARK_NAMES)}

_MISSING_TOKEN = "null"


@dataclass(frozen=True)
class LandmarkSet:
    """18 optional (row, col) keypoints of one person; MISSING entries are NaN."""
    points: np.ndarray
    image_height: int
    image_width: int

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.shape != (NUM_LANDMARKS, 2):
            raise InvalidArgumentError(f"Expected {NUM_LANDMARKS}x2 landmark array, got {points.shape}")
        if self.image_height <= 0 or self.image_width <= 0:
            raise InvalidArgumentError(
                f"Image size must be positive, got {self.image_height}x{self.image_width}")
        partial = np.isnan(points).any(axis=1) & ~np.isnan(points).all(axis=1)
        if partial.any():
            raise InvalidArgumentError("A landmark must have both coordinates or neither")
        present = ~np.isnan(points[:, 0])
        rows, cols = points[present, 0], points[present, 1]
        if ((rows < 0) | (rows >= self.image_height) | (cols < 0) | (cols >= self.image_width)).any():
            raise InvalidArgumentError(
                f"Landmark outside the {self.image_height}x{self.image_width} frame")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def from_points(cls, points: Sequence[Optional[Tuple[float, float]]],
                    image_height: int, image_width: int) -> "LandmarkSet":
        """Build a set from a sequence of (row, col) tuples or None."""
        if len(points) != NUM_LANDMARKS:
            raise InvalidArgumentError(f"Expected {NUM_LANDMARKS} landmarks, got {len(points)}")
        array = np.full((NUM_LANDMARKS, 2), np.nan)
        for j, point in enumerate(points):
            if point is not None:
                array[j] = point
        return cls(array, image_height, image_width)

    @classmethod
    def empty(cls, image_height: int, image_width: int) -> "LandmarkSet":
        return cls(np.full((NUM_LANDMARKS, 2), np.nan), image_height, image_width)

    @property
    def present(self) -> np.ndarray:
        """Boolean mask of present landmarks."""
        return ~np.isnan(self.points[:, 0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.image_height, self.image_width

    def has(self, *names: str) -> bool:
        return all(self.present[LANDMARK_INDEX[n]] for n in names)

    def point(self, name: str) -> Optional[np.ndarray]:
        j = LANDMARK_INDEX[name]
        return None if not self.present[j] else self.points[j].copy()

    def count(self) -> int:
        return int(self.present.sum())

    def translated(self, dr: float, dc: float, drop_outside: bool = True) -> "LandmarkSet":
        """Shift all points; points leaving the frame become MISSING."""
        return self.mapped(lambda p: p + np.array([dr, dc]), self.image_height, self.image_width,
                           drop_outside=drop_outside)

    def mapped(self, fn, image_height: int, image_width: int, drop_outside: bool = True) -> "LandmarkSet":
        """
        Apply a coordinate map to every present point.

        Args:
            fn: Callable mapping an (n, 2) array of points to new points
            image_height: Height of the destination frame
            image_width: Width of the destination frame
            drop_outside: Mark points outside the destination frame MISSING

        Returns:
            New landmark set in the destination frame
        """
        points = np.full((NUM_LANDMARKS, 2), np.nan)
        present = self.present
        if present.any():
            points[present] = fn(self.points[present])
        if drop_outside:
            outside = ((points[:, 0] < 0) | (points[:, 0] >= image_height)
                       | (points[:, 1] < 0) | (points[:, 1] >= image_width))
            points[outside] = np.nan
        return LandmarkSet(points, image_height, image_width)


def format_landmark_record(image_id: str, landmarks: LandmarkSet) -> str:
    """Serialize one landmark set to a record line."""
    if any(ch.isspace() for ch in image_id):
        raise InvalidArgumentError(f"Image id must not contain whitespace: '{image_id}'")
    entries = []
    for row, col in landmarks.points:
        entries.append(_MISSING_TOKEN if np.isnan(row) else f"{float(row)!r},{float(col)!r}")
    return " ".join([image_id, str(landmarks.image_height), str(landmarks.image_width)] + entries)


def parse_landmark_record(line: str, source: str = "<string>") -> Tuple[str, LandmarkSet]:
    """
    Parse one record line.

    Args:
        line: Record text
        source: Path used in error messages

    Returns:
        Tuple of (image_id, landmarks)

    Raises:
        DataLoadError: If the record is malformed
    """
    tokens = line.split()
    if len(tokens) != 3 + NUM_LANDMARKS:
        raise DataLoadError(source, "landmarks",
                            f"expected {3 + NUM_LANDMARKS} fields, found {len(tokens)}")
    image_id = tokens[0]
    try:
        height, width = int(tokens[1]), int(tokens[2])
        points: List[Optional[Tuple[float, float]]] = []
        for token in tokens[3:]:
            if token.lower() == _MISSING_TOKEN:
                points.append(None)
            else:
                row, col = token.split(",")
                points.append((float(row), float(col)))
        return image_id, LandmarkSet.from_points(points, height, width)
    except (ValueError, InvalidArgumentError) as e:
        raise DataLoadError(source, "landmarks", f"malformed record for '{image_id}': {e}")


def read_landmark_file(path: str) -> Dict[str, LandmarkSet]:
    """Read every record in a landmark file, keyed by image id."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise DataLoadError(path, "landmarks", str(e))
    records: Dict[str, LandmarkSet] = {}
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        image_id, landmarks = parse_landmark_record(line, source=path)
        records[image_id] = landmarks
    return records


def write_landmark_file(path: str, records: Iterable[Tuple[str, LandmarkSet]]) -> str:
    """Write landmark records, one per line."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("# image_id height width " + " ".join(LANDMARK_NAMES) + "\n")
        for image_id, landmarks in records:
            f.write(format_landmark_record(image_id, landmarks) + "\n")
    return path
