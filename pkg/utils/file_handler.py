"""
File handling utilities for dataset directories.
"""
import os
from typing import List, Optional, Tuple

from dataset.io import IMAGES_DIR, LANDMARKS_DIR, MASKS_DIR, PAIRS_FILE, image_path, landmark_path, mask_path
from dataset.manifest import read_pairs_file
from utils.exceptions import DatasetLayoutError
from utils.logger import get_logger

logger = get_logger(__name__)


class FileHandler:
    """Validates dataset layouts and suggests output locations."""

    def __init__(self, root: Optional[str] = None):
        """
        Initialize file handler.

        Args:
            root: Dataset directory (optional)
        """
        self.root = root

    def validate_dataset_layout(self, root: Optional[str] = None) -> Tuple[bool, List[str]]:
        """
        Check that a dataset directory has images/, masks/, landmarks/ and pairs.txt,
        and that every image id named in pairs.txt has all three files.

        Args:
            root: Dataset directory (defaults to the handler's root)

        Returns:
            Tuple of (is_valid, problems)
        """
        root = root or self.root
        if not root:
            return False, ["No dataset path provided"]
        if not os.path.isdir(root):
            return False, [f"Dataset directory does not exist: {root}"]

        problems = []
        for name in (IMAGES_DIR, MASKS_DIR, LANDMARKS_DIR):
            path = os.path.join(root, name)
            if not os.path.isdir(path):
                problems.append(f"Missing directory: {path}")
        pairs_path = os.path.join(root, PAIRS_FILE)
        if not os.path.isfile(pairs_path):
            problems.append(f"Missing pairs file: {pairs_path}")
        if problems:
            return False, problems

        checked = set()
        for pair in read_pairs_file(pairs_path):
            for image_id in (pair.src_id, pair.tgt_id):
                if image_id in checked:
                    continue
                checked.add(image_id)
                for field, path in (("image", image_path(root, image_id)),
                                    ("mask", mask_path(root, image_id)),
                                    ("landmarks", landmark_path(root, image_id))):
                    if not os.path.isfile(path):
                        problems.append(f"Missing {field} for '{image_id}': {path}")
        if not checked:
            problems.append(f"Pairs file lists no pairs: {pairs_path}")
        return not problems, problems

    def require_dataset_layout(self, root: Optional[str] = None) -> str:
        """
        Validate a dataset directory.

        Raises:
            DatasetLayoutError: With one entry per problem found
        """
        root = root or self.root
        is_valid, problems = self.validate_dataset_layout(root)
        if not is_valid:
            for problem in problems:
                logger.error(problem)
            raise DatasetLayoutError(problems)
        logger.info(f"Dataset layout OK: {root}")
        return root

