"""
Tests for dataset layout validation.
"""
import os
import shutil

import pytest

from dataset.io import landmark_path
from utils.exceptions import DatasetLayoutError
from utils.file_handler import FileHandler


class TestFileHandler:
    """Test cases for FileHandler class."""

    def test_valid_layout(self, synthetic_root):
        """A generated dataset passes validation."""
        handler = FileHandler(synthetic_root)
        is_valid, problems = handler.validate_dataset_layout()
        assert is_valid
        assert problems == []
        assert handler.require_dataset_layout() == synthetic_root

    def test_no_path(self):
        """Test validation without a path."""
        is_valid, problems = FileHandler().validate_dataset_layout()
        assert not is_valid
        assert "No dataset path provided" in problems[0]

    def test_missing_directory(self, tmp_path):
        is_valid, problems = FileHandler().validate_dataset_layout(str(tmp_path / "absent"))
        assert not is_valid
        assert "does not exist" in problems[0]

    def test_missing_masks_and_pairs(self, synthetic_root):
        """Every missing piece is reported."""
        shutil.rmtree(os.path.join(synthetic_root, "masks"))
        os.remove(os.path.join(synthetic_root, "pairs.txt"))
        is_valid, problems = FileHandler().validate_dataset_layout(synthetic_root)
        assert not is_valid
        assert len(problems) == 2
        assert any("masks" in p for p in problems)
        assert any("pairs.txt" in p for p in problems)

    def test_missing_per_image_file(self, synthetic_root):
        os.remove(landmark_path(synthetic_root, "p003_1"))
        is_valid, problems = FileHandler().validate_dataset_layout(synthetic_root)
        assert not is_valid
        assert problems == [f"Missing landmarks for 'p003_1': {landmark_path(synthetic_root, 'p003_1')}"]

    def test_empty_pairs_file(self, synthetic_root):
        with open(os.path.join(synthetic_root, "pairs.txt"), "w") as f:
            f.write("# nothing here\n")
        is_valid, problems = FileHandler().validate_dataset_layout(synthetic_root)
        assert not is_valid
        assert "lists no pairs" in problems[0]

    def test_require_raises_with_itemized_problems(self, tmp_path):
        (tmp_path / "images").mkdir()
        with pytest.raises(DatasetLayoutError) as info:
            FileHandler().require_dataset_layout(str(tmp_path))
        assert len(info.value.problems) == 3
