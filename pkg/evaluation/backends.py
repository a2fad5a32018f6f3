"""
Classifier backends producing class probabilities and feature vectors for metrics.

Images are (N, height, width, 3) float arrays in [-1, 1].
"""
import os
from abc import ABC, abstractmethod
from typing import Optional

import cv2
import numpy as np
from scipy.special import softmax

from config import MetricsConfig
from utils.exceptions import BackendUnavailableError, InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

# Optional imports
try:
    import torch
    import torch.nn.functional as F
    import torchvision
    TORCHVISION_AVAILABLE = True
except Exception:
    TORCHVISION_AVAILABLE = False


def _check_images(images: np.ndarray) -> np.ndarray:
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 4 or images.shape[-1] != 3:
        raise InvalidArgumentError(f"Expected images of shape (N, H, W, 3), got {images.shape}")
    return images


class ClassifierBackend(ABC):
    """Maps images to probability rows and to fixed-size feature rows."""

    name: str = "abstract"
    num_classes: int = 0
    feature_dim: int = 0
    # whether predict/features may be called from several threads at once
    reentrant: bool = True

    @abstractmethod
    def predict(self, images: np.ndarray) -> np.ndarray:
        """(N, num_classes) rows summing to 1."""

    @abstractmethod
    def features(self, images: np.ndarray) -> np.ndarray:
        """(N, feature_dim) rows."""


class SyntheticBackend(ClassifierBackend):
    """
    Deterministic stand-in classifier: images are area-downsampled to a small grid
    and projected by fixed random matrices.
    """

    name = "synthetic"

    def __init__(self, num_classes: int = 10, feature_dim: int = 16, grid: int = 8, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.num_classes = num_classes
        self.feature_dim = feature_dim
        self.grid = grid
        self._projection = rng.standard_normal((grid * grid * 3, feature_dim)) / np.sqrt(grid * grid * 3)
        self._classifier = rng.standard_normal((feature_dim, num_classes))

    def features(self, images: np.ndarray) -> np.ndarray:
        images = _check_images(images)
        small = np.stack([cv2.resize(img, (self.grid, self.grid), interpolation=cv2.INTER_AREA)
                          for img in images]).astype(np.float64)
        return small.reshape(len(images), -1) @ self._projection

    def predict(self, images: np.ndarray) -> np.ndarray:
        return softmax(self.features(images) @ self._classifier, axis=1)


class UniformBackend(ClassifierBackend):
    """Uniform predictions; per-channel mean and standard deviation as features."""

    name = "uniform"

    def __init__(self, num_classes: int = 10):
        self.num_classes = num_classes
        self.feature_dim = 6

    def features(self, images: np.ndarray) -> np.ndarray:
        images = _check_images(images).astype(np.float64)
        return np.concatenate([images.mean(axis=(1, 2)), images.std(axis=(1, 2))], axis=1)

    def predict(self, images: np.ndarray) -> np.ndarray:
        images = _check_images(images)
        return np.full((len(images), self.num_classes), 1.0 / self.num_classes)


class InceptionBackend(ClassifierBackend):
    """torchvision Inception-v3 with locally supplied weights; pool features are 2048-d."""

    name = "inception"
    num_classes = 1000
    feature_dim = 2048
    reentrant = False

    def __init__(self, weights_path: Optional[str], batch_size: int = 32, device: str = "cpu"):
        if not TORCHVISION_AVAILABLE:
            raise BackendUnavailableError(self.name, "torchvision is not installed")
        if not weights_path or not os.path.isfile(weights_path):
            raise BackendUnavailableError(self.name, f"weights file not found: {weights_path}")
        try:
            model = torchvision.models.inception_v3(weights=None, aux_logits=True, init_weights=False)
            model.load_state_dict(torch.load(weights_path, map_location=device))
        except Exception as e:
            raise BackendUnavailableError(self.name, f"cannot load weights: {e}")
        self.model = model.to(device).eval()
        self.device = device
        self.batch_size = batch_size
        self._pooled = None
        self.model.avgpool.register_forward_hook(self._keep_pool)

    def _keep_pool(self, _module, _inputs, output):
        self._pooled = output.flatten(1)

    def _run(self, images: np.ndarray):
        images = _check_images(images)
        logits, pooled = [], []
        with torch.no_grad():
            for start in range(0, len(images), self.batch_size):
                batch = torch.from_numpy(images[start:start + self.batch_size]).permute(0, 3, 1, 2).to(self.device)
                batch = F.interpolate(batch, size=(299, 299), mode="bilinear", align_corners=False)
                logits.append(self.model(batch).cpu().double().numpy())
                pooled.append(self._pooled.cpu().double().numpy())
        return np.concatenate(logits), np.concatenate(pooled)

    def predict(self, images: np.ndarray) -> np.ndarray:
        return softmax(self._run(images)[0], axis=1)

    def features(self, images: np.ndarray) -> np.ndarray:
        return self._run(images)[1]


def get_backend(name: str, config: Optional[MetricsConfig] = None, device: str = "cpu") -> ClassifierBackend:
    """
    Construct a backend by name.

    Raises:
        BackendUnavailableError: For unknown names or a backend that cannot be built
    """
    config = config or MetricsConfig()
    if name == "synthetic":
        return SyntheticBackend()
    if name == "uniform":
        return UniformBackend()
    if name == "inception":
        return InceptionBackend(config.inception_weights, config.batch_size, device)
    raise BackendUnavailableError(name, "unknown backend, expected synthetic, uniform or inception")
