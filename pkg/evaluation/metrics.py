"""
Inception score, masked inception score and Frechet distance.
"""
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh
from scipy.special import rel_entr

from evaluation.backends import ClassifierBackend
from pose.partition import split_foreground
from utils.exceptions import InvalidArgumentError, MetricError
from utils.logger import get_logger

logger = get_logger(__name__)

ROW_SUM_TOLERANCE = 1e-6
NEGATIVE_EIGEN_TOLERANCE = 1e-8


def validate_probabilities(probs: np.ndarray) -> np.ndarray:
    """Check an (N, C) array of probability rows."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise InvalidArgumentError(f"Expected an (N, C) probability array, got shape {probs.shape}")
    if not np.isfinite(probs).all() or (probs < 0).any():
        raise InvalidArgumentError("Probabilities must be finite and non-negative")
    worst = np.abs(probs.sum(axis=1) - 1.0).max()
    if worst > ROW_SUM_TOLERANCE:
        raise InvalidArgumentError(f"Probability rows must sum to 1, worst deviation {worst:.3g}")
    return probs


def inception_score(probs: np.ndarray, splits: int = 10,
                    ids: Optional[Sequence[str]] = None) -> Tuple[float, float]:
    """
    exp(E_x KL(p(y|x) || p(y))) per split; mean and standard deviation over splits.

    Args:
        probs: (N, C) class probabilities
        splits: Number of contiguous splits
        ids: Optional sample ids; rows are ordered by id before splitting so the
            result does not depend on input order

    Returns:
        Tuple of (mean, std)

    Raises:
        InvalidArgumentError: If rows are not probabilities or N < splits
    """
    probs = validate_probabilities(probs)
    if splits < 1 or len(probs) < splits:
        raise InvalidArgumentError(f"Need at least {splits} samples for {splits} splits, got {len(probs)}")
    if ids is not None:
        if len(ids) != len(probs):
            raise InvalidArgumentError(f"Got {len(ids)} ids for {len(probs)} rows")
        probs = probs[np.argsort(np.asarray(ids), kind="stable")]
    scores = []
    for part in np.array_split(probs, splits):
        marginal = part.mean(axis=0, keepdims=True)
        kl = rel_entr(part, marginal).sum(axis=1)
        scores.append(np.exp(kl.mean()))
    return float(np.mean(scores)), float(np.std(scores))


def mask_inception_score(images: np.ndarray, masks: np.ndarray, backend: ClassifierBackend,
                         splits: int = 10, ids: Optional[Sequence[str]] = None) -> Tuple[float, float]:
    """
    Inception score of the backend's predictions on foreground-only images.

    Args:
        images: (N, H, W, 3) images in [-1, 1]
        masks: (N, H, W) binary person masks
        backend: Classifier backend
        splits: Number of splits
        ids: Optional sample ids

    Returns:
        Tuple of (mean, std)
    """
    images = np.asarray(images, dtype=np.float32)
    masks = np.asarray(masks)
    if masks.shape != images.shape[:3]:
        raise InvalidArgumentError(f"Masks {masks.shape} do not align with images {images.shape}")
    masked = np.stack([split_foreground(img, (m > 0).astype(np.uint8)) for img, m in zip(images, masks)])
    return inception_score(backend.predict(masked), splits, ids)


def _check_features(name: str, feats: np.ndarray) -> np.ndarray:
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim == 1:
        feats = feats[:, None]
    if feats.ndim != 2 or feats.shape[0] < 2 or feats.shape[1] < 1:
        raise InvalidArgumentError(f"{name} needs at least 2 rows of features, got shape {feats.shape}")
    if not np.isfinite(feats).all():
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return feats


def _symmetric_sqrt(matrix: np.ndarray, name: str) -> np.ndarray:
    values, vectors = eigh((matrix + matrix.T) / 2.0)
    if values.min() < -NEGATIVE_EIGEN_TOLERANCE:
        raise MetricError(f"{name} has a negative eigenvalue {values.min():.3g}")
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def frechet_distance_from_stats(mu_a: np.ndarray, sigma_a: np.ndarray,
                                mu_b: np.ndarray, sigma_b: np.ndarray) -> float:
    """
    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The trace of the square root is taken from the eigenvalues of the symmetric
    matrix S_a^(1/2) S_b S_a^(1/2).

    Raises:
        MetricError: If an eigenvalue is below -1e-8
    """
    mu_a, mu_b = np.atleast_1d(mu_a).astype(np.float64), np.atleast_1d(mu_b).astype(np.float64)
    sigma_a, sigma_b = np.atleast_2d(sigma_a).astype(np.float64), np.atleast_2d(sigma_b).astype(np.float64)
    if mu_a.shape != mu_b.shape or sigma_a.shape != sigma_b.shape or sigma_a.shape != (len(mu_a), len(mu_a)):
        raise InvalidArgumentError("Mean and covariance shapes do not match")
    root_a = _symmetric_sqrt(sigma_a, "Covariance")
    product = root_a @ sigma_b @ root_a
    values = eigh((product + product.T) / 2.0, eigvals_only=True)
    if values.min() < -NEGATIVE_EIGEN_TOLERANCE:
        raise MetricError(f"Covariance product has a negative eigenvalue {values.min():.3g}")
    trace_sqrt = np.sqrt(np.clip(values, 0.0, None)).sum()
    diff = mu_a - mu_b
    distance = diff @ diff + np.trace(sigma_a) + np.trace(sigma_b) - 2.0 * trace_sqrt
    return float(max(distance, 0.0))


def feature_statistics(feats: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and unbiased covariance of feature rows."""
    feats = _check_features("features", feats)
    return feats.mean(axis=0), np.atleast_2d(np.cov(feats, rowvar=False))


def frechet_distance(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    """
    Frechet distance between Gaussians fitted to two feature sets.

    Raises:
        InvalidArgumentError: If a set has fewer than 2 rows or non-finite values
        MetricError: On a numerically negative covariance product
    """
    feats_a = _check_features("feats_a", feats_a)
    feats_b = _check_features("feats_b", feats_b)
    if feats_a.shape[1] != feats_b.shape[1]:
        raise InvalidArgumentError(f"Feature dimensions differ: {feats_a.shape[1]} vs {feats_b.shape[1]}")
    mu_a, sigma_a = feature_statistics(feats_a)
    mu_b, sigma_b = feature_statistics(feats_b)
    return frechet_distance_from_stats(mu_a, sigma_a, mu_b, sigma_b)
