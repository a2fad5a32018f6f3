"""
Adversarial and reconstruction losses.

Discriminator outputs are score maps in [0, 1]; every log is taken of a score
clamped to [eps, 1 - eps] and averaged over the map and the batch.
"""
from typing import Dict, Union

import torch

from utils.exceptions import InvalidArgumentError

DEFAULT_EPS = 1e-7

Number = Union[float, torch.Tensor]


def _log(scores: torch.Tensor, eps: float) -> torch.Tensor:
    return torch.log(scores.clamp(eps, 1.0 - eps))


def _log1m(scores: torch.Tensor, eps: float) -> torch.Tensor:
    return torch.log(1.0 - scores.clamp(eps, 1.0 - eps))


def adversarial_value(real_scores: torch.Tensor, fake_scores: torch.Tensor, eps: float = DEFAULT_EPS) -> torch.Tensor:
    """E[log D(real)] + E[log(1 - D(fake))]."""
    return _log(real_scores, eps).mean() + _log1m(fake_scores, eps).mean()


def cgan_loss(d1_real: torch.Tensor, d1_fake: torch.Tensor, eps: float = DEFAULT_EPS) -> torch.Tensor:
    """Conditional adversarial value of D1 on real and generated bundles."""
    return adversarial_value(d1_real, d1_fake, eps)


def gan_loss(d2_real: torch.Tensor, d2_fake: torch.Tensor, eps: float = DEFAULT_EPS) -> torch.Tensor:
    """Unconditional adversarial value of D2 on target and generated images."""
    return adversarial_value(d2_real, d2_fake, eps)


def l1_loss(generated: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference."""
    if generated.shape != target.shape:
        raise InvalidArgumentError(
            f"L1 loss needs equal shapes, got {tuple(generated.shape)} and {tuple(target.shape)}")
    return (generated - target).abs().mean()


def total_objective(cgan: Number, gan: Number, l1: Number,
                    lambda1: float = 1.0, lambda2: float = 0.01) -> Number:
    """L_cGAN + lambda1 * L_GAN + lambda2 * L1."""
    return cgan + lambda1 * gan + lambda2 * l1


def discriminator_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor,
                       eps: float = DEFAULT_EPS) -> torch.Tensor:
    """Minimized by a discriminator: the negated adversarial value."""
    return -adversarial_value(real_scores, fake_scores, eps)


def generator_adversarial_loss(fake_scores: torch.Tensor, eps: float = DEFAULT_EPS) -> torch.Tensor:
    """Non-saturating generator term -E[log D(fake)]."""
    return -_log(fake_scores, eps).mean()


def generator_objective(d1_fake: torch.Tensor, d2_fake: torch.Tensor, generated: torch.Tensor,
                        target: torch.Tensor, lambda1: float = 1.0, lambda2: float = 0.01,
                        eps: float = DEFAULT_EPS) -> Dict[str, torch.Tensor]:
    """
    Generator loss terms.

    Returns:
        Dict with 'cgan' and 'gan' (non-saturating adversarial terms), 'l1' and
        'total' = cgan + lambda1 * gan + lambda2 * l1
    """
    parts = {
        "cgan": generator_adversarial_loss(d1_fake, eps),
        "gan": generator_adversarial_loss(d2_fake, eps),
        "l1": l1_loss(generated, target),
    }
    parts["total"] = total_objective(parts["cgan"], parts["gan"], parts["l1"], lambda1, lambda2)
    return parts
