"""
Fully-convolutional discriminators: c4s2-64, d128, d256, d512, d1 with a sigmoid.

D1 judges (x_src, H(x_src), x, H(x_tgt)) bundles (42 channels); D2 judges single
images (3 channels).
"""
from dataclasses import dataclass

import torch
import torch.nn as nn

from models.blocks import conv_block, down_block, init_weights
from models.wnet import IMAGE_CHANNELS
from pose.landmarks import NUM_LANDMARKS
from utils.exceptions import InvalidArgumentError

D1_CHANNELS = 2 * (IMAGE_CHANNELS + NUM_LANDMARKS)
D2_CHANNELS = IMAGE_CHANNELS
NUM_DOWNSAMPLES = 5


@dataclass
class DiscriminatorSpec:
    in_channels: int = D1_CHANNELS
    base_channels: int = 64
    init_std: float = 0.02


class PatchDiscriminator(nn.Module):
    """Outputs a one-channel score map at 1/32 of the input resolution."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        b = spec.base_channels
        self.blocks = nn.Sequential(
            conv_block(spec.in_channels, b, kernel_size=4, stride=2),
            down_block(b, 2 * b),
            down_block(2 * b, 4 * b),
            down_block(4 * b, 8 * b),
            down_block(8 * b, 1, norm=False, activation="sigmoid"),
        )
        init_weights(self, spec.init_std)

    @property
    def final_conv(self) -> nn.Conv2d:
        return self.blocks[-1][0]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.spec.in_channels:
            raise InvalidArgumentError(
                f"Discriminator expects {self.spec.in_channels} input channels, got shape {tuple(x.shape)}")
        return self.blocks(x)


def conditional_bundle(src_image: torch.Tensor, src_heat: torch.Tensor,
                       image: torch.Tensor, tgt_heat: torch.Tensor) -> torch.Tensor:
    """Concatenate (x_src, H(x_src), x, H(x_tgt)) along channels for D1."""
    return torch.cat([src_image, src_heat, image, tgt_heat], dim=1)


def d1_forward(model: PatchDiscriminator, bundle: torch.Tensor) -> torch.Tensor:
    """Score a 42-channel conditional bundle."""
    if bundle.dim() != 4 or bundle.shape[1] != D1_CHANNELS:
        raise InvalidArgumentError(f"D1 expects {D1_CHANNELS} channels, got shape {tuple(bundle.shape)}")
    return model(bundle)


def d2_forward(model: PatchDiscriminator, image: torch.Tensor) -> torch.Tensor:
    """Score a 3-channel image."""
    if image.dim() != 4 or image.shape[1] != D2_CHANNELS:
        raise InvalidArgumentError(f"D2 expects {D2_CHANNELS} channels, got shape {tuple(image.shape)}")
    return model(image)
