"""
Two-encoder, one-decoder generator.

E1 encodes the source image with its heat maps, E2 the target background with the
target heat maps. Their bottlenecks are concatenated as decoder input. At the
``skip_depth`` highest resolutions the decoder receives E1 features warped per
body part together with the unmodified E2 features.
"""
from dataclasses import dataclass
from typing import List, Tuple

import torch
import torch.nn as nn

from config import ModelConfig
from models.blocks import conv_block, down_block, init_weights, up_block
from pose.landmarks import NUM_LANDMARKS
from pose.transform import warp_and_merge_features
from utils.exceptions import InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

IMAGE_CHANNELS = 3
ENCODER_IN_CHANNELS = IMAGE_CHANNELS + NUM_LANDMARKS
DROPOUT_BLOCKS = 3


@dataclass
class GeneratorSpec:
    """Block layout of the generator; ``base_channels`` scales the 64/128/256/512 plan."""
    depth: int = 6
    image_size: Tuple[int, int] = (128, 64)
    base_channels: int = 64
    skip_depth: int = 4
    dropout: float = 0.5
    init_std: float = 0.02

    def __post_init__(self):
        if self.depth not in (6, 7):
            raise InvalidArgumentError(f"Generator depth must be 6 or 7, got {self.depth}")
        if not 0 <= self.skip_depth <= self.depth - 1:
            raise InvalidArgumentError(f"skip_depth must be in [0, {self.depth - 1}], got {self.skip_depth}")
        factor = 2 ** (self.depth - 1)
        h, w = self.image_size
        if h % factor or w % factor:
            raise InvalidArgumentError(
                f"Image size {h}x{w} is not divisible by {factor} for a {self.depth}-block encoder")

    @classmethod
    def from_config(cls, config: ModelConfig) -> "GeneratorSpec":
        return cls(depth=config.depth, image_size=tuple(config.image_size),
                   base_channels=config.base_channels, skip_depth=config.skip_depth,
                   dropout=config.dropout, init_std=config.init_std)

    @property
    def encoder_channels(self) -> List[int]:
        b = self.base_channels
        return [b, 2 * b, 4 * b, 8 * b, 8 * b, 8 * b] + [8 * b] * (self.depth - 6)

    @property
    def decoder_channels(self) -> List[int]:
        """Output channels of the u-blocks (the final c3s1-3 is not listed)."""
        b = self.base_channels
        return [8 * b] * (self.depth - 6) + [8 * b, 8 * b, 8 * b, 4 * b, 2 * b]

    def feature_size(self, level: int) -> Tuple[int, int]:
        h, w = self.image_size
        return h // 2 ** level, w // 2 ** level


class Encoder(nn.Module):
    """c3s1-64 followed by d-blocks; the last block has no InstanceNorm."""

    def __init__(self, spec: GeneratorSpec, in_channels: int = ENCODER_IN_CHANNELS):
        super().__init__()
        channels = spec.encoder_channels
        blocks = [conv_block(in_channels, channels[0])]
        for k in range(1, len(channels)):
            last = k == len(channels) - 1
            blocks.append(down_block(channels[k - 1], channels[k], norm=not last))
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        features = []
        for block in self.blocks:
            x = block(x)
            features.append(x)
        return features


class Decoder(nn.Module):
    """u-blocks upsampling the joint bottleneck, then c3s1-3 with tanh."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        enc = spec.encoder_channels
        dec = spec.decoder_channels
        in_channels = 2 * enc[-1]
        blocks = []
        self.skip_levels: List[int] = []
        for j, out_channels in enumerate(dec):
            blocks.append(up_block(in_channels, out_channels,
                                   dropout=spec.dropout if j < DROPOUT_BLOCKS else 0.0))
            level = spec.depth - 2 - j
            in_channels = out_channels
            if level < spec.skip_depth:
                in_channels += 2 * enc[level]
            self.skip_levels.append(level)
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Sequential(nn.Conv2d(in_channels, IMAGE_CHANNELS, 3, stride=1, padding=1), nn.Tanh())

    def forward(self, bottleneck: torch.Tensor, skips: dict) -> torch.Tensor:
        x = bottleneck
        for block, level in zip(self.blocks, self.skip_levels):
            x = block(x)
            if level in skips:
                x = torch.cat([x] + list(skips[level]), dim=1)
        return self.head(x)


class WNetGenerator(nn.Module):
    """Generator with independent source (E1) and target (E2) encoders."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        self.e1 = Encoder(spec)
        self.e2 = Encoder(spec)
        self.decoder = Decoder(spec)
        init_weights(self, spec.init_std)

    def forward(self, src_in: torch.Tensor, tgt_in: torch.Tensor,
                part_masks: torch.Tensor, affines) -> torch.Tensor:
        """
        Args:
            src_in: (B, 21, H, W) source image with source heat maps
            tgt_in: (B, 21, H, W) target background with target heat maps
            part_masks: (B, 10, H, W) source part masks
            affines: (B, 10, 2, 3) source-to-target part affines

        Returns:
            (B, 3, H, W) generated image in [-1, 1]
        """
        for name, tensor in (("src_in", src_in), ("tgt_in", tgt_in)):
            if tensor.dim() != 4 or tensor.shape[1] != ENCODER_IN_CHANNELS:
                raise InvalidArgumentError(
                    f"{name} must have {ENCODER_IN_CHANNELS} channels, got shape {tuple(tensor.shape)}")
            if tuple(tensor.shape[2:]) != tuple(self.spec.image_size):
                raise InvalidArgumentError(
                    f"{name} spatial size {tuple(tensor.shape[2:])} does not match {self.spec.image_size}")
        full_h, full_w = self.spec.image_size
        f1 = self.e1(src_in)
        f2 = self.e2(tgt_in)
        skips = {}
        for level in range(self.spec.skip_depth):
            warped = warp_and_merge_features(f1[level], part_masks, affines, full_h, full_w)
            skips[level] = (warped, f2[level])
        bottleneck = torch.cat([f1[-1], f2[-1]], dim=1)
        return self.decoder(bottleneck, skips)


def generator_forward(model: WNetGenerator, src_in: torch.Tensor, tgt_in: torch.Tensor,
                      part_masks: torch.Tensor, affines, training: bool = False) -> torch.Tensor:
    """Run the generator with dropout enabled only when ``training`` is set."""
    model.train(training)
    return model(src_in, tgt_in, part_masks, affines)
