"""
Convolution blocks shared by the generator and the discriminators.

    c3s1-k : 3x3 convolution, stride 1, ReLU
    c4s2-k : 4x4 convolution, stride 2, ReLU
    dk     : 4x4 convolution, stride 2, InstanceNorm, ReLU
    uk     : 4x4 fractional-strided convolution, stride 1/2, InstanceNorm, ReLU
"""
import torch.nn as nn


def conv_block(in_channels: int, out_channels: int, kernel_size: int = 3, stride: int = 1) -> nn.Sequential:
    """c3s1-k / c4s2-k: convolution followed by ReLU, no normalization."""
    padding = 1
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel_size, stride=stride, padding=padding, bias=True),
        nn.ReLU(inplace=True),
    )


def down_block(in_channels: int, out_channels: int, norm: bool = True,
               activation: str = "relu") -> nn.Sequential:
    """
    dk block. Without normalization the convolution keeps its bias.

    Args:
        in_channels: Input channels
        out_channels: Output channels (k)
        norm: Apply InstanceNorm
        activation: 'relu', 'sigmoid' or 'none'
    """
    layers = [nn.Conv2d(in_channels, out_channels, 4, stride=2, padding=1, bias=not norm)]
    if norm:
        layers.append(nn.InstanceNorm2d(out_channels))
    if activation == "relu":
        layers.append(nn.ReLU(inplace=True))
    elif activation == "sigmoid":
        layers.append(nn.Sigmoid())
    return nn.Sequential(*layers)


def up_block(in_channels: int, out_channels: int, dropout: float = 0.0) -> nn.Sequential:
    """uk block with optional dropout after the activation."""
    layers = [
        nn.ConvTranspose2d(in_channels, out_channels, 4, stride=2, padding=1, bias=False),
        nn.InstanceNorm2d(out_channels),
        nn.ReLU(inplace=True),
    ]
    if dropout > 0:
        layers.append(nn.Dropout(dropout))
    return nn.Sequential(*layers)


def init_weights(module: nn.Module, std: float = 0.02) -> None:
    """Zero-mean normal convolution weights, zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
