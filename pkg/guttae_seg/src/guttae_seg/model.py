"""Encoder-decoder segmentation models.

Two encoders are available: a ResNet50 backbone (the full-scale
configuration, optionally ImageNet-initialized) and a compact three-level
CNN that trains to convergence on a laptop CPU in seconds.  Both decode back
to input resolution and emit per-pixel probabilities via a sigmoid.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

ENCODERS = ("resnet50", "small-cnn")


@dataclass
class TrainConfig:
    encoder: str = "resnet50"
    pretrained: bool = False
    learning_rate: float = 1e-4
    loss: str = "mse"
    optimizer: str = "adam"
    epochs: int = 300
    batch_size: int = 16
    rng_seed: int = 0
    threshold: float = 0.5

    def validate(self) -> None:
        if self.encoder not in ENCODERS:
            raise ValueError(f"encoder must be one of {ENCODERS}, got {self.encoder!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.loss != "mse":
            raise ValueError(f"unsupported loss {self.loss!r} (only 'mse')")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r} (only 'adam')")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def _block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class SmallUNet(nn.Module):
    """Three-level U-Net, ~120k parameters; input dims must be divisible by 4."""

    def __init__(self) -> None:
        super().__init__()
        self.enc1 = _block(1, 16)
        self.enc2 = _block(16, 32)
        self.bottom = _block(32, 64)
        self.pool = nn.MaxPool2d(2)
        self.up2 = nn.ConvTranspose2d(64, 32, 2, stride=2)
        self.dec2 = _block(64, 32)
        self.up1 = nn.ConvTranspose2d(32, 16, 2, stride=2)
        self.dec1 = _block(32, 16)
        self.head = nn.Conv2d(16, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        b = self.bottom(self.pool(e2))
        d2 = self.dec2(torch.cat([self.up2(b), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        return torch.sigmoid(self.head(d1))


class _DecoderBlock(nn.Module):
    def __init__(self, cin: int, skip: int, cout: int) -> None:
        super().__init__()
        self.up = nn.ConvTranspose2d(cin, cout, 2, stride=2)
        self.conv = _block(cout + skip, cout)

    def forward(self, x: torch.Tensor, skip: torch.Tensor | None) -> torch.Tensor:
        x = self.up(x)
        if skip is not None:
            x = torch.cat([x, skip], dim=1)
        return self.conv(x)


class ResNet50UNet(nn.Module):
    """U-Net with a ResNet50 encoder; input dims must be divisible by 32."""

    def __init__(self, pretrained: bool = False) -> None:
        super().__init__()
        from torchvision.models import ResNet50_Weights, resnet50

        weights = ResNet50_Weights.IMAGENET1K_V2 if pretrained else None
        backbone = resnet50(weights=weights)
        self.stem = nn.Sequential(backbone.conv1, backbone.bn1, backbone.relu)  # /2, 64
        self.pool = backbone.maxpool  # /4
        self.layer1 = backbone.layer1  # /4, 256
        self.layer2 = backbone.layer2  # /8, 512
        self.layer3 = backbone.layer3  # /16, 1024
        self.layer4 = backbone.layer4  # /32, 2048
        self.dec4 = _DecoderBlock(2048, 1024, 512)
        self.dec3 = _DecoderBlock(512, 512, 256)
        self.dec2 = _DecoderBlock(256, 256, 128)
        self.dec1 = _DecoderBlock(128, 64, 64)
        self.dec0 = _DecoderBlock(64, 0, 32)
        self.head = nn.Conv2d(32, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x.repeat(1, 3, 1, 1)  # grayscale in, ImageNet-style 3-channel stem
        s0 = self.stem(x)
        s1 = self.layer1(self.pool(s0))
        s2 = self.layer2(s1)
        s3 = self.layer3(s2)
        s4 = self.layer4(s3)
        d = self.dec4(s4, s3)
        d = self.dec3(d, s2)
        d = self.dec2(d, s1)
        d = self.dec1(d, s0)
        d = self.dec0(d, None)
        return torch.sigmoid(self.head(d))


def build_model(config: TrainConfig) -> nn.Module:
    config.validate()
    if config.encoder == "small-cnn":
        return SmallUNet()
    return ResNet50UNet(pretrained=config.pretrained)
