"""Small convolutional feature extractor with multi-stage taps.

A desk-scale stand-in for a detector backbone: 5 stages of
(conv3x3, SiLU, 2x average pool), with feature taps after a configured
subset of stages. Also loads externally computed feature maps from the
named-array container for adapter-style use.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .arrayio import load_arrays
from .errors import FormatError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureTapConfig:
    """Ordered taps as (stage_index, channel_count, spatial_stride)."""

    taps: tuple

    def __post_init__(self):
        if len(self.taps) < 2:
            raise ValidationError(f"need at least 2 taps, got {len(self.taps)}")
        strides = [t[2] for t in self.taps]
        if any(b <= a for a, b in zip(strides, strides[1:])):
            raise ValidationError(f"tap strides must be strictly increasing, got {strides}")

    @property
    def channels(self):
        return tuple(t[1] for t in self.taps)

    @property
    def strides(self):
        return tuple(t[2] for t in self.taps)


@dataclass
class FeatureMapSet:
    """Per-tap activation maps, each channels x height x width."""

    maps: list

    def __post_init__(self):
        for m in self.maps:
            if m.ndim != 3:
                raise ValidationError(f"feature map must be CxHxW, got shape {tuple(m.shape)}")

    def __len__(self):
        return len(self.maps)


class TinyBackbone(nn.Module):
    """Five stages of conv3x3 + SiLU + 2x avg pool; taps after tap_stages."""

    def __init__(self, widths=(16, 32, 64, 96, 128), tap_stages=(1, 2, 3, 5), input_resolution=64):
        super().__init__()
        if any(s < 1 or s > len(widths) for s in tap_stages):
            raise ValidationError(f"tap stages {tap_stages} out of range for {len(widths)} stages")
        self.widths = tuple(widths)
        self.tap_stages = tuple(sorted(tap_stages))
        self.input_resolution = input_resolution
        stages = []
        in_ch = 3
        for out_ch in widths:
            stages.append(
                nn.Sequential(
                    nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1),
                    nn.SiLU(),
                    nn.AvgPool2d(2),
                )
            )
            in_ch = out_ch
        self.stages = nn.ModuleList(stages)

    @property
    def tap_config(self) -> FeatureTapConfig:
        return FeatureTapConfig(
            tuple((s, self.widths[s - 1], 2**s) for s in self.tap_stages)
        )

    def forward(self, x: torch.Tensor) -> list:
        """B x 3 x H x W -> list of tap tensors (B x C_l x H_l x W_l)."""
        taps = []
        out = x
        for index, stage in enumerate(self.stages, start=1):
            out = stage(out)
            if index in self.tap_stages:
                taps.append(out)
        return taps

    def set_frozen(self, frozen: bool) -> None:
        for p in self.parameters():
            p.requires_grad_(not frozen)


def extract_features(backbone: TinyBackbone, img: np.ndarray) -> FeatureMapSet:
    """Forward one image (HxWx3 in [0,1]) through the frozen graph."""
    res = backbone.input_resolution
    if img.shape[0] != res or img.shape[1] != res:
        raise ValidationError(f"expected {res}x{res} input, got {img.shape[:2]}")
    x = torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1))[None]).to(
        next(backbone.parameters()).dtype
    )
    with torch.no_grad():
        taps = backbone(x)
    return FeatureMapSet([t[0].numpy().copy() for t in taps])


def tap_array_name(index: int) -> str:
    return f"tap{index}"


def save_external_features(path, fm: FeatureMapSet) -> None:
    from .arrayio import save_arrays

    save_arrays(path, {tap_array_name(i): m.astype(np.float32) for i, m in enumerate(fm.maps)})


def load_external_features(path, tap_config: FeatureTapConfig) -> FeatureMapSet:
    """Load feature maps from a container, validating against the tap config.

    Arrays beyond the expected taps are ignored with a warning; a missing
    or mis-shaped tap is a format error naming the offending entry.
    """
    arrays = load_arrays(path)
    maps = []
    expected = {tap_array_name(i) for i in range(len(tap_config.taps))}
    for i, (_, channels, _) in enumerate(tap_config.taps):
        name = tap_array_name(i)
        if name not in arrays:
            raise FormatError(f"feature container missing array '{name}'")
        arr = arrays[name]
        if arr.ndim != 3 or arr.shape[0] != channels:
            raise FormatError(
                f"array '{name}' has shape {arr.shape}, expected ({channels}, h, w)"
            )
        maps.append(arr.astype(np.float32))
    extras = sorted(set(arrays) - expected)
    if extras:
        log.warning("ignoring extra arrays in feature container: %s", ", ".join(extras))
    return FeatureMapSet(maps)
