"""Image degradation operators.

Images are float32 H x W x 3 arrays with values in [0, 1]. Every
operator clamps its output to [0, 1], preserves the input dimensions,
and is a pure function of (image, parameter value, seed). Each operator
belongs to exactly one degradation group and declares a documented
zero-strength parameter at which it is bypassed entirely (identity).

Severity ladders (the 5-level parameter tables) are configuration, not
code; see configs/default.toml. Operator behavior and parameter domains
live here.
"""

import io
from dataclasses import dataclass

import cv2
import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter, map_coordinates

from .errors import ConfigError, ValidationError
from .seeding import rng_for

GROUPS = (
    "blur",
    "noise",
    "compression",
    "brightness_change",
    "color_distortion",
    "spatial_distortion",
    "sharpness_contrast",
)

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate the H x W x 3 float raster contract."""
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError(f"expected HxWx3 array, got shape {getattr(img, 'shape', None)}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValidationError(f"image dimensions must be positive, got {img.shape}")
    return np.asarray(img, dtype=np.float32)


def clamp01(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0)


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(u8: np.ndarray) -> np.ndarray:
    return (u8.astype(np.float32) / 255.0).astype(np.float32)


def resize_image(img: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize to size x size (the single resize used everywhere)."""
    if img.shape[0] == size and img.shape[1] == size:
        return img.astype(np.float32, copy=True)
    out = cv2.resize(img.astype(np.float32), (size, size), interpolation=cv2.INTER_LINEAR)
    return clamp01(out)


# --- operator implementations -------------------------------------------------


def _gaussian_blur(img, sigma, rng):
    return gaussian_filter(img, sigma=(sigma, sigma, 0.0), mode="nearest")


def _motion_blur(img, length, rng):
    length = int(round(length))
    k = max(3, length | 1)
    angle = rng.uniform(0.0, 180.0)
    kernel = np.zeros((k, k), dtype=np.float32)
    cx = cy = k // 2
    dx, dy = np.cos(np.deg2rad(angle)), np.sin(np.deg2rad(angle))
    for t in np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, length):
        x = int(round(cx + t * dx))
        y = int(round(cy + t * dy))
        kernel[y, x] = 1.0
    kernel /= max(kernel.sum(), 1.0)
    return cv2.filter2D(img, -1, kernel, borderType=cv2.BORDER_REFLECT_101)


def _gaussian_noise(img, sigma, rng):
    return img + rng.normal(0.0, sigma, size=img.shape).astype(np.float32)


def _impulse_noise(img, prob, rng):
    out = img.copy()
    hits = rng.random(img.shape[:2]) < prob
    salt = rng.random(img.shape[:2]) < 0.5
    out[hits & salt] = 1.0
    out[hits & ~salt] = 0.0
    return out


def _jpeg_reencode(img, quality, rng):
    quality = int(round(quality))
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    return from_uint8(np.asarray(Image.open(buf).convert("RGB")))


def _pixelate(img, block, rng):
    block = int(round(block))
    h, w = img.shape[:2]
    small = (max(1, round(h / block)), max(1, round(w / block)))
    down = cv2.resize(img, (small[1], small[0]), interpolation=cv2.INTER_AREA)
    return cv2.resize(down, (w, h), interpolation=cv2.INTER_NEAREST)


def _brighten(img, shift, rng):
    return np.power(img, 1.0 / (1.0 + shift), dtype=np.float32)


def _darken(img, shift, rng):
    return np.power(img, 1.0 + shift, dtype=np.float32)


def _channel_shift(img, delta, rng):
    sign = 1.0 if rng.random() < 0.5 else -1.0
    out = img.copy()
    out[..., 0] += sign * delta
    out[..., 2] -= sign * delta
    return out


def _desaturate(img, strength, rng):
    gray = (img @ _LUMA)[..., None]
    return gray + (1.0 - strength) * (img - gray)


def _elastic_warp(img, amplitude, rng):
    h, w = img.shape[:2]
    field = rng.standard_normal((2, h, w))
    field = gaussian_filter(field, sigma=(0.0, 4.0, 4.0), mode="reflect")
    norm = np.sqrt((field**2).mean())
    field *= amplitude / max(norm, 1e-8)
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    coords = [yy + field[0], xx + field[1]]
    channels = [
        map_coordinates(img[..., c], coords, order=1, mode="reflect") for c in range(3)
    ]
    return np.stack(channels, axis=-1).astype(np.float32)


def _oversharpen(img, amount, rng):
    blurred = gaussian_filter(img, sigma=(1.0, 1.0, 0.0), mode="nearest")
    return img + amount * (img - blurred)


def _contrast_scale(img, strength, rng):
    return 0.5 + (1.0 + strength) * (img - 0.5)


@dataclass(frozen=True)
class OperatorDef:
    """A degradation primitive: behavior, group, and parameter domain."""

    op_id: str
    group: str
    domain: tuple  # inclusive (lo, hi) for the strength parameter
    zero_param: float  # documented zero-strength value (op bypassed there)
    integer_param: bool
    fn: callable


REGISTRY = {
    op.op_id: op
    for op in [
        OperatorDef("gaussian_blur", "blur", (0.0, 8.0), 0.0, False, _gaussian_blur),
        OperatorDef("motion_blur", "blur", (1, 32), 1, True, _motion_blur),
        OperatorDef("gaussian_noise", "noise", (0.0, 1.0), 0.0, False, _gaussian_noise),
        OperatorDef("impulse_noise", "noise", (0.0, 1.0), 0.0, False, _impulse_noise),
        OperatorDef("jpeg", "compression", (1, 100), 100, True, _jpeg_reencode),
        OperatorDef("pixelate", "compression", (1, 32), 1, True, _pixelate),
        OperatorDef("brighten", "brightness_change", (0.0, 4.0), 0.0, False, _brighten),
        OperatorDef("darken", "brightness_change", (0.0, 4.0), 0.0, False, _darken),
        OperatorDef("channel_shift", "color_distortion", (0.0, 0.5), 0.0, False, _channel_shift),
        OperatorDef("desaturate", "color_distortion", (0.0, 1.0), 0.0, False, _desaturate),
        OperatorDef("elastic_warp", "spatial_distortion", (0.0, 16.0), 0.0, False, _elastic_warp),
        OperatorDef("oversharpen", "sharpness_contrast", (0.0, 8.0), 0.0, False, _oversharpen),
        OperatorDef("contrast_scale", "sharpness_contrast", (0.0, 4.0), 0.0, False, _contrast_scale),
    ]
}


def get_operator(op_id: str) -> OperatorDef:
    if op_id not in REGISTRY:
        raise ConfigError(f"unknown operator id '{op_id}'")
    return REGISTRY[op_id]


def validate_param(op: OperatorDef, value) -> float:
    lo, hi = op.domain
    if not np.isfinite(value) or not (lo <= value <= hi):
        raise ValidationError(f"{op.op_id}: parameter {value} outside domain [{lo}, {hi}]")
    return float(value)


def apply_operator(img: np.ndarray, op_id: str, value, seed: int) -> np.ndarray:
    """Apply one operator at the given strength.

    Deterministic given (img, value, seed). The documented zero-strength
    value bypasses the operator and returns an exact copy; JPEG declares
    quality >= 100 as its lossless zero-strength setting.
    """
    img = check_image(img)
    op = get_operator(op_id)
    value = validate_param(op, value)
    if op.integer_param:
        value = int(round(value))
    if value == op.zero_param:
        return img.copy()
    rng = rng_for("op", op_id, seed)
    out = op.fn(img, value, rng)
    if out.shape != img.shape:
        raise ValidationError(f"{op_id}: output shape {out.shape} != input {img.shape}")
    return clamp01(out).astype(np.float32)
