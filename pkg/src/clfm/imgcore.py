"""Image containers, sRGB/linear conversion, luminance, and PNG I/O.

Everything downstream (Retinex interpolation, edge analysis, the flow
matching stack) moves pixels through the two types defined here.  Pixel
data is float32 in [0, 1]; conversions run internally in float64 and are
rounded back to float32 on the way out.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

# Clamp floor for logs and divisions.  Small enough that 8-bit-quantized
# values are perturbed by less than half an 8-bit step after reconstruction.
EPSILON = 1e-4

MIN_IMAGE_SIDE = 8


class ColorSpace(enum.Enum):
    SRGB = "srgb"
    LINEAR = "linear"
    MAP = "map"  # single-channel physical quantity (Y, L, E, W, ...)


class MapRole(enum.Enum):
    LUMINANCE = "luminance"
    ILLUMINATION = "illumination"
    REFLECTANCE = "reflectance"
    EDGE = "edge"
    HIGHPASS = "highpass"
    WEIGHT = "weight"
    DISTANCE = "distance"


class SpaceError(ValueError):
    """Operation received an image tagged with the wrong color space."""


@dataclass(frozen=True)
class ImageBuffer:
    """H x W x C float32 image in [0, 1], tagged with its color space.

    MAP-space buffers may hold derived quantities and are exempt from the
    [0, 1] range check (they document their own range).
    """

    data: np.ndarray
    space: ColorSpace

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        object.__setattr__(self, "data", arr)
        if arr.ndim == 2:
            object.__setattr__(self, "data", arr[:, :, None])
            arr = self.data
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected HxWx1 or HxWx3 data, got shape {arr.shape}")
        if arr.shape[0] < MIN_IMAGE_SIDE or arr.shape[1] < MIN_IMAGE_SIDE:
            raise ValueError(
                f"image must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}, "
                f"got {arr.shape[0]}x{arr.shape[1]}"
            )
        if not np.isfinite(arr).all():
            raise ValueError("image contains non-finite values")
        if self.space is not ColorSpace.MAP:
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ValueError("image values outside [0, 1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ScalarMap:
    """Single-channel float32 map with a semantic role tag."""

    data: np.ndarray
    role: MapRole

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"expected HxW data, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("map contains non-finite values")
        if self.role is MapRole.ILLUMINATION:
            if arr.min() < EPSILON - 1e-9 or arr.max() > 1.0 + 1e-9:
                raise ValueError("illumination values must lie in [epsilon, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def _srgb_to_linear_values(v: np.ndarray) -> np.ndarray:
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb_values(v: np.ndarray) -> np.ndarray:
    return np.where(v <= 0.0031308, v * 12.92, 1.055 * v ** (1.0 / 2.4) - 0.055)


def srgb_to_linear(img: ImageBuffer) -> ImageBuffer:
    """Apply the IEC 61966-2-1 inverse transfer curve per channel."""
    if img.space is not ColorSpace.SRGB:
        raise SpaceError(f"srgb_to_linear expects an SRGB image, got {img.space}")
    out = _srgb_to_linear_values(img.data.astype(np.float64))
    return ImageBuffer(np.clip(out, 0.0, 1.0).astype(np.float32), ColorSpace.LINEAR)


def linear_to_srgb(img: ImageBuffer) -> ImageBuffer:
    """Exact inverse of :func:`srgb_to_linear` (round trip within 1e-6)."""
    if img.space is not ColorSpace.LINEAR:
        raise SpaceError(f"linear_to_srgb expects a LINEAR image, got {img.space}")
    out = _linear_to_srgb_values(img.data.astype(np.float64))
    return ImageBuffer(np.clip(out, 0.0, 1.0).astype(np.float32), ColorSpace.SRGB)


# Rec. 709 / sRGB luminance coefficients for linear RGB.
_LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722], dtype=np.float64)


def luminance(img: ImageBuffer) -> ScalarMap:
    """Weighted channel sum Y = 0.2126 R + 0.7152 G + 0.0722 B."""
    if img.space is not ColorSpace.LINEAR:
        raise SpaceError(f"luminance expects a LINEAR image, got {img.space}")
    if img.channels != 3:
        raise ValueError("luminance requires a 3-channel image")
    y = img.data.astype(np.float64) @ _LUMA_WEIGHTS
    return ScalarMap(np.clip(y, 0.0, 1.0).astype(np.float32), MapRole.LUMINANCE)


def log_luminance(img: ImageBuffer) -> ScalarMap:
    """log(clamp(Y, epsilon, 1)); sRGB inputs are linearized first.

    Single-channel buffers are treated as already holding Y.  Output range
    is [log(epsilon), 0].
    """
    if img.space is ColorSpace.SRGB:
        img = srgb_to_linear(img)
    if img.channels == 3 and img.space is ColorSpace.LINEAR:
        y = luminance(img).data.astype(np.float64)
    else:
        y = img.data[:, :, 0].astype(np.float64)
    y = np.clip(y, EPSILON, 1.0)
    return ScalarMap(np.log(y).astype(np.float32), MapRole.LUMINANCE)


# ---------------------------------------------------------------------------
# PNG I/O (8-bit and 16-bit, grayscale and RGB)
# ---------------------------------------------------------------------------


def _quantize(values: np.ndarray, scale: int) -> np.ndarray:
    # round half away from zero; values are non-negative so floor(x + 0.5)
    v = np.clip(values.astype(np.float64), 0.0, 1.0) * scale
    return np.floor(v + 0.5)


def read_png(path: str | Path) -> ImageBuffer:
    """Decode an 8- or 16-bit grayscale/RGB PNG to an sRGB ImageBuffer.

    8-bit values map v -> v/255, 16-bit v -> v/65535.
    """
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise IOError(f"cannot read PNG: {path}")
    if raw.ndim == 3:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]
        raw = raw[:, :, ::-1]  # BGR -> RGB
    if raw.dtype == np.uint8:
        data = raw.astype(np.float32) / 255.0
    elif raw.dtype == np.uint16:
        data = raw.astype(np.float32) / 65535.0
    else:
        raise IOError(f"unsupported PNG sample type {raw.dtype} in {path}")
    return ImageBuffer(data, ColorSpace.SRGB)


def write_png(img: ImageBuffer, path: str | Path) -> None:
    """Encode to 8-bit PNG, rounding half away from zero."""
    if img.space is ColorSpace.LINEAR:
        raise SpaceError("convert to sRGB before writing PNG")
    q = _quantize(img.data, 255).astype(np.uint8)
    if q.shape[2] == 1:
        q = q[:, :, 0]
    else:
        q = np.ascontiguousarray(q[:, :, ::-1])  # RGB -> BGR
    if not cv2.imwrite(str(path), q):
        raise IOError(f"cannot write PNG: {path}")


def write_png16(data: np.ndarray, path: str | Path) -> None:
    """Encode a single-channel [0, 1] array as 16-bit grayscale PNG."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("write_png16 expects an HxW array")
    q = _quantize(arr, 65535).astype(np.uint16)
    if not cv2.imwrite(str(path), q):
        raise IOError(f"cannot write PNG: {path}")


def read_png16(path: str | Path) -> np.ndarray:
    """Decode a 16-bit grayscale PNG to a float32 [0, 1] array."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise IOError(f"cannot read PNG: {path}")
    if raw.ndim != 2 or raw.dtype != np.uint16:
        raise IOError(f"expected 16-bit grayscale PNG at {path}")
    return raw.astype(np.float32) / 65535.0
