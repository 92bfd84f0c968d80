"""Structural edge-difference analysis and misalignment-aware weight maps.

A pseudo target whose edges drifted away from the input's edges should not
be fitted at full strength.  Edges are extracted from an illumination-
normalized high-pass representation, target edges far from any input edge
are flagged as unreliable, and the flag is turned into a per-pixel
supervision weight in [w_min, 1] that is later resampled to the latent
grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imgcore import (
    ImageBuffer,
    MapRole,
    ScalarMap,
    log_luminance,
    read_png16,
    write_png16,
)
from .spatial import (
    BilateralParams,
    BinaryMask,
    bilateral_filter,
    dilate,
    distance_transform,
    resize_area,
    sobel_l1,
    threshold_percentile,
)

# Edge binarization: percentile threshold with an absolute floor so flat
# images produce empty edge maps instead of flagging sensor noise.
EDGE_PERCENTILE = 90.0
EDGE_FLOOR = 1e-3


@dataclass(frozen=True)
class MaskParams:
    """Unreliability distance d (pixels), weight drop alpha, weight floor
    w_min, and the post-threshold dilation radius."""

    d: float = 3.0
    alpha: float = 0.8
    w_min: float = 0.2
    dilate_radius: int = 2

    def __post_init__(self):
        if self.d < 0:
            raise ValueError("distance threshold d must be >= 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 <= self.w_min <= 1.0:
            raise ValueError("w_min must lie in [0, 1]")
        if self.dilate_radius < 0:
            raise ValueError("dilate_radius must be >= 0")


@dataclass(frozen=True)
class WeightMap:
    """Per-pixel supervision weights in [w_min, 1]."""

    data: np.ndarray
    params: MaskParams

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError("weight map must be HxW")
        if arr.min() < self.params.w_min - 1e-6 or arr.max() > 1.0 + 1e-6:
            raise ValueError("weights must lie in [w_min, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def structural_highpass(
    img: ImageBuffer, params: BilateralParams | None = None
) -> ScalarMap:
    """High-pass structural component: log-luminance minus its bilateral
    smoothing.  A global gain becomes an additive log offset and is removed,
    so images at different brightness share similar responses."""
    params = params or BilateralParams()
    logy = log_luminance(img)
    smooth = bilateral_filter(logy, params)
    residual = logy.data.astype(np.float64) - smooth.data.astype(np.float64)
    return ScalarMap(residual.astype(np.float32), MapRole.HIGHPASS)


def edge_response(img: ImageBuffer, params: BilateralParams | None = None) -> ScalarMap:
    """L1 gradient magnitude of the high-pass structural component."""
    return sobel_l1(structural_highpass(img, params))


def edge_diff(
    a: ImageBuffer, b: ImageBuffer, params: BilateralParams | None = None
) -> ScalarMap:
    """Pointwise |edge_response(a) - edge_response(b)|; suppresses brightness
    and color discrepancies, leaving structural misalignment."""
    if a.data.shape[:2] != b.data.shape[:2]:
        raise ValueError("images must share dimensions")
    ea = edge_response(a, params).data.astype(np.float64)
    eb = edge_response(b, params).data.astype(np.float64)
    return ScalarMap(np.abs(ea - eb).astype(np.float32), MapRole.EDGE)


def binarize_edges(img: ImageBuffer, params: BilateralParams | None = None) -> BinaryMask:
    """Edge response thresholded at the 90th percentile with floor 1e-3."""
    return threshold_percentile(edge_response(img, params), EDGE_PERCENTILE, EDGE_FLOOR)


def unreliable_mask(
    b0: BinaryMask, bs: BinaryMask, d: float, dilate_radius: int = 2
) -> BinaryMask:
    """Flag target edge pixels farther than d from any input edge, then
    dilate slightly to cover the neighborhood of the mismatch."""
    if b0.data.shape != bs.data.shape:
        raise ValueError("masks must share dimensions")
    if d < 0:
        raise ValueError("distance threshold d must be >= 0")
    dist = distance_transform(b0)
    flagged = BinaryMask(((bs.data > 0) & (dist.data > d)).astype(np.uint8))
    return dilate(flagged, dilate_radius)


def soft_weight(mask: BinaryMask, alpha: float, w_min: float) -> WeightMap:
    """W = clip(1 - alpha * M, w_min, 1): unreliable pixels keep weak but
    positive supervision."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if not 0.0 <= w_min <= 1.0:
        raise ValueError("w_min must lie in [0, 1]")
    w = np.clip(1.0 - alpha * mask.data.astype(np.float64), w_min, 1.0)
    return WeightMap(w.astype(np.float32), MaskParams(alpha=alpha, w_min=w_min))


def weight_map_for_pair(
    i0: ImageBuffer,
    i_s: ImageBuffer,
    params: MaskParams | None = None,
    bilateral: BilateralParams | None = None,
) -> WeightMap:
    """Weight map for one (input, pseudo target) pair: binarize both edge
    responses, flag target edges far from input edges, soften."""
    params = params or MaskParams()
    if i0.data.shape[:2] != i_s.data.shape[:2]:
        raise ValueError("images must share dimensions")
    b0 = binarize_edges(i0, bilateral)
    bs = binarize_edges(i_s, bilateral)
    mask = unreliable_mask(b0, bs, params.d, params.dilate_radius)
    w = np.clip(1.0 - params.alpha * mask.data.astype(np.float64), params.w_min, 1.0)
    return WeightMap(w.astype(np.float32), params)


def to_latent(w: WeightMap, latent_h: int, latent_w: int) -> WeightMap:
    """Area-resample to the latent grid; block means of values in
    [w_min, 1] stay in [w_min, 1]."""
    resized = resize_area(ScalarMap(w.data, MapRole.WEIGHT), latent_h, latent_w)
    return WeightMap(resized.data, w.params)


# ---------------------------------------------------------------------------
# Offline cache persistence (16-bit grayscale PNG, quantization error <= 8e-6)
# ---------------------------------------------------------------------------


def weight_map_filename(pair_id: str, s: float) -> str:
    return f"{pair_id}_s{round(s * 100):03d}.w16.png"


def save_weight_map(w: WeightMap, directory: str | Path, pair_id: str, s: float) -> Path:
    path = Path(directory) / weight_map_filename(pair_id, s)
    write_png16(w.data, path)
    return path


def load_weight_map(path: str | Path, params: MaskParams | None = None) -> WeightMap:
    data = read_png16(path)
    params = params or MaskParams()
    # 16-bit quantization can land a hair under w_min; snap back inside
    return WeightMap(np.clip(data, params.w_min, 1.0), params)
