"""Spatial operator toolbox: bilateral smoothing, Sobel edges, morphology,
exact Euclidean distance transform, and area resampling.

All operators use replicate border padding (no spurious edges at image
boundaries), accumulate in float64, and iterate offsets in a fixed order so
results are bit-deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imgcore import MapRole, ScalarMap


class ConfigError(ValueError):
    """Invalid operator parameters."""


@dataclass(frozen=True)
class BilateralParams:
    """Gaussian spatial sigma (pixels) and range sigma (value units).

    The defaults keep illumination smooth at the 64-1024 px scales the
    pipeline handles and are recorded in dataset manifests.
    """

    sigma_spatial: float = 8.0
    sigma_range: float = 0.1

    def __post_init__(self):
        if self.sigma_spatial <= 0 or self.sigma_range <= 0:
            raise ConfigError("bilateral sigmas must be positive")

    @property
    def radius(self) -> int:
        return int(math.ceil(2.0 * self.sigma_spatial))


@dataclass(frozen=True)
class BinaryMask:
    """H x W mask with strictly {0, 1} values (stored uint8)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"expected HxW mask, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")
            arr = arr.astype(np.uint8)
        elif not np.isin(arr, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def bilateral_filter(src: ScalarMap, params: BilateralParams) -> ScalarMap:
    """Gaussian spatial x Gaussian range filter, weights normalized per pixel."""
    r = params.radius
    values = src.data.astype(np.float64)
    h, w = values.shape
    padded = np.pad(values, r, mode="edge")
    inv2ss = 1.0 / (2.0 * params.sigma_spatial**2)
    inv2sr = 1.0 / (2.0 * params.sigma_range**2)

    acc = np.zeros((h, w), dtype=np.float64)
    weight_sum = np.zeros((h, w), dtype=np.float64)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            w_spatial = math.exp(-(dy * dy + dx * dx) * inv2ss)
            shifted = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            weight = w_spatial * np.exp(-((shifted - values) ** 2) * inv2sr)
            acc += weight * shifted
            weight_sum += weight
    return ScalarMap((acc / weight_sum).astype(np.float32), src.role)


def sobel_l1(src: ScalarMap) -> ScalarMap:
    """|G_x| + |G_y| with 3x3 Sobel kernels scaled by 1/8."""
    p = np.pad(src.data.astype(np.float64), 1, mode="edge")
    tl, tc, tr = p[:-2, :-2], p[:-2, 1:-1], p[:-2, 2:]
    ml, mr = p[1:-1, :-2], p[1:-1, 2:]
    bl, bc, br = p[2:, :-2], p[2:, 1:-1], p[2:, 2:]
    gx = ((tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl)) / 8.0
    gy = ((bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr)) / 8.0
    return ScalarMap((np.abs(gx) + np.abs(gy)).astype(np.float32), MapRole.EDGE)


def dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    """Chebyshev dilation with a (2r+1)^2 square structuring element."""
    if radius < 0:
        raise ConfigError("dilation radius must be >= 0")
    if radius == 0:
        return BinaryMask(mask.data.copy())
    h, w = mask.data.shape
    padded = np.pad(mask.data, radius, mode="constant")
    out = np.zeros((h, w), dtype=np.uint8)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            out |= padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
    return BinaryMask(out)


def _edt_1d_squared(f: np.ndarray) -> np.ndarray:
    """Lower envelope of parabolas (exact 1-D squared distance transform).

    f must be finite; the z sentinels are true infinities so the stack never
    pops below its first parabola.
    """
    n = f.shape[0]
    d = np.empty(n, dtype=np.float64)
    v = np.zeros(n, dtype=np.int64)
    z = np.empty(n + 1, dtype=np.float64)
    z[0] = -np.inf
    z[1] = np.inf
    k = 0
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) ** 2 + f[v[k]]
    return d


def distance_transform(mask: BinaryMask) -> ScalarMap:
    """Exact Euclidean distance to the nearest 1-pixel (two-pass parabola method).

    An all-zero mask yields the sentinel value height + width everywhere.
    """
    h, w = mask.data.shape
    if not mask.data.any():
        sentinel = float(h + w)
        return ScalarMap(np.full((h, w), sentinel, dtype=np.float32), MapRole.DISTANCE)

    # finite stand-in for infinity: larger than any attainable squared distance
    big = float(4 * (h * h + w * w) + 16)

    # pass 1: exact per-column vertical distance, swept up and down
    g = np.where(mask.data > 0, 0.0, big)
    for i in range(1, h):
        g[i] = np.minimum(g[i], g[i - 1] + 1.0)
    for i in range(h - 2, -1, -1):
        g[i] = np.minimum(g[i], g[i + 1] + 1.0)
    g = g**2

    # pass 2: parabola envelope along each row
    out = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        out[i] = _edt_1d_squared(g[i])
    return ScalarMap(np.sqrt(out).astype(np.float32), MapRole.DISTANCE)


def resize_area(src: ScalarMap, out_h: int, out_w: int) -> ScalarMap:
    """Block-mean downsampling; requires integer downscale factors."""
    h, w = src.data.shape
    if out_h <= 0 or out_w <= 0 or out_h > h or out_w > w:
        raise ConfigError(f"target size {out_h}x{out_w} invalid for {h}x{w} input")
    if h % out_h != 0 or w % out_w != 0:
        raise ConfigError(f"non-integer downscale factor: {h}x{w} -> {out_h}x{out_w}")
    fy, fx = h // out_h, w // out_w
    blocks = src.data.astype(np.float64).reshape(out_h, fy, out_w, fx)
    return ScalarMap(blocks.mean(axis=(1, 3)).astype(np.float32), src.role)


def threshold_percentile(src: ScalarMap, q: float, floor: float) -> BinaryMask:
    """Set pixels strictly above max(percentile_q, floor).

    The percentile uses the nearest-rank convention: the value at sorted
    (1-based) index ceil(q/100 * N).
    """
    if not 0.0 < q < 100.0:
        raise ConfigError("percentile must lie strictly between 0 and 100")
    flat = np.sort(src.data, axis=None)
    rank = min(max(int(math.ceil(q / 100.0 * flat.size)), 1), flat.size)
    threshold = max(float(flat[rank - 1]), float(floor))
    return BinaryMask((src.data > threshold).astype(np.uint8))
