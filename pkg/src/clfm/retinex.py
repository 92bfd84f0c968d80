"""Retinex decomposition and continuous pseudo-ground-truth construction.

An image is modeled as reflectance times illumination (I = R * L).  A pair
of exposures of the same scene is turned into a continuum of intermediate
targets by interpolating illumination geometrically (in the log domain) and
blending reflectance conservatively, then recombining.  The plain RGB
convex blend is kept alongside as the baseline it improves on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .imgcore import (
    EPSILON,
    ColorSpace,
    ImageBuffer,
    MapRole,
    ScalarMap,
    linear_to_srgb,
    luminance,
    srgb_to_linear,
)
from .spatial import BilateralParams, bilateral_filter


class InterpolationMethod(enum.Enum):
    RETINEX = "retinex"
    ALPHA = "alpha"


@dataclass(frozen=True)
class RetinexDecomposition:
    """Reflectance (3-channel, >= 0, may exceed 1) and clamped illumination.

    reflectance * illumination reconstructs the linear input within 1e-6.
    """

    reflectance: np.ndarray
    illumination: ScalarMap

    def __post_init__(self):
        refl = np.ascontiguousarray(self.reflectance, dtype=np.float32)
        if refl.ndim != 3 or refl.shape[2] != 3:
            raise ValueError("reflectance must be HxWx3")
        if refl.min() < 0 or not np.isfinite(refl).all():
            raise ValueError("reflectance must be finite and non-negative")
        object.__setattr__(self, "reflectance", refl)
        if self.illumination.role is not MapRole.ILLUMINATION:
            raise ValueError("illumination map must carry the ILLUMINATION role")


@dataclass(frozen=True)
class StrengthGroup:
    """Ordered (strength, image) entries from s=0 (the input) to s=1 (the
    reference), intermediates produced by the tagged method."""

    pair_id: str
    entries: tuple[tuple[float, ImageBuffer], ...]
    method: InterpolationMethod

    def __post_init__(self):
        strengths = [s for s, _ in self.entries]
        if len(strengths) < 2 or strengths[0] != 0.0 or strengths[-1] != 1.0:
            raise ValueError("group must span s=0 .. s=1")
        if any(b <= a for a, b in zip(strengths, strengths[1:])):
            raise ValueError("strengths must be strictly increasing")

    @property
    def strengths(self) -> tuple[float, ...]:
        return tuple(s for s, _ in self.entries)

    def image_at(self, s: float) -> ImageBuffer:
        for strength, img in self.entries:
            if strength == s:
                return img
        raise KeyError(f"no entry at strength {s}")


def _check_strength(s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"strength must lie in [0, 1], got {s}")
    return float(s)


def decompose(img: ImageBuffer, params: BilateralParams) -> RetinexDecomposition:
    """Estimate illumination as bilateral-smoothed luminance, reflectance as
    the per-channel ratio image / illumination."""
    if img.space is not ColorSpace.LINEAR:
        raise ValueError("decompose expects a LINEAR image")
    if img.channels != 3:
        raise ValueError("decompose requires a 3-channel image")
    smoothed = bilateral_filter(luminance(img), params)
    illum = np.clip(smoothed.data.astype(np.float64), EPSILON, 1.0)
    refl = img.data.astype(np.float64) / illum[:, :, None]
    return RetinexDecomposition(
        refl.astype(np.float32),
        ScalarMap(illum.astype(np.float32), MapRole.ILLUMINATION),
    )


def interpolate_illumination(l0: ScalarMap, l1: ScalarMap, s: float) -> ScalarMap:
    """Pointwise geometric interpolation exp((1-s) log L0 + s log L1),
    i.e. L0^(1-s) * L1^s."""
    s = _check_strength(s)
    for m in (l0, l1):
        if m.role is not MapRole.ILLUMINATION:
            raise ValueError("inputs must be ILLUMINATION maps")
    if l0.data.shape != l1.data.shape:
        raise ValueError("illumination maps must share a shape")
    log_mix = (1.0 - s) * np.log(l0.data.astype(np.float64)) + s * np.log(
        l1.data.astype(np.float64)
    )
    out = np.clip(np.exp(log_mix), EPSILON, 1.0)
    return ScalarMap(out.astype(np.float32), MapRole.ILLUMINATION)


def interpolate_reflectance(r0: np.ndarray, r1: np.ndarray, s: float) -> np.ndarray:
    """Conservative convex blend with beta = 0.5 s: at s=1 the blend sits at
    the midpoint, trusting neither endpoint's artifacts fully."""
    s = _check_strength(s)
    if r0.shape != r1.shape:
        raise ValueError(f"reflectance shapes differ: {r0.shape} vs {r1.shape}")
    beta = 0.5 * s
    out = (1.0 - beta) * r0.astype(np.float64) + beta * r1.astype(np.float64)
    return out.astype(np.float32)


def reconstruct(reflectance: np.ndarray, illumination: ScalarMap) -> ImageBuffer:
    """clip(R * L, 0, 1) in linear space."""
    refl = reflectance.astype(np.float64)
    illum = illumination.data.astype(np.float64)
    if refl.shape[:2] != illum.shape:
        raise ValueError("reflectance and illumination shapes differ")
    if refl.ndim == 2:
        refl = refl[:, :, None]
    out = np.clip(refl * illum[:, :, None], 0.0, 1.0)
    if out.shape[2] == 1:
        out = out[:, :, 0]
    return ImageBuffer(out.astype(np.float32), ColorSpace.LINEAR)


def retinex_interpolate(
    i0: ImageBuffer,
    i1: ImageBuffer,
    s: float,
    params: BilateralParams | None = None,
) -> ImageBuffer:
    """Full pipeline: linearize, decompose both endpoints, interpolate
    illumination geometrically and reflectance conservatively, recombine,
    clip, and return to sRGB."""
    s = _check_strength(s)
    params = params or BilateralParams()
    if i0.data.shape != i1.data.shape:
        raise ValueError("images must share dimensions")
    d0 = decompose(srgb_to_linear(i0), params)
    d1 = decompose(srgb_to_linear(i1), params)
    ls = interpolate_illumination(d0.illumination, d1.illumination, s)
    rs = interpolate_reflectance(d0.reflectance, d1.reflectance, s)
    return linear_to_srgb(reconstruct(rs, ls))


def alpha_blend(i0: ImageBuffer, i1: ImageBuffer, s: float) -> ImageBuffer:
    """Convex blend (1-s) I0 + s I1 in the inputs' native space (the
    display-space baseline)."""
    s = _check_strength(s)
    if i0.data.shape != i1.data.shape:
        raise ValueError("images must share dimensions")
    if i0.space is not i1.space:
        raise ValueError("images must share a color space")
    blended = (1.0 - s) * i0.data.astype(np.float64) + s * i1.data.astype(np.float64)
    return ImageBuffer(blended.astype(np.float32), i0.space)


def build_group(
    i0: ImageBuffer,
    i1: ImageBuffer,
    strengths: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8),
    method: InterpolationMethod = InterpolationMethod.RETINEX,
    params: BilateralParams | None = None,
    pair_id: str = "",
) -> StrengthGroup:
    """Assemble the continuous pseudo-paired group.

    Endpoints are the original images verbatim, never reconstructions: at
    s=1 the reflectance midpoint would otherwise make the reconstruction
    differ from the reference by design.
    """
    strengths = tuple(float(s) for s in strengths)
    if any(not 0.0 < s < 1.0 for s in strengths):
        raise ValueError("intermediate strengths must lie strictly inside (0, 1)")
    if list(strengths) != sorted(set(strengths)):
        raise ValueError("strengths must be sorted and distinct")
    if i0.data.shape != i1.data.shape:
        raise ValueError("images must share dimensions")

    entries: list[tuple[float, ImageBuffer]] = [(0.0, i0)]
    if not strengths:
        entries.append((1.0, i1))
        return StrengthGroup(pair_id, tuple(entries), method)
    if method is InterpolationMethod.RETINEX:
        # decompose once; the per-strength work is just the interpolation
        bilateral = params or BilateralParams()
        d0 = decompose(srgb_to_linear(i0), bilateral)
        d1 = decompose(srgb_to_linear(i1), bilateral)
        for s in strengths:
            ls = interpolate_illumination(d0.illumination, d1.illumination, s)
            rs = interpolate_reflectance(d0.reflectance, d1.reflectance, s)
            entries.append((s, linear_to_srgb(reconstruct(rs, ls))))
    else:
        for s in strengths:
            entries.append((s, alpha_blend(i0, i1, s)))
    entries.append((1.0, i1))
    return StrengthGroup(pair_id, tuple(entries), method)
