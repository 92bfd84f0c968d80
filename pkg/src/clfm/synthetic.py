"""Synthetic low-/normal-light pair generation for experiments and fixtures.

A scene is a flat reflectance layout of rectangles; an exposure renders it
at an illumination gain.  A pair renders the same scene dark and bright,
optionally displacing one rectangle in the bright rendering to imitate the
structural drift a generative restorer can introduce.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .imgcore import ColorSpace, ImageBuffer, linear_to_srgb


@dataclass(frozen=True)
class Rect:
    top: int
    left: int
    height: int
    width: int
    value: float


@dataclass(frozen=True)
class Scene:
    size: int
    background: float
    rects: tuple[Rect, ...]


def _soften(canvas: np.ndarray, passes: int) -> np.ndarray:
    """Separable binomial blur: ideal step edges become short ramps, the way
    optics and demosaicing soften real edges (an edge-preserving smoother
    leaves perfect steps untouched, so perfectly sharp synthetic edges would
    be invisible to the structural high-pass)."""
    kernel = np.array([1.0, 2.0, 1.0]) / 4.0
    out = canvas.astype(np.float64)
    for _ in range(passes):
        p = np.pad(out, ((1, 1), (0, 0)), mode="edge")
        out = p[:-2] * kernel[0] + p[1:-1] * kernel[1] + p[2:] * kernel[2]
        p = np.pad(out, ((0, 0), (1, 1)), mode="edge")
        out = p[:, :-2] * kernel[0] + p[:, 1:-1] * kernel[1] + p[:, 2:] * kernel[2]
    return out


def random_scene(
    rng: np.random.Generator, size: int = 64, n_rects: int = 2, grid: int = 8
) -> Scene:
    """Rectangles snapped to the latent grid, so the block codec represents
    the scene almost losslessly and any sub-grid displacement stands out."""
    rects = []
    for _ in range(n_rects):
        h = int(rng.integers(2, max(size // (2 * grid), 3) + 1)) * grid
        w = int(rng.integers(2, max(size // (2 * grid), 3) + 1)) * grid
        top = int(rng.integers(0, (size - h) // grid + 1)) * grid
        left = int(rng.integers(0, (size - w) // grid + 1)) * grid
        value = float(rng.uniform(0.45, 0.95))
        rects.append(Rect(top, left, h, w, value))
    return Scene(size, float(rng.uniform(0.08, 0.16)), tuple(rects))


def render_scene(scene: Scene, gain: float, soften_passes: int = 2) -> ImageBuffer:
    """Reflectance layout times an illumination gain, expressed in sRGB."""
    canvas = np.full((scene.size, scene.size), scene.background, dtype=np.float64)
    for r in scene.rects:
        canvas[r.top : r.top + r.height, r.left : r.left + r.width] = r.value
    canvas = _soften(canvas, soften_passes)
    linear = np.clip(canvas * gain, 0.0, 1.0).astype(np.float32)
    rgb = np.repeat(linear[:, :, None], 3, axis=2)
    return linear_to_srgb(ImageBuffer(rgb, ColorSpace.LINEAR))


def shift_rect(scene: Scene, index: int, dy: int, dx: int) -> Scene:
    """Displace one rectangle, clamped to stay inside the canvas."""
    r = scene.rects[index]
    top = min(max(r.top + dy, 0), scene.size - r.height)
    left = min(max(r.left + dx, 0), scene.size - r.width)
    rects = list(scene.rects)
    rects[index] = replace(r, top=top, left=left)
    return replace(scene, rects=tuple(rects))


def make_pair(
    rng: np.random.Generator,
    size: int = 64,
    misaligned: bool = False,
    shift_range: tuple[int, int] = (4, 8),
) -> tuple[ImageBuffer, ImageBuffer]:
    """A (low-light, normal-light) rendering of one scene.

    When misaligned, the bright rendering's scene has one rectangle moved by
    a shift drawn from shift_range (pixels), emulating target-edge drift.
    Gain ranges are kept narrow so the input-to-target mapping is dominated
    by structure, not by per-pair exposure noise.
    """
    scene = random_scene(rng, size)
    dark_gain = float(rng.uniform(0.13, 0.17))
    bright_gain = float(rng.uniform(0.85, 0.95))
    low = render_scene(scene, dark_gain)
    bright_scene = scene
    if misaligned:
        # displace the largest rectangle, always rightward: a systematic
        # drift such as a generative restorer would inherit, rather than
        # zero-mean jitter that averages out of the learned map
        areas = [r.height * r.width for r in scene.rects]
        index = int(np.argmax(areas))
        shift = int(rng.integers(shift_range[0], shift_range[1] + 1))
        bright_scene = shift_rect(scene, index, 0, shift)
    normal = render_scene(bright_scene, bright_gain)
    return low, normal


def make_brightness_pair(
    rng: np.random.Generator, size: int = 64
) -> tuple[ImageBuffer, ImageBuffer]:
    """A pair with the bright image >= the dark one pointwise in linear
    space (same scene, two gains)."""
    scene = random_scene(rng, size)
    dark_gain = float(rng.uniform(0.1, 0.25))
    bright_gain = float(rng.uniform(0.6, 1.0))
    return render_scene(scene, dark_gain), render_scene(scene, bright_gain)


def square_shift_pair(
    size: int = 64, shift: int = 6, square: int = 20
) -> tuple[ImageBuffer, ImageBuffer]:
    """Deterministic pair: one centered square, the second image holding the
    same square displaced horizontally by `shift` pixels."""
    top = (size - square) // 2
    left = (size - square) // 2 - shift // 2
    scene = Scene(size, 0.12, (Rect(top, left, square, square, 0.4),))
    moved = shift_rect(scene, 0, 0, shift)
    return render_scene(scene, 0.5), render_scene(moved, 0.5)


def _checker_canvas(
    size: int, top: int, left: int, patch: int, v_hi: float, v_lo: float,
    background: float, block: int = 8,
) -> np.ndarray:
    canvas = np.full((size, size), background, dtype=np.float64)
    for by in range(patch // block):
        for bx in range(patch // block):
            value = v_hi if (by + bx) % 2 == 0 else v_lo
            canvas[
                top + by * block : top + (by + 1) * block,
                left + bx * block : left + (bx + 1) * block,
            ] = value
    return canvas


def make_textured_pair(
    rng: np.random.Generator,
    size: int = 64,
    misaligned: bool = False,
    shift_range: tuple[int, int] = (4, 8),
    patch: int = 24,
) -> tuple[ImageBuffer, ImageBuffer]:
    """A pair whose scene is one two-tone checkered patch on a dark field.

    The patch is anchored half a latent block off the 8 px grid, so block
    statistics never line up trivially with its texture.  When misaligned,
    the bright rendering's patch slides horizontally by a sub-block amount
    drawn from shift_range, scrambling every affected block mean: the
    sharpest kind of target an edge-unaware loss can be forced to chase.
    """
    # anchor slots keep the patch inside the canvas even after the largest
    # possible shift in either direction
    margin = shift_range[1]
    slots = tuple(range(margin + 4, size - patch - margin, 8))
    top = slots[int(rng.integers(len(slots)))]
    left = slots[int(rng.integers(len(slots)))]
    v_hi = float(rng.uniform(0.7, 0.95))
    v_lo = float(rng.uniform(0.3, 0.5))
    background = 0.12

    def render(canvas: np.ndarray, gain: float) -> ImageBuffer:
        lin = np.clip(_soften(canvas, 2) * gain, 0.0, 1.0).astype(np.float32)
        return linear_to_srgb(
            ImageBuffer(np.repeat(lin[:, :, None], 3, axis=2), ColorSpace.LINEAR)
        )

    base = _checker_canvas(size, top, left, patch, v_hi, v_lo, background)
    low = render(base, 0.15)
    if misaligned:
        shift = int(rng.integers(shift_range[0], shift_range[1] + 1))
        if rng.uniform() < 0.5:
            shift = -shift
        moved = _checker_canvas(size, top, left + shift, patch, v_hi, v_lo, background)
        return low, render(moved, 0.9)
    return low, render(base, 0.9)
