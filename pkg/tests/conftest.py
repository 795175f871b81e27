"""Shared synthetic fixtures: textured scenes with known shadow scale
fields, plus stroke helpers."""

import numpy as np
import pytest

from umbra.detect import Stroke, StrokeSet
from umbra.imgcore import RasterImage


def checkerboard(size: int, cell: int = 4, lo: float = 0.55, hi: float = 0.70) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    board = ((yy // cell + xx // cell) % 2).astype(np.float64)
    return lo + (hi - lo) * board


def smooth_noise(rng: np.random.Generator, size: int, amp: float = 0.05, cells: int = 8) -> np.ndarray:
    """Band-limited noise: a coarse random lattice upsampled bilinearly."""
    coarse = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1))
    t = np.linspace(0.0, cells, size)
    i0 = np.clip(np.floor(t).astype(int), 0, cells - 1)
    f = t - i0
    rows = coarse[i0][:, i0] * (1 - f)[None, :] + coarse[i0][:, i0 + 1] * f[None, :]
    rows_next = coarse[i0 + 1][:, i0] * (1 - f)[None, :] + coarse[i0 + 1][:, i0 + 1] * f[None, :]
    return amp * (rows * (1 - f)[:, None] + rows_next * f[:, None])


def radial_scale(size: int, minima, radius_frac: float = 0.28, width: float = 12.0) -> np.ndarray:
    """Per-channel radial sigmoid scale field: minima at the center, 1
    outside, with an S-shaped (smoothstep) transition `width` pixels wide."""
    yy, xx = np.mgrid[0:size, 0:size]
    r = np.hypot(yy - size / 2.0, xx - size / 2.0)
    radius = radius_frac * size
    t = np.clip((r - radius) / width + 0.5, 0.0, 1.0)
    ramp = t * t * (3.0 - 2.0 * t)
    out = np.empty((size, size, 3))
    for c, mn in enumerate(minima):
        out[:, :, c] = mn + (1.0 - mn) * ramp
    return out


def make_scene(size: int = 256, colored: bool = False, seed: int = 7, cell: int = 4):
    """Clean textured image times a smooth radial scale field, with oracle
    strokes well inside the umbra / lit areas."""
    rng = np.random.default_rng(seed)
    base = checkerboard(size, cell=cell)
    clean = np.empty((size, size, 3))
    for c in range(3):
        clean[:, :, c] = np.clip(base + smooth_noise(rng, size, amp=0.04), 0.02, 0.98)
    minima = (0.4, 0.5, 0.6) if colored else (0.4, 0.4, 0.4)
    scale = radial_scale(size, minima)
    shadow = np.clip(clean * scale, 0.0, 1.0)

    center = size / 2.0
    radius = 0.28 * size
    shadow_stroke = Stroke(
        label="shadow",
        points=[(center - 0.25 * radius, center), (center + 0.25 * radius, center)],
        radius=max(3, size // 64),
    )
    lit_stroke = Stroke(
        label="lit",
        points=[(12.0, 12.0), (min(60.0, size / 3.0), 12.0)],
        radius=max(3, size // 64),
    )
    strokes = StrokeSet([shadow_stroke, lit_stroke])
    shadow_region = scale.min(axis=2) < 0.97
    return {
        "clean": RasterImage(clean),
        "shadow": RasterImage(shadow),
        "scale": scale,
        "strokes": strokes,
        "shadow_region": shadow_region,
        "size": size,
    }


def two_tone(size: int = 64, dark: float = 0.2, lit: float = 0.8):
    """Left half dark, right half lit, all three channels equal."""
    img = np.full((size, size, 3), lit)
    img[:, : size // 2, :] = dark
    return RasterImage(img)


def simple_strokes(size: int, dark_x: int = 10, lit_x: int = None, radius: int = 2):
    lit_x = size - 10 if lit_x is None else lit_x
    return StrokeSet(
        [
            Stroke(label="shadow", points=[(dark_x, 10), (dark_x, size - 10)], radius=radius),
            Stroke(label="lit", points=[(lit_x, 10), (lit_x, size - 10)], radius=radius),
        ]
    )


@pytest.fixture(scope="session")
def small_scene():
    return make_scene(size=256, colored=False, seed=7)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
