"""Multi-scale shadow scale estimation and inverse relighting.

The aligned strip is smoothed across columns by five exponentially growing
box kernels. Each layer's columns become candidate scale profiles (ratio to
the lit end); a roughness score picks one layer per column, the winning
scales are mapped back through the inverse alignment onto their sampling
lines, and the sparse result is densified by harmonic in-painting before
dividing the image by the field.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import ndimage

from .errors import NoScalesError
from .imgcore import RasterImage, ScaleField, as_bool_mask, inpaint_field, _moving_average_1d
from .penumbra import PenumbraStrip, unwarp_column

KERNEL_EXPONENTS = (2, 3, 4, 5, 6)
SCALE_FLOOR = 1e-3


@dataclasses.dataclass(eq=False)
class ScalePyramid:
    """Per-layer scale columns plus the roughness/selection bookkeeping."""

    layers: list                      # 5 arrays (rows, cols, 3) of scales
    kernel_sizes: tuple
    roughness: np.ndarray | None = None   # (cols, 5)
    selection: np.ndarray | None = None   # (cols,)
    narrow_strip: bool = False

    @property
    def n_cols(self) -> int:
        return self.layers[0].shape[1]

    @property
    def n_rows(self) -> int:
        return self.layers[0].shape[0]


def build_pyramid(strip: PenumbraStrip) -> ScalePyramid:
    """Filter the strip horizontally with box kernels 2^n wide and convert
    each filtered column to scales by dividing out the lit-end intensity."""
    sizes = tuple(2 ** e for e in KERNEL_EXPONENTS)
    narrow = strip.n_cols < 4
    layers = []
    for size in sizes:
        filtered = _moving_average_1d(strip.columns, size, axis=1)
        # log-domain intensities: ratio to the lit end is a difference
        scales = np.exp(filtered - filtered[-1:, :, :])
        layers.append(scales)
    return ScalePyramid(layers=layers, kernel_sizes=sizes, narrow_strip=narrow)


def roughness(pyramid: ScalePyramid) -> np.ndarray:
    """Summed squared second difference of each scale column (all channels),
    one score per (column, layer)."""
    out = np.empty((pyramid.n_cols, len(pyramid.layers)))
    for li, layer in enumerate(pyramid.layers):
        second = layer[2:, :, :] - 2.0 * layer[1:-1, :, :] + layer[:-2, :, :]
        out[:, li] = (second * second).sum(axis=(0, 2))
    pyramid.roughness = out
    return out


def select_scales(pyramid: ScalePyramid) -> np.ndarray:
    """Pick, per column, the layer with the lowest roughness strictly above
    the mean roughness; when none qualifies the smallest kernel wins.
    Returns the chosen scale columns clamped to (1e-3, 1]."""
    if pyramid.roughness is None:
        roughness(pyramid)
    scores = pyramid.roughness
    threshold = float(scores.mean())
    n_cols = pyramid.n_cols
    selection = np.zeros(n_cols, dtype=int)
    for j in range(n_cols):
        above = np.nonzero(scores[j] > threshold)[0]
        selection[j] = int(above[np.argmin(scores[j, above])]) if above.size else 0
    pyramid.selection = selection
    chosen = np.empty_like(pyramid.layers[0])
    for j in range(n_cols):
        chosen[:, j, :] = pyramid.layers[selection[j]][:, j, :]
    return np.clip(chosen, SCALE_FLOOR, 1.0)


def scatter_points(chosen: np.ndarray, strip: PenumbraStrip):
    """Undo each column's alignment, resample to its line's native length
    and emit (pixel row, pixel col, 3-channel scale) samples."""
    rows_out, cols_out, vals_out = [], [], []
    for j, line in enumerate(strip.lines):
        col = chosen[:, j, :]
        native = unwarp_column(col, float(strip.stretches[j]), float(strip.shifts[j]), line.length)
        pos = line.positions()  # (n, 2) as (x, y)
        px = np.rint(pos[:, 0]).astype(np.intp)
        py = np.rint(pos[:, 1]).astype(np.intp)
        rows_out.append(py)
        cols_out.append(px)
        vals_out.append(native)
    return np.concatenate(rows_out), np.concatenate(cols_out), np.concatenate(vals_out)


def scatter_scales(chosen: np.ndarray, strip: PenumbraStrip, shape: tuple):
    """Write scale samples to their nearest pixels; colliding writes
    average. Returns (sparse ScaleField, known mask)."""
    h, w = shape
    sums = np.zeros((h, w, 3))
    counts = np.zeros((h, w))
    accumulate_scatter(sums, counts, chosen, strip)
    known = counts > 0
    vals = np.ones((h, w, 3))
    vals[known] = sums[known] / counts[known][:, None]
    return ScaleField(np.clip(vals, SCALE_FLOOR, 1.0)), known


def accumulate_scatter(sums: np.ndarray, counts: np.ndarray, chosen: np.ndarray, strip: PenumbraStrip) -> None:
    h, w = counts.shape
    rows, cols, vals = scatter_points(chosen, strip)
    inb = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    rows, cols, vals = rows[inb], cols[inb], vals[inb]
    np.add.at(sums, (rows, cols), vals)
    np.add.at(counts, (rows, cols), 1.0)


def densify_and_remove(
    img: RasterImage,
    sparse: ScaleField,
    known: np.ndarray,
    mask,
    half_length: float,
):
    """Harmonic densification of the scattered scales and inverse scaling.

    The fill region is the mask dilated by the longest half line; a 2-pixel
    ring of scale 1 at the region's lit edge anchors the boundary. Pixels
    outside the region keep scale exactly 1, so the relit image is
    bit-identical to the input there.
    """
    if not np.asarray(known, dtype=bool).any():
        raise NoScalesError("no sparse scale samples to densify")
    mdata = as_bool_mask(mask)
    radius = max(int(np.ceil(half_length)) + 1, 2)
    region = ndimage.binary_dilation(mdata, structure=np.ones((3, 3), dtype=bool), iterations=radius)
    # border_value=1: the region conceptually continues past the image edge,
    # so the lit anchor ring only forms along its true outer boundary
    ring = region & ~ndimage.binary_erosion(
        region, structure=np.ones((3, 3), dtype=bool), iterations=2, border_value=1
    )

    values = np.ones_like(sparse.data)
    known = np.asarray(known, dtype=bool)
    values[known] = sparse.data[known]
    known_full = known | ring  # scattered samples win inside the ring
    field = inpaint_field(ScaleField(np.clip(values, SCALE_FLOOR, 1.0)), known_full, region)

    dense = np.ones_like(field.data)
    dense[region] = field.data[region]
    dense = np.clip(dense, SCALE_FLOOR, 1.0)
    relit = np.clip(img.data / dense, 0.0, 1.0)
    # exact identity where the scale is exactly one
    flat = dense == 1.0
    relit[flat] = img.data[flat]
    return ScaleField(dense), RasterImage(relit)
