"""Multi-scale color correction for over-post-processed images.

Non-linear camera post-processing can leave the relit shadow area with a
different tone/contrast than the lit surroundings. Three coarse-to-fine
passes split the image into a bilateral-smoothed base plus detail, match
the detail spread (median absolute deviation) of the shadow side to the lit
side per channel, and finally alpha-blend with the relit image using the
normalized scale field.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .imgcore import RasterImage, ScaleField, as_bool_mask, spatial_filter

DEFAULT_BAND = 8
_RATIO_CAP = (0.25, 4.0)


@dataclasses.dataclass
class CorrectionRegions:
    """Pixel sets driving the correction: lit reference ring, umbra source
    ring and the full shadow area."""

    lit_ring: np.ndarray
    umbra_ring: np.ndarray
    shadow: np.ndarray

    def __post_init__(self):
        if (self.lit_ring & self.shadow).any():
            raise InvalidInputError("lit ring must not intersect the shadow set")
        if (self.umbra_ring & ~self.shadow).any():
            raise InvalidInputError("umbra ring must lie inside the shadow set")


def derive_regions(mask, band: int = DEFAULT_BAND, penumbra_offset: int = 0):
    """Build the correction regions from the mask.

    lit ring = dilation band outside the mask; umbra ring = band-wide ring
    starting `penumbra_offset` pixels inside the mask. Returns None when a
    usable ring is empty (correction should then be skipped).
    """
    mdata = as_bool_mask(mask)
    if not mdata.any():
        raise InvalidInputError("mask is empty")
    if band < 1:
        return None
    se = np.ones((3, 3), dtype=bool)
    dil = ndimage.binary_dilation(mdata, structure=se, iterations=int(band))
    lit_ring = dil & ~mdata
    # erosions treat the outside of the frame as shadow so masks touching the
    # image border do not sprout false rings there
    inner = (
        ndimage.binary_erosion(mdata, structure=se, iterations=int(penumbra_offset), border_value=1)
        if penumbra_offset > 0
        else mdata
    )
    umbra_ring = inner & ~ndimage.binary_erosion(inner, structure=se, iterations=int(band), border_value=1)
    if not lit_ring.any() or not umbra_ring.any():
        return None
    return CorrectionRegions(lit_ring=lit_ring, umbra_ring=umbra_ring, shadow=mdata)


def _mad(values: np.ndarray) -> float:
    med = np.median(values)
    return float(np.median(np.abs(values - med)))


def correct_colors(relit: RasterImage, regions: CorrectionRegions, h6: float) -> RasterImage:
    """Three-scale detail-spread alignment.

    Per scale: smooth the current result with a bilateral filter whose
    spatial sigma halves each pass, take the detail as relit minus smooth,
    rescale the shadow-side detail by the lit/umbra MAD ratio per channel
    and write base + rescaled detail back into the shadow pixels.
    """
    if regions is None:
        return relit
    beta = float(max(relit.width, relit.height))
    shadow = regions.shadow
    out = relit.data.copy()
    for s in (1, 2, 3):
        base = spatial_filter(
            RasterImage(np.clip(out, 0.0, 1.0)), "bilateral",
            sigma_space=beta / (2 ** (s + 1)), sigma_range=float(h6),
        ).data
        detail = relit.data - base
        nxt = relit.data.copy()
        for c in range(relit.channels):
            lit_mad = _mad(detail[:, :, c][regions.lit_ring])
            umbra_mad = _mad(detail[:, :, c][regions.umbra_ring])
            if umbra_mad < 1e-6:
                ratio = 1.0
            else:
                ratio = float(np.clip(lit_mad / umbra_mad, *_RATIO_CAP))
            nxt[:, :, c][shadow] = base[:, :, c][shadow] + ratio * detail[:, :, c][shadow]
        out = np.clip(nxt, 0.0, 1.0)
    return RasterImage(out)


def normalized_blend_weight(scales: ScaleField) -> np.ndarray:
    """Per-channel min-max normalization of the scale field over its active
    (scale below 1) pixels; lit pixels keep weight 1."""
    weight = np.ones_like(scales.data)
    for c in range(3):
        ch = scales.data[:, :, c]
        active = ch < 1.0
        if not active.any():
            continue
        lo, hi = float(ch[active].min()), float(ch[active].max())
        if hi - lo < 1e-9:
            continue  # degenerate spread: keep weight 1, blend is a no-op
        w = (ch - lo) / (hi - lo)
        weight[:, :, c] = np.where(active, np.clip(w, 0.0, 1.0), 1.0)
    return weight


def blend_images(relit: RasterImage, corrected: RasterImage, weight: np.ndarray) -> RasterImage:
    """Per-channel alpha blend: weight 1 passes the relit pixel through
    bit-identically, weight 0 takes the corrected pixel."""
    if relit.data.shape != corrected.data.shape or relit.data.shape != weight.shape:
        raise InvalidInputError("blend inputs must share dimensions")
    blended = relit.data * weight + corrected.data * (1.0 - weight)
    keep = weight == 1.0
    blended[keep] = relit.data[keep]
    full = weight == 0.0
    blended[full] = corrected.data[full]
    return RasterImage(np.clip(blended, 0.0, 1.0))


def blend_result(relit: RasterImage, corrected: RasterImage, scales: ScaleField) -> RasterImage:
    """Alpha blend: dark scales take the corrected image, scales of 1 keep
    the relit image."""
    if relit.data.shape[:2] != scales.data.shape[:2]:
        raise InvalidInputError("blend inputs must share dimensions")
    return blend_images(relit, corrected, normalized_blend_weight(scales))
