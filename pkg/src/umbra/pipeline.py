"""End-to-end removal pipeline shared by the CLI and the HTTP service."""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from . import colorcorrect, detect, penumbra, relight
from .errors import DegenerateSampleError, NoValidSamplesError
from .evaluate import ALL_PIXELS, error_ratio
from .imgcore import RasterImage, ScaleField, from_log, gradient_field, to_log
from .paramlearn import DEFAULT_PARAMS, ParamVector


@dataclasses.dataclass
class RemovalResult:
    result: RasterImage
    relit: RasterImage
    mask: detect.ShadowMask
    fusion: detect.FusionResult
    scale_field: ScaleField
    sparse_scales: ScaleField
    sparse_known: np.ndarray
    strips: list
    aligned_strips: list
    params: ParamVector
    color_corrected: bool


def remove_shadow(
    image: RasterImage,
    strokes: detect.StrokeSet,
    params: ParamVector | None = None,
    color_correct: bool = True,
) -> RemovalResult:
    """Detect, unwrap, relight and color-correct in one pass."""
    params = params or DEFAULT_PARAMS
    mask = detect.detect_mask(image, strokes, params.h1)
    fusion = detect.build_fusion_image(image, strokes, params.h2)
    grad = gradient_field(fusion.image)
    log_img = to_log(image.data) if image.channels == 3 else to_log(np.repeat(image.data, 3, axis=2))

    components = penumbra.extract_boundary(mask, spacing=penumbra.DEFAULT_SPACING)
    h, w = image.height, image.width
    sums = np.zeros((h, w, 3))
    counts = np.zeros((h, w))
    strips, aligned_strips = [], []
    max_half = 0.0
    for points in components:
        # points whose starting gradient sits at the noise floor of the
        # fusion image would grow unbounded; treat them as degenerate
        mags = np.array([penumbra.start_gradient(bp, grad) for bp in points])
        floor = 0.25 * float(np.median(mags)) if len(mags) else 0.0
        lines = []
        for bp in points:
            try:
                lines.append(
                    penumbra.grow_sampling_line(bp, fusion.image, grad, params.h5, log_img, min_magnitude=floor)
                )
            except DegenerateSampleError:
                continue
        if len(lines) < 3:
            continue
        try:
            valid = penumbra.filter_outliers(lines, params.h3, params.h4)
        except NoValidSamplesError:
            continue
        strip = penumbra.build_strip(valid)
        strips.append(strip)
        astrip = penumbra.align_strip(strip)
        aligned_strips.append(astrip)
        pyramid = relight.build_pyramid(astrip)
        relight.roughness(pyramid)
        chosen = relight.select_scales(pyramid)
        relight.accumulate_scatter(sums, counts, chosen, astrip)
        max_half = max(max_half, max((l.length - 1) / 2.0 for l in valid))
    if counts.sum() == 0:
        raise NoValidSamplesError("no shadow component produced usable sampling lines")

    known = counts > 0
    sparse_vals = np.ones((h, w, 3))
    sparse_vals[known] = sums[known] / counts[known][:, None]
    sparse = ScaleField(np.clip(sparse_vals, relight.SCALE_FLOOR, 1.0))
    dense, relit = relight.densify_and_remove(image, sparse, known, mask, max_half)

    corrected = relit
    applied = False
    if color_correct:
        regions = colorcorrect.derive_regions(
            mask, band=colorcorrect.DEFAULT_BAND, penumbra_offset=int(np.ceil(max_half))
        )
        if regions is None:
            warnings.warn("color correction skipped: empty reference or source ring", stacklevel=2)
        else:
            adjusted = colorcorrect.correct_colors(relit, regions, params.h6)
            corrected = colorcorrect.blend_result(relit, adjusted, dense)
            applied = True

    return RemovalResult(
        result=corrected,
        relit=relit,
        mask=mask,
        fusion=fusion,
        scale_field=dense,
        sparse_scales=sparse,
        sparse_known=known,
        strips=strips,
        aligned_strips=aligned_strips,
        params=params,
        color_corrected=applied,
    )


def score_case(params: ParamVector, case) -> float:
    """All-pixel error ratio of a full removal run on one dataset case."""
    from .detect import StrokeSet

    image = case.load_shadow()
    gt = case.load_groundtruth()
    strokes = StrokeSet.from_json(case.strokes_path.read_text())
    outcome = remove_shadow(image, strokes, params=params)
    return error_ratio(gt, image, outcome.result, scope=ALL_PIXELS).ratio


def strip_to_image(strip) -> RasterImage:
    """Debug view of a strip: log intensities mapped back to linear."""
    linear = np.clip(from_log(strip.columns), 0.0, 1.0)
    return RasterImage(linear)
