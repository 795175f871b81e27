"""Interactive scribble-driven shadow removal toolkit."""

from .colorcorrect import CorrectionRegions, blend_result, correct_colors, derive_regions
from .detect import FusionResult, ShadowMask, Stroke, StrokeSet, build_fusion_image, detect_mask
from .errors import UmbraError
from .evaluate import DatasetCase, ScoreRecord, attribute_report, error_ratio, gt_quality, load_dataset
from .imgcore import (
    RasterImage,
    ScaleField,
    VectorField,
    color_convert,
    gradient_field,
    inpaint_field,
    load_image,
    resample_column,
    save_image,
    spatial_filter,
)
from .paramlearn import DEFAULT_PARAMS, ObjectiveSpec, ParamVector, evaluate_objective, learn_params
from .penumbra import PenumbraStrip, SamplingLine, align_strip, build_strip, extract_boundary, filter_outliers, grow_sampling_line
from .pipeline import RemovalResult, remove_shadow
from .relight import ScalePyramid, build_pyramid, densify_and_remove, roughness, scatter_scales, select_scales

__version__ = "0.1.0"

__all__ = [
    "UmbraError",
    "RasterImage",
    "VectorField",
    "ScaleField",
    "load_image",
    "save_image",
    "color_convert",
    "spatial_filter",
    "gradient_field",
    "inpaint_field",
    "resample_column",
    "Stroke",
    "StrokeSet",
    "ShadowMask",
    "FusionResult",
    "detect_mask",
    "build_fusion_image",
    "SamplingLine",
    "PenumbraStrip",
    "extract_boundary",
    "grow_sampling_line",
    "filter_outliers",
    "build_strip",
    "align_strip",
    "ScalePyramid",
    "build_pyramid",
    "roughness",
    "select_scales",
    "scatter_scales",
    "densify_and_remove",
    "CorrectionRegions",
    "derive_regions",
    "correct_colors",
    "blend_result",
    "DatasetCase",
    "ScoreRecord",
    "gt_quality",
    "error_ratio",
    "load_dataset",
    "attribute_report",
    "ParamVector",
    "ObjectiveSpec",
    "DEFAULT_PARAMS",
    "learn_params",
    "evaluate_objective",
    "RemovalResult",
    "remove_shadow",
]
