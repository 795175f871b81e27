import numpy as np
import pytest

from conftest import make_scene, simple_strokes, two_tone
from umbra.detect import Stroke, StrokeSet
from umbra.errors import InsufficientStrokesError
from umbra.evaluate import error_ratio
from umbra.pipeline import remove_shadow, strip_to_image


@pytest.fixture(scope="module")
def removal(small_scene):
    return remove_shadow(small_scene["shadow"], small_scene["strokes"])


def test_round_trip_recovers_clean_image(small_scene, removal):
    clean = small_scene["clean"].data
    region = small_scene["shadow_region"]
    rmse = float(np.sqrt(np.mean((removal.result.data[region] - clean[region]) ** 2)))
    assert rmse < 0.03
    rec = error_ratio(small_scene["clean"], small_scene["shadow"], removal.result)
    assert rec.ratio < 0.15


def test_lit_pixels_bit_identical(small_scene, removal):
    lit = removal.scale_field.data.min(axis=2) == 1.0
    assert lit.any()
    assert np.array_equal(removal.result.data[lit], small_scene["shadow"].data[lit])


def test_strip_shadow_end_darker(removal):
    for strip in removal.strips:
        first = strip.columns[0].mean()
        last = strip.columns[-1].mean()
        assert first < last


def test_dense_scale_continuity(removal):
    d = removal.scale_field.data
    mask = removal.mask.data
    h, w = mask.shape
    for dy, dx in ((0, 1), (1, 0)):
        a = d[: h - dy, : w - dx]
        b = d[dy:, dx:]
        both = mask[: h - dy, : w - dx] & mask[dy:, dx:]
        assert np.abs(a - b)[both].max() < 0.2


def test_scale_field_unit_outside_fill_region(removal):
    outside = removal.scale_field.data.min(axis=2) == 1.0
    # the mask core must carry non-trivial scales; far corners stay exactly 1
    assert outside[0, 0] and outside[-1, -1]
    assert not outside[removal.mask.data].all()


def test_no_color_correct_returns_relit(small_scene):
    out = remove_shadow(small_scene["shadow"], small_scene["strokes"], color_correct=False)
    assert not out.color_corrected
    assert np.array_equal(out.result.data, out.relit.data)


def test_pipeline_deterministic(small_scene, removal):
    again = remove_shadow(small_scene["shadow"], small_scene["strokes"])
    assert np.array_equal(again.result.data, removal.result.data)
    assert np.array_equal(again.scale_field.data, removal.scale_field.data)


def test_colored_shadow_round_trip():
    scene = make_scene(size=256, colored=True, seed=11)
    out = remove_shadow(scene["shadow"], scene["strokes"], color_correct=False)
    clean = scene["clean"].data
    region = scene["shadow_region"]
    rmse = float(np.sqrt(np.mean((out.relit.data[region] - clean[region]) ** 2)))
    assert rmse < 0.05


def test_missing_label_rejected(small_scene):
    only_shadow = StrokeSet([s for s in small_scene["strokes"].strokes if s.label == "shadow"])
    with pytest.raises(InsufficientStrokesError):
        remove_shadow(small_scene["shadow"], only_shadow)


def test_two_tone_removal_flattens_halves():
    img = two_tone(128, dark=0.3, lit=0.6)
    strokes = simple_strokes(128, dark_x=20, lit_x=108, radius=4)
    out = remove_shadow(img, strokes, color_correct=False)
    res = out.result.data
    # the dark half is lifted towards the lit level
    assert abs(res[64, 16:48].mean() - 0.6) < 0.08
    assert np.array_equal(res[:, 100:], img.data[:, 100:])


def test_strip_debug_export(removal):
    img = strip_to_image(removal.aligned_strips[0])
    assert img.channels == 3
    assert img.data.min() >= 0.0 and img.data.max() <= 1.0
