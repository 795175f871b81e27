import json

import numpy as np
import pytest

from umbra.errors import EmptyDatasetError, InvalidPairError, ShadowFreeCaseError
from umbra.evaluate import (
    ALL_PIXELS,
    GT_QUALITY_THRESHOLD,
    SHADOW_PIXELS,
    DatasetCase,
    ScoreRecord,
    attribute_report,
    error_ratio,
    gt_quality,
    load_dataset,
    load_dataset_report,
    report_to_csv,
    report_to_text,
)
from umbra.imgcore import RasterImage, save_image


def img_of(arr):
    return RasterImage.from_array(np.asarray(arr, dtype=np.float64))


# ---------------------------------------------------------------------------
# ground-truth quality


def test_gt_quality_identical_is_zero():
    rng = np.random.default_rng(0)
    img = RasterImage(rng.uniform(0, 1, size=(12, 12, 3)))
    assert gt_quality(img, img) == 0.0


def test_gt_quality_uniform_offset():
    rng = np.random.default_rng(1)
    base = rng.uniform(0.1, 0.7, size=(10, 10, 3))
    gt = RasterImage(base)
    shadowed = RasterImage(base + 0.1)
    assert gt_quality(shadowed, gt) == pytest.approx(0.1, abs=1e-9)


def test_gt_quality_rejection_threshold():
    # the gate removes pairs scoring above 0.05
    assert 0.06 > GT_QUALITY_THRESHOLD
    assert not 0.04 > GT_QUALITY_THRESHOLD


def test_gt_quality_dimension_mismatch():
    with pytest.raises(InvalidPairError):
        gt_quality(img_of(np.zeros((4, 4, 3))), img_of(np.zeros((5, 5, 3))))


def test_gt_quality_no_lit_pixels_is_inf():
    gt = RasterImage(np.full((6, 6, 3), 0.8))
    dark = RasterImage(np.full((6, 6, 3), 0.2))
    assert gt_quality(dark, gt) == float("inf")


# ---------------------------------------------------------------------------
# error ratio


def test_error_ratio_perfect_removal_is_zero():
    rng = np.random.default_rng(2)
    gt = RasterImage(rng.uniform(0, 1, size=(8, 8, 3)))
    shadow = RasterImage(np.clip(gt.data * 0.5, 0, 1))
    rec = error_ratio(gt, shadow, gt)
    assert rec.ratio == 0.0
    assert rec.new_error == 0.0


def test_error_ratio_noop_removal_is_one():
    rng = np.random.default_rng(3)
    gt = RasterImage(rng.uniform(0.2, 1, size=(8, 8, 3)))
    shadow = RasterImage(np.clip(gt.data * 0.6, 0, 1))
    rec = error_ratio(gt, shadow, shadow)
    assert rec.ratio == 1.0


def test_error_ratio_hand_case():
    gt = img_of(np.ones((2, 2)))
    shadow = img_of(np.array([[0.5, 1.0], [1.0, 1.0]]))
    result = img_of(np.array([[0.75, 1.0], [1.0, 1.0]]))
    rec = error_ratio(gt, shadow, result, scope=ALL_PIXELS)
    assert rec.original_error == pytest.approx(0.25, abs=1e-12)
    assert rec.new_error == pytest.approx(0.125, abs=1e-12)
    assert rec.ratio == pytest.approx(0.5, abs=1e-12)


def test_error_ratio_zero_baseline_raises():
    gt = img_of(np.full((4, 4), 0.5))
    with pytest.raises(ShadowFreeCaseError):
        error_ratio(gt, gt, gt)


def test_error_ratio_shadow_scope():
    gt = img_of(np.ones((4, 4)))
    shadow_data = np.ones((4, 4))
    shadow_data[0, 0] = 0.5
    shadow = img_of(shadow_data)
    result_data = np.ones((4, 4))
    result_data[0, 0] = 0.9
    result = img_of(result_data)
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, 0] = True
    all_rec = error_ratio(gt, shadow, result, scope=ALL_PIXELS)
    shadow_rec = error_ratio(gt, shadow, result, mask=mask, scope=SHADOW_PIXELS)
    # the shadow-scope baseline cannot be lower than the all-pixel baseline
    assert shadow_rec.original_error >= all_rec.original_error
    assert shadow_rec.original_error == pytest.approx(0.5, abs=1e-12)


def test_error_ratio_scale_invariance():
    rng = np.random.default_rng(4)
    gt_arr = rng.uniform(0.3, 0.9, size=(8, 8, 3))
    sh_arr = gt_arr * rng.uniform(0.5, 1.0, size=(8, 8, 3))
    res_arr = gt_arr * rng.uniform(0.8, 1.0, size=(8, 8, 3))
    base = error_ratio(img_of(gt_arr), img_of(sh_arr), img_of(res_arr)).ratio
    k = 0.5
    scaled = error_ratio(img_of(gt_arr * k), img_of(sh_arr * k), img_of(res_arr * k)).ratio
    assert scaled == pytest.approx(base, abs=1e-12)


def test_error_ratio_shape_mismatch():
    with pytest.raises(InvalidPairError):
        error_ratio(img_of(np.zeros((4, 4))), img_of(np.zeros((4, 4))), img_of(np.zeros((5, 5))))


# ---------------------------------------------------------------------------
# dataset loading


def write_case(root, name, with_strokes=False, labels=None, drop_gt=False, size=8):
    case = root / name
    case.mkdir(parents=True)
    rng = np.random.default_rng(sum(map(ord, name)))
    gt = RasterImage(rng.uniform(0.3, 0.9, size=(size, size, 3)))
    shadow = RasterImage(np.clip(gt.data * 0.6, 0, 1))
    save_image(shadow, case / "shadow.png")
    if not drop_gt:
        save_image(gt, case / "noshadow.png")
    if with_strokes:
        (case / "strokes.json").write_text(
            json.dumps({"strokes": [{"label": "shadow", "radius": 2, "points": [[2, 2]]}]})
        )
    if labels is not None:
        (case / "labels.json").write_text(json.dumps(labels))
    return case


def test_load_dataset_counts(tmp_path):
    for i in range(3):
        write_case(tmp_path, f"case{i}")
    cases = load_dataset(tmp_path)
    assert [c.id for c in cases] == ["case0", "case1", "case2"]


def test_load_dataset_skips_incomplete(tmp_path):
    write_case(tmp_path, "good")
    write_case(tmp_path, "broken", drop_gt=True)
    cases, skipped = load_dataset_report(tmp_path)
    assert len(cases) == 1
    assert skipped and skipped[0][0] == "broken"


def test_load_dataset_rejects_bad_labels(tmp_path):
    write_case(tmp_path, "good", labels={"texture": 1, "softness": 1, "brokenness": 1, "colorfulness": 1})
    write_case(tmp_path, "bad", labels={"texture": 4, "softness": 1, "brokenness": 1, "colorfulness": 1})
    cases, skipped = load_dataset_report(tmp_path)
    assert [c.id for c in cases] == ["good"]
    assert skipped[0][0] == "bad"


def test_load_dataset_empty_raises(tmp_path):
    (tmp_path / "notacase").mkdir()
    with pytest.raises(EmptyDatasetError):
        load_dataset(tmp_path)


def test_strokes_path_detected(tmp_path):
    write_case(tmp_path, "withstrokes", with_strokes=True)
    cases = load_dataset(tmp_path)
    assert cases[0].strokes_path is not None


# ---------------------------------------------------------------------------
# attribute report


def fake_case(name, labels):
    return DatasetCase(id=name, shadow_path=None, groundtruth_path=None, labels=labels)


def rec(ratio, scope=ALL_PIXELS):
    return ScoreRecord(original_error=0.2, new_error=0.2 * ratio, ratio=ratio, scope=scope)


def test_report_single_weak_case_everywhere():
    case = fake_case("a", {"texture": 1, "softness": 1, "brokenness": 1, "colorfulness": 1})
    rows = attribute_report([(case, rec(0.4), rec(0.3, SHADOW_PIXELS))])
    populated = {(r.attribute, r.degree) for r in rows if r.n_cases == 1}
    for attr in ("texture", "softness", "brokenness", "colorfulness"):
        assert (attr, "1") in populated
    assert ("other", "") in populated
    assert ("mean", "") in populated


def test_report_strong_attributes_exclude_each_other():
    case = fake_case("b", {"texture": 3, "softness": 3, "brokenness": 1, "colorfulness": 1})
    rows = attribute_report([(case, rec(0.6), rec(0.5, SHADOW_PIXELS))])
    by_cell = {(r.attribute, r.degree): r.n_cases for r in rows}
    assert by_cell[("texture", "3")] == 0  # softness is strong, so excluded
    assert by_cell[("softness", "3")] == 0
    assert by_cell[("brokenness", "1")] == 0
    assert by_cell[("other", "")] == 0
    assert by_cell[("mean", "")] == 1


def test_report_identical_scores_zero_std():
    cases = [
        fake_case(f"c{i}", {"texture": 2, "softness": 1, "brokenness": 1, "colorfulness": 1})
        for i in range(4)
    ]
    rows = attribute_report([(c, rec(0.5), rec(0.4, SHADOW_PIXELS)) for c in cases])
    tex = next(r for r in rows if r.attribute == "texture" and r.degree == "2")
    assert tex.n_cases == 4
    assert tex.std_all == 0.0
    assert tex.mean_all == pytest.approx(0.5)


def test_report_rendering():
    case = fake_case("a", {"texture": 1, "softness": 1, "brokenness": 1, "colorfulness": 1})
    rows = attribute_report([(case, rec(0.4), rec(0.3, SHADOW_PIXELS))])
    csv = report_to_csv(rows)
    assert csv.splitlines()[0] == "attribute,degree,n_cases,mean_Er_all,std_Er_all,mean_Er_shadow,std_Er_shadow"
    assert "n/a" in csv  # empty cells render as n/a
    text = report_to_text(rows)
    assert "texture" in text and "mean" in text


def test_report_requires_entries():
    with pytest.raises(EmptyDatasetError):
        attribute_report([])
