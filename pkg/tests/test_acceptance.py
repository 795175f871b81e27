"""Acceptance suite: one test per release criterion, each printing a
pass/fail line. Run with `pytest tests/test_acceptance.py -s` to stream the
lines; the assertions carry the same tolerances."""

import io
import json
import time

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from conftest import make_scene, simple_strokes, two_tone
from test_detect import eq3_direct, knn_oracle
from test_penumbra import dbscan_oracle, mean_shift_oracle, _sigmoid
from umbra.cli import main
from umbra.detect import _simplex_grid, build_fusion_image, detect_mask, knn_posterior
from umbra.evaluate import GT_QUALITY_THRESHOLD, error_ratio, gt_quality
from umbra.imgcore import RasterImage, color_convert, save_image
from umbra.paramlearn import BOUNDS, DEFAULT_PARAMS, ParamVector, genetic_minimize
from umbra.penumbra import align_params, dbscan, mean_shift, unwarp_column, warp_column
from umbra.pipeline import remove_shadow
from umbra.relight import build_pyramid, roughness


def report(criterion, ok, detail):
    line = f"[acceptance {criterion}] {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. synthetic round trip (gray and colored scale fields), single-threaded


def _round_trip(colored):
    scene = make_scene(size=512, colored=colored, seed=7)
    start = time.monotonic()
    with threadpool_limits(limits=1):
        outcome = remove_shadow(scene["shadow"], scene["strokes"])
    elapsed = time.monotonic() - start
    clean = scene["clean"].data
    region = scene["shadow_region"]
    rmse = float(np.sqrt(np.mean((outcome.result.data[region] - clean[region]) ** 2)))
    ratio = error_ratio(scene["clean"], scene["shadow"], outcome.result).ratio
    return scene, outcome, rmse, ratio, elapsed


@pytest.fixture(scope="module")
def gray_run():
    return _round_trip(colored=False)


@pytest.fixture(scope="module")
def colored_run():
    return _round_trip(colored=True)


def test_criterion_1_round_trip_gray(gray_run):
    _, _, rmse, ratio, elapsed = gray_run
    ok = rmse < 0.03 and ratio < 0.15 and elapsed < 60.0
    report(1, ok, f"gray 512: shadow RMSE {rmse:.4f} (<0.03), Er {ratio:.4f} (<0.15), {elapsed:.1f}s (<60s)")


def test_criterion_1_round_trip_colored(colored_run):
    _, _, rmse, _, elapsed = colored_run
    ok = rmse < 0.05 and elapsed < 60.0
    report(1, ok, f"colored 512: shadow RMSE {rmse:.4f} (<0.05), {elapsed:.1f}s (<60s)")


# ---------------------------------------------------------------------------
# 2. illumination preservation


def test_criterion_2_lit_pixels_bit_identical(gray_run, colored_run):
    checks = []
    for scene, outcome, _, _, _ in (gray_run, colored_run):
        lit = outcome.scale_field.data.min(axis=2) == 1.0
        checks.append(lit.any() and np.array_equal(outcome.result.data[lit], scene["shadow"].data[lit]))
    img = two_tone(128, dark=0.3, lit=0.6)
    outcome = remove_shadow(img, simple_strokes(128, dark_x=20, lit_x=108, radius=4), color_correct=False)
    lit = outcome.scale_field.data.min(axis=2) == 1.0
    checks.append(lit.any() and np.array_equal(outcome.result.data[lit], img.data[lit]))
    report(2, all(checks), f"lit area bit-identical on {len(checks)} fixtures")


# ---------------------------------------------------------------------------
# 3. metric exactness


def test_criterion_3_metric_exactness():
    rng = np.random.default_rng(5)
    gt = RasterImage(rng.uniform(0.2, 0.9, size=(16, 16, 3)))
    shadow = RasterImage(np.clip(gt.data * 0.55, 0, 1))
    perfect = error_ratio(gt, shadow, gt).ratio
    noop = error_ratio(gt, shadow, shadow).ratio

    g1 = RasterImage.from_array(np.ones((2, 2)))
    s1 = RasterImage.from_array(np.array([[0.5, 1.0], [1.0, 1.0]]))
    r1 = RasterImage.from_array(np.array([[0.75, 1.0], [1.0, 1.0]]))
    hand = error_ratio(g1, s1, r1).ratio

    base = RasterImage(rng.uniform(0.1, 0.7, size=(12, 12, 3)))
    offset = RasterImage(base.data + 0.1)
    qd_self = gt_quality(base, base)
    qd_off = gt_quality(offset, base)

    ok = (
        perfect == 0.0
        and noop == 1.0
        and abs(hand - 0.5) <= 1e-12
        and qd_self == 0.0
        and abs(qd_off - 0.1) <= 1e-9
        and (0.06 > GT_QUALITY_THRESHOLD)
        and not (0.04 > GT_QUALITY_THRESHOLD)
    )
    report(3, ok, f"Er(gt)={perfect}, Er(noop)={noop}, hand case {hand}, Qd(I,I)={qd_self}, Qd(I+0.1,I)={qd_off:.10f}, gate at 0.05")


# ---------------------------------------------------------------------------
# 4. oracle equivalences


def test_criterion_4_knn_equals_brute_force():
    rng = np.random.default_rng(2)
    fixtures = [two_tone(64), RasterImage(rng.uniform(0.05, 0.95, size=(48, 64, 3)))]
    strokes = [simple_strokes(64), simple_strokes(48, dark_x=6, lit_x=40, radius=3)]
    ok = True
    for img, st in zip(fixtures, strokes):
        shadow_px, lit_px = st.rasterize(img.width, img.height)
        feats = color_convert(img, "logrgb").data
        mine = knn_posterior(feats, feats[shadow_px], feats[lit_px])
        oracle = knn_oracle(feats, feats[shadow_px], feats[lit_px])
        ok &= np.array_equal(mine, oracle)
    report(4, ok, "KNN posterior equals brute force on <=64x64 fixtures (exact)")


def test_criterion_4_clustering_equals_brute_force():
    rng = np.random.default_rng(3)
    pts = np.concatenate([
        rng.normal(0.0, 0.04, size=(14, 3)),
        rng.normal(2.0, 0.04, size=(11, 3)),
        np.array([[9.0, -9.0, 4.0], [-7.0, 8.0, 1.0]]),
    ])
    ok = np.array_equal(dbscan(pts, eps=0.4, min_pts=3), dbscan_oracle(pts, eps=0.4, min_pts=3))
    ms_pts = np.concatenate([rng.normal(0.0, 0.02, size=(16, 3)), rng.normal(1.0, 0.02, size=(9, 3))])
    ok &= np.array_equal(mean_shift(ms_pts, bandwidth=0.3), mean_shift_oracle(ms_pts, bandwidth=0.3))
    report(4, ok, "DBSCAN and mean-shift match brute-force oracles on <=30-point sets (exact)")


def test_criterion_4_roughness_matches_finite_differences():
    rng = np.random.default_rng(4)
    columns = rng.normal(-0.5, 0.25, size=(12, 8, 3))
    from test_penumbra import make_line
    from umbra.penumbra import PenumbraStrip

    strip = PenumbraStrip(
        columns=columns,
        lines=[make_line([0.0] * 3, [1.0] * 3, length=12) for _ in range(8)],
        stretches=np.zeros(8),
        shifts=np.zeros(8),
        aligned=True,
    )
    pyr = build_pyramid(strip)
    scores = roughness(pyr)
    worst = 0.0
    for li, layer in enumerate(pyr.layers):
        for j in range(8):
            manual = 0.0
            for c in range(3):
                for r in range(1, 11):
                    second = layer[r + 1, j, c] - 2 * layer[r, j, c] + layer[r - 1, j, c]
                    manual += second * second
            worst = max(worst, abs(manual - scores[j, li]))
    report(4, worst <= 1e-9, f"roughness vs finite differences: max |diff| {worst:.2e} (<=1e-9)")


def test_criterion_4_fusion_beats_grid(gray_run):
    scene, _, _, _, _ = gray_run
    small = make_scene(size=128, colored=False, seed=9)
    result = build_fusion_image(small["shadow"], small["strokes"], h2=3)
    shadow_px, lit_px = small["strokes"].rasterize(128, 128)
    ycbcr = color_convert(small["shadow"], "ycbcr").data
    e_opt = eq3_direct(ycbcr, shadow_px, lit_px, result.factors)
    worst = min(eq3_direct(ycbcr, shadow_px, lit_px, cand) for cand in _simplex_grid(100))
    ok = e_opt <= worst + 1e-9
    report(4, ok, f"fusion factors beat every 0.01-grid candidate: E(opt) {e_opt:.6f} <= best grid {worst:.6f}")


# ---------------------------------------------------------------------------
# 5. alignment recovery and round trip


def test_criterion_5_alignment_recovery():
    n = 41
    m = (n - 1) / 2.0
    bound = n / 4.0
    worst = 0.0
    for planted_s, planted_k in ((3.0, 0.0), (0.0, -4.0), (-2.5, 2.0), (4.0, 4.0)):
        assert abs(planted_s) <= n / 8 and abs(planted_k) <= n / 8
        ref = _sigmoid(np.arange(n), n)
        inv_pos = m + (np.arange(n) - m + planted_k) * ((m + planted_s) / m)
        col = _sigmoid(inv_pos, n)
        stretch, shift, _ = align_params(col, ref, bound)
        worst = max(worst, abs(stretch - planted_s), abs(shift - planted_k))
    ok_recovery = worst <= 0.5

    col3 = _sigmoid(np.arange(n), n)[:, None].repeat(3, axis=1)
    back = unwarp_column(warp_column(col3, 0.0, 3.0), 0.0, 3.0, n)
    interior = slice(5, n - 5)
    err_int = np.abs(back[interior] - col3[interior]).max()
    lin = np.linspace(0.1, 0.9, n)[:, None].repeat(3, axis=1)
    back_lin = unwarp_column(warp_column(lin, 2.5, -1.75), 2.5, -1.75, n)
    err_lin = np.abs(back_lin[slice(8, n - 8)] - lin[slice(8, n - 8)]).max()
    ok_round = err_int <= 1e-6 and err_lin <= 1e-6
    report(5, ok_recovery and ok_round, f"recovery worst {worst:.3f} (<=0.5); round trip errors {err_int:.2e}, {err_lin:.2e} (<=1e-6)")


# ---------------------------------------------------------------------------
# 6. parameter learning


def test_criterion_6_ga_and_defaults():
    lows = np.array([b[0] for b in BOUNDS], dtype=float)
    highs = np.array([b[1] for b in BOUNDS], dtype=float)
    ranges = highs - lows
    target = DEFAULT_PARAMS.to_array()

    def planted(x):
        z = (np.asarray(x) - target) / ranges
        return float(np.sum(z * z))

    best_x, _, history = genetic_minimize(planted, generations=50, seed=0)
    err = np.abs(best_x - target) / ranges
    ok = bool(np.all(err <= 0.05)) and len(history) == 51
    ok &= DEFAULT_PARAMS == ParamVector(14, 10, 0.1124, 0.0333, 8.5195, 0.2228)
    report(6, ok, f"GA planted-optimum worst gene error {err.max():.4f} of range (<=0.05); defaults = (14, 10, 0.1124, 0.0333, 8.5195, 0.2228)")


# ---------------------------------------------------------------------------
# 7. determinism across CLI and service


def test_criterion_7_cli_service_determinism(tmp_path):
    from fastapi.testclient import TestClient

    from umbra.service import create_app

    scene = make_scene(size=192, colored=False, seed=7)
    save_image(scene["shadow"], tmp_path / "shadow.png")
    (tmp_path / "strokes.json").write_text(scene["strokes"].to_json())
    out_a = tmp_path / "a.png"
    out_b = tmp_path / "b.png"
    for out in (out_a, out_b):
        assert main([
            "remove", "--image", str(tmp_path / "shadow.png"),
            "--strokes", str(tmp_path / "strokes.json"), "--out", str(out),
        ]) == 0
    cli_deterministic = out_a.read_bytes() == out_b.read_bytes()

    app = create_app()
    with TestClient(app) as client:
        png = (tmp_path / "shadow.png").read_bytes()
        sid = client.post("/sessions", files={"image": ("s.png", png, "image/png")}).json()["id"]
        client.post(f"/sessions/{sid}/strokes", content=(tmp_path / "strokes.json").read_text())
        client.post(f"/sessions/{sid}/removal", content=json.dumps({}))
        service_bytes = client.get(f"/sessions/{sid}/artifacts/result").content
    ok = cli_deterministic and service_bytes == out_a.read_bytes()
    report(7, ok, "identical inputs give byte-identical CLI and service results")


# ---------------------------------------------------------------------------
# 8. robustness to stroke placement


def test_criterion_8_stroke_placement_stability():
    rng = np.random.default_rng(6)
    img = two_tone(64)
    masks = []
    for _ in range(10):
        dark_x = int(rng.integers(4, 28))
        lit_x = int(rng.integers(36, 60))
        masks.append(detect_mask(img, simple_strokes(64, dark_x=dark_x, lit_x=lit_x), 14).data)
    identical = all(np.array_equal(m, masks[0]) for m in masks[1:])
    expected = np.zeros((64, 64), dtype=bool)
    expected[:, :32] = True
    ok = identical and np.array_equal(masks[0], expected)
    report(8, ok, "10 randomized stroke placements yield the identical (exact) mask")
