"""Command-line front end: remove, eval, gt-check, learn.

Exit codes: 0 success, 1 I/O failure, 2 validation or domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .detect import StrokeSet
from .errors import UmbraError
from .evaluate import (
    ALL_PIXELS,
    SHADOW_PIXELS,
    attribute_report,
    error_ratio,
    gt_quality,
    load_dataset_report,
    report_to_csv,
    report_to_text,
)
from .imgcore import load_image, save_gray16, save_image
from .paramlearn import DEFAULT_PARAMS, ObjectiveSpec, ParamVector, genetic_minimize, learn_params
from .pipeline import remove_shadow, strip_to_image

EXIT_OK = 0
EXIT_IO = 1
EXIT_DOMAIN = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umbra", description="Interactive shadow removal toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_remove = sub.add_parser("remove", help="remove a shadow from one image")
    p_remove.add_argument("--image", required=True)
    p_remove.add_argument("--strokes", required=True)
    p_remove.add_argument("--out", required=True)
    p_remove.add_argument("--params")
    p_remove.add_argument("--no-color-correct", action="store_true")
    p_remove.add_argument("--dump-intermediates", action="store_true")

    p_eval = sub.add_parser("eval", help="score removal results against ground truth")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--results-dir")
    p_eval.add_argument("--run-pipeline", action="store_true")
    p_eval.add_argument("--report", required=True)
    p_eval.add_argument("--params")
    p_eval.add_argument("--no-color-correct", action="store_true")

    p_gt = sub.add_parser("gt-check", help="gate ground-truth pairs by quality")
    p_gt.add_argument("--dataset", required=True)
    p_gt.add_argument("--threshold", type=float, default=0.05)

    p_learn = sub.add_parser("learn", help="learn pipeline parameters")
    p_learn.add_argument("--dataset", required=True)
    p_learn.add_argument("--budget", type=int, required=True)
    p_learn.add_argument("--seed", type=int, default=0)
    p_learn.add_argument("--out", required=True)
    p_learn.add_argument("--selftest", action="store_true",
                         help="run the optimizer against a built-in synthetic objective")
    return parser


def _load_params(path) -> ParamVector:
    if not path:
        return DEFAULT_PARAMS
    return ParamVector.from_json(Path(path).read_text())


def cmd_remove(args) -> int:
    image = load_image(args.image)
    strokes = StrokeSet.from_json(Path(args.strokes).read_text())
    params = _load_params(args.params)
    outcome = remove_shadow(image, strokes, params=params, color_correct=not args.no_color_correct)
    out = Path(args.out)
    save_image(outcome.result, out)
    if args.dump_intermediates:
        stem = out.with_suffix("")
        save_image(outcome.mask.to_image(), Path(f"{stem}.mask.png"))
        save_image(outcome.fusion.image, Path(f"{stem}.fusion.png"))
        if outcome.strips:
            save_image(strip_to_image(outcome.strips[0]), Path(f"{stem}.strip.png"))
            save_image(strip_to_image(outcome.aligned_strips[0]), Path(f"{stem}.strip_aligned.png"))
        save_gray16(outcome.sparse_scales.data.mean(axis=2), Path(f"{stem}.scales_sparse.png"))
        save_gray16(outcome.scale_field.data.mean(axis=2), Path(f"{stem}.scales.png"))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cases, skipped = load_dataset_report(args.dataset)
    for name, reason in skipped:
        print(f"skipped {name}: {reason}", file=sys.stderr)
    if not args.run_pipeline and not args.results_dir:
        print("eval needs --results-dir or --run-pipeline", file=sys.stderr)
        return EXIT_DOMAIN
    params = _load_params(args.params)
    entries = []
    per_case_lines = ["case,Er_all,Er_shadow,Eo_all,En_all"]
    for case in sorted(cases, key=lambda c: c.id):
        image = case.load_shadow()
        gt = case.load_groundtruth()
        if args.run_pipeline:
            if case.strokes_path is None:
                print(f"skipped {case.id}: no strokes for --run-pipeline", file=sys.stderr)
                continue
            strokes = StrokeSet.from_json(case.strokes_path.read_text())
            outcome = remove_shadow(image, strokes, params=params, color_correct=not args.no_color_correct)
            result = outcome.result
            mask = outcome.mask
        else:
            rpath = Path(args.results_dir) / f"{case.id}.png"
            if not rpath.is_file():
                print(f"skipped {case.id}: missing result {rpath}", file=sys.stderr)
                continue
            result = load_image(rpath)
            mask = _difference_mask(image, gt)
        rec_all = error_ratio(gt, image, result, scope=ALL_PIXELS)
        rec_shadow = error_ratio(gt, image, result, mask=mask, scope=SHADOW_PIXELS)
        entries.append((case, rec_all, rec_shadow))
        per_case_lines.append(
            f"{case.id},{rec_all.ratio:.6f},{rec_shadow.ratio:.6f},"
            f"{rec_all.original_error:.6f},{rec_all.new_error:.6f}"
        )
    if not entries:
        print("no case could be scored", file=sys.stderr)
        return EXIT_DOMAIN
    rows = attribute_report(entries)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report_to_csv(rows))
    cases_path = report_path.with_suffix(".cases.csv")
    cases_path.write_text("\n".join(per_case_lines) + "\n")
    print(report_to_text(rows))
    print(f"wrote {report_path} and {cases_path}")
    return EXIT_OK


def _difference_mask(shadow_img, gt_img):
    """Fallback shadow mask for scoring external results: pixels whose
    intensity clearly dropped in the shadow image."""
    from .detect import ShadowMask

    diff = gt_img.gray2d() - shadow_img.gray2d()
    return ShadowMask(diff > 0.05)


def cmd_gtcheck(args) -> int:
    cases, skipped = load_dataset_report(args.dataset)
    for name, reason in skipped:
        print(f"skipped {name}: {reason}", file=sys.stderr)
    scores = []
    for case in sorted(cases, key=lambda c: c.id):
        q = gt_quality(case.load_shadow(), case.load_groundtruth())
        scores.append(q)
        verdict = "REJECT" if q > args.threshold else "accept"
        print(f"{case.id}: Qd={q:.6f} {verdict}")
    finite = [s for s in scores if np.isfinite(s)]
    if finite:
        print(f"mean Qd over {len(finite)} cases: {float(np.mean(finite)):.6f}")
    return EXIT_OK


def _selftest_objective(x: np.ndarray) -> float:
    target = DEFAULT_PARAMS.to_array()
    lows = np.array([3, 3, 0.01, 0.005, 1.5, 0.01])
    highs = np.array([31, 31, 1.0, 0.5, 20.0, 1.0])
    z = (np.asarray(x) - target) / (highs - lows)
    return float(np.sum(z * z))


def cmd_learn(args) -> int:
    if args.budget < 1:
        print("invalid budget; need at least one generation", file=sys.stderr)
        return EXIT_DOMAIN
    out = Path(args.out)
    if args.selftest:
        best_x, best_f, history = genetic_minimize(
            _selftest_objective, generations=args.budget, seed=args.seed,
            on_generation=lambda g, f: print(f"generation {g}: best {f:.6f}"),
        )
        params = ParamVector.from_array(best_x)
    else:
        cases, skipped = load_dataset_report(args.dataset)
        for name, reason in skipped:
            print(f"skipped {name}: {reason}", file=sys.stderr)
        usable = [c for c in cases if c.strokes_path is not None]
        if not usable:
            print("no case provides strokes.json; cannot learn", file=sys.stderr)
            return EXIT_DOMAIN
        params = learn_params(
            usable,
            ObjectiveSpec.single_group(usable),
            budget=args.budget,
            seed=args.seed,
            on_generation=lambda g, f: print(f"generation {g}: best {f:.6f}"),
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(params.to_json())
    print(f"wrote {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"remove": cmd_remove, "eval": cmd_eval, "gt-check": cmd_gtcheck, "learn": cmd_learn}
    try:
        return handlers[args.command](args)
    except UmbraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, FileNotFoundError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
