"""Dataset ingestion, ground-truth quality gating, error-ratio scoring and
per-attribute reporting."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .errors import EmptyDatasetError, InvalidPairError, ShadowFreeCaseError
from .imgcore import RasterImage, as_bool_mask, load_image

ATTRIBUTES = ("texture", "softness", "brokenness", "colorfulness")
STRONG_DEGREE = 3
GT_QUALITY_THRESHOLD = 0.05

ALL_PIXELS = "all-pixels"
SHADOW_PIXELS = "shadow-pixels"


@dataclasses.dataclass
class DatasetCase:
    """One evaluation case: a shadow image, its shadow-free ground truth,
    optional strokes, and four 1..3 attribute degrees."""

    id: str
    shadow_path: Path
    groundtruth_path: Path
    strokes_path: Path | None = None
    labels: dict | None = None

    def load_shadow(self) -> RasterImage:
        return load_image(self.shadow_path)

    def load_groundtruth(self) -> RasterImage:
        return load_image(self.groundtruth_path)


@dataclasses.dataclass
class ScoreRecord:
    original_error: float   # RMSE of the untouched shadow image
    new_error: float        # RMSE of the removal result
    ratio: float            # new / original
    scope: str
    gt_quality: float | None = None


def gt_quality(shadow_img: RasterImage, gt_img: RasterImage) -> float:
    """Ground-truth defect score: mean plus standard deviation of the
    per-channel differences over lit pixels (gray ratio >= 1).

    Returns +inf when no pixel qualifies as lit.
    """
    if shadow_img.data.shape != gt_img.data.shape:
        raise InvalidPairError("shadow and ground-truth images differ in shape")
    delta = shadow_img.data - gt_img.data
    ratio = shadow_img.gray2d() / np.maximum(gt_img.gray2d(), 1e-6)
    lit = ratio >= 1.0
    if not lit.any():
        return float("inf")
    samples = delta[lit].ravel()
    return float(np.abs(samples).mean() + samples.std())


def _rmse(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return float(np.sqrt(np.mean(d * d)))


def error_ratio(
    gt_img: RasterImage,
    shadow_img: RasterImage,
    result_img: RasterImage,
    mask=None,
    scope: str = ALL_PIXELS,
) -> ScoreRecord:
    """RMSE ratio of result vs untouched shadow image, both against the
    ground truth, pooled across channels over the scoped pixel set."""
    if gt_img.data.shape != shadow_img.data.shape or gt_img.data.shape != result_img.data.shape:
        raise InvalidPairError("all three images must share dimensions")
    if scope == SHADOW_PIXELS:
        if mask is None:
            raise InvalidPairError("shadow-pixel scope needs a mask")
        mdata = as_bool_mask(mask)
        if not mdata.any():
            raise InvalidPairError("shadow-pixel scope needs a non-empty mask")
        sel = mdata
        gt, sh, res = gt_img.data[sel], shadow_img.data[sel], result_img.data[sel]
    elif scope == ALL_PIXELS:
        gt, sh, res = gt_img.data, shadow_img.data, result_img.data
    else:
        raise InvalidPairError(f"unknown scope {scope!r}")
    e_original = _rmse(sh, gt)
    if e_original == 0.0:
        raise ShadowFreeCaseError("baseline error is zero; ratio undefined")
    e_new = _rmse(res, gt)
    return ScoreRecord(
        original_error=e_original,
        new_error=e_new,
        ratio=e_new / e_original,
        scope=scope,
    )


def load_dataset(root) -> list:
    """One case per subdirectory holding shadow.png + noshadow.png, with
    optional strokes.json and labels.json. Malformed cases are skipped;
    use :func:`load_dataset_report` to also get the skip reasons."""
    cases, _ = load_dataset_report(root)
    return cases


def load_dataset_report(root):
    root = Path(root)
    if not root.is_dir():
        raise EmptyDatasetError(f"dataset root {root} does not exist")
    cases = []
    skipped = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        shadow = sub / "shadow.png"
        gt = sub / "noshadow.png"
        if not shadow.is_file() or not gt.is_file():
            skipped.append((sub.name, "missing shadow.png or noshadow.png"))
            continue
        strokes = sub / "strokes.json"
        labels_path = sub / "labels.json"
        labels = None
        if labels_path.is_file():
            try:
                labels = _parse_labels(labels_path.read_text())
            except ValueError as exc:
                skipped.append((sub.name, str(exc)))
                continue
        try:
            a = load_image(shadow)
            b = load_image(gt)
        except Exception as exc:  # unreadable image data
            skipped.append((sub.name, f"unreadable image: {exc}"))
            continue
        if a.data.shape[:2] != b.data.shape[:2]:
            skipped.append((sub.name, "shadow and ground truth differ in size"))
            continue
        cases.append(
            DatasetCase(
                id=sub.name,
                shadow_path=shadow,
                groundtruth_path=gt,
                strokes_path=strokes if strokes.is_file() else None,
                labels=labels,
            )
        )
    if not cases:
        raise EmptyDatasetError(f"no valid cases under {root}")
    return cases, skipped


def _parse_labels(text: str) -> dict:
    payload = json.loads(text)
    labels = {}
    for attr in ATTRIBUTES:
        if attr not in payload:
            raise ValueError(f"labels.json missing attribute {attr!r}")
        degree = int(payload[attr])
        if degree not in (1, 2, 3):
            raise ValueError(f"attribute {attr!r} degree must be 1..3, got {degree}")
        labels[attr] = degree
    return labels


@dataclasses.dataclass
class ReportRow:
    attribute: str
    degree: str
    n_cases: int
    mean_all: float | None
    std_all: float | None
    mean_shadow: float | None
    std_shadow: float | None


def attribute_report(entries: list) -> list:
    """Aggregate error ratios into attribute/degree cells.

    `entries` are (case, all-pixel record, shadow-pixel record) triples. A
    case enters an attribute's cell only when none of its other attributes
    is strong (degree 3); 'other' collects cases without any strong
    attribute, 'mean' covers every labeled case.
    """
    if not entries:
        raise EmptyDatasetError("no scores to report")
    labeled = [e for e in entries if e[0].labels is not None]
    rows = []

    def cell(name, degree_text, selected):
        alls = [rec_all.ratio for _, rec_all, _ in selected]
        shadows = [rec_sh.ratio for _, _, rec_sh in selected]
        if alls:
            rows.append(
                ReportRow(
                    attribute=name,
                    degree=degree_text,
                    n_cases=len(alls),
                    mean_all=float(np.mean(alls)),
                    std_all=float(np.std(alls)),
                    mean_shadow=float(np.mean(shadows)),
                    std_shadow=float(np.std(shadows)),
                )
            )
        else:
            rows.append(ReportRow(name, degree_text, 0, None, None, None, None))

    for attr in ATTRIBUTES:
        for degree in (1, 2, 3):
            selected = [
                e
                for e in labeled
                if e[0].labels[attr] == degree
                and all(e[0].labels[other] != STRONG_DEGREE for other in ATTRIBUTES if other != attr)
            ]
            cell(attr, str(degree), selected)
    cell(
        "other",
        "",
        [e for e in labeled if all(d != STRONG_DEGREE for d in e[0].labels.values())],
    )
    cell("mean", "", labeled if labeled else entries)
    return rows


def report_to_csv(rows: list) -> str:
    lines = ["attribute,degree,n_cases,mean_Er_all,std_Er_all,mean_Er_shadow,std_Er_shadow"]
    for r in rows:
        def fmt(v):
            return "n/a" if v is None else f"{v:.6f}"

        lines.append(
            f"{r.attribute},{r.degree},{r.n_cases},{fmt(r.mean_all)},{fmt(r.std_all)},"
            f"{fmt(r.mean_shadow)},{fmt(r.std_shadow)}"
        )
    return "\n".join(lines) + "\n"


def report_to_text(rows: list) -> str:
    header = f"{'attribute':<14}{'degree':<8}{'cases':<7}{'Er(all)':<18}{'Er(shadow)':<18}"
    out = [header, "-" * len(header)]
    for r in rows:
        if r.mean_all is None:
            all_txt = shadow_txt = "n/a"
        else:
            all_txt = f"{r.mean_all:.4f} ({r.std_all:.4f})"
            shadow_txt = f"{r.mean_shadow:.4f} ({r.std_shadow:.4f})"
        out.append(f"{r.attribute:<14}{r.degree:<8}{r.n_cases:<7}{all_txt:<18}{shadow_txt:<18}")
    return "\n".join(out) + "\n"
