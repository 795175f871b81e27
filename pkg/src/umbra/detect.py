"""Scribble-driven shadow detection and fusion-image construction.

Two rough stroke sets (shadow / lit) are rasterized into training pixels.
A K=3 nearest-neighbor vote on log-intensity features yields a per-pixel
shadow posterior which is smoothed and thresholded into a binary mask.
The fusion image is a contrast-maximizing linear mix of the YCbCr channels
with texture suppressed by a median filter.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np
from scipy import ndimage

from .errors import (
    ConflictingStrokesError,
    DegenerateFusionError,
    InsufficientStrokesError,
    InvalidInputError,
    NoShadowError,
)
from .imgcore import RasterImage, color_convert, odd_size, spatial_filter

SHADOW = "shadow"
LIT = "lit"

# connected shadow blobs below this fraction of the image area are speckle
MIN_COMPONENT_FRACTION = 0.0005


@dataclasses.dataclass
class Stroke:
    """One scribble: a polyline with a disk footprint of `radius` pixels."""

    label: str
    points: list
    radius: int = 6

    def __post_init__(self):
        if self.label not in (SHADOW, LIT):
            raise InvalidInputError(f"stroke label must be 'shadow' or 'lit', got {self.label!r}")
        if self.radius < 1:
            raise InvalidInputError("stroke radius must be >= 1")
        if len(self.points) < 1:
            raise InvalidInputError("stroke needs at least one point")


@dataclasses.dataclass
class StrokeSet:
    """User scribbles; the only supervision the detector sees."""

    strokes: list

    @classmethod
    def from_json(cls, text: str) -> "StrokeSet":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"stroke JSON is malformed: {exc}") from exc
        if not isinstance(payload, dict) or "strokes" not in payload:
            raise InvalidInputError("stroke JSON must be an object with a 'strokes' list")
        strokes = []
        for item in payload["strokes"]:
            strokes.append(
                Stroke(
                    label=item.get("label", ""),
                    points=[(float(p[0]), float(p[1])) for p in item.get("points", [])],
                    radius=int(item.get("radius", 6)),
                )
            )
        return cls(strokes)

    def to_json(self) -> str:
        return json.dumps(
            {
                "strokes": [
                    {
                        "label": s.label,
                        "radius": s.radius,
                        "points": [[float(x), float(y)] for x, y in s.points],
                    }
                    for s in self.strokes
                ]
            }
        )

    def merged_with(self, other: "StrokeSet") -> "StrokeSet":
        return StrokeSet(list(self.strokes) + list(other.strokes))

    def labels_present(self) -> set:
        return {s.label for s in self.strokes}

    def rasterize(self, width: int, height: int):
        """Rasterize into disjoint boolean pixel sets (shadow, lit).

        Raises if points fall outside the image or the two label sets
        overlap anywhere.
        """
        shadow = np.zeros((height, width), dtype=bool)
        lit = np.zeros((height, width), dtype=bool)
        for s in self.strokes:
            for x, y in s.points:
                if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                    raise InvalidInputError(f"stroke point ({x}, {y}) outside image bounds")
            target = shadow if s.label == SHADOW else lit
            _paint_polyline(target, s.points, s.radius)
        overlap = shadow & lit
        if overlap.any():
            ys, xs = np.nonzero(overlap)
            pixels = [(int(x), int(y)) for x, y in zip(xs[:100], ys[:100])]
            raise ConflictingStrokesError(
                f"shadow and lit strokes overlap on {int(overlap.sum())} pixels", pixels
            )
        return shadow, lit


def _paint_polyline(mask: np.ndarray, points, radius: int) -> None:
    h, w = mask.shape
    pts = [points[0]] if len(points) == 1 else []
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        seg = max(abs(x1 - x0), abs(y1 - y0))
        steps = max(int(np.ceil(seg * 2)), 1)
        for t in np.linspace(0.0, 1.0, steps + 1):
            pts.append((x0 + (x1 - x0) * t, y0 + (y1 - y0) * t))
    r = int(radius)
    for cx, cy in pts:
        x_lo, x_hi = int(np.floor(cx - r)), int(np.ceil(cx + r))
        y_lo, y_hi = int(np.floor(cy - r)), int(np.ceil(cy + r))
        x_lo, x_hi = max(x_lo, 0), min(x_hi, w - 1)
        y_lo, y_hi = max(y_lo, 0), min(y_hi, h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        yy, xx = np.mgrid[y_lo : y_hi + 1, x_lo : x_hi + 1]
        disk = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        mask[y_lo : y_hi + 1, x_lo : x_hi + 1] |= disk


@dataclasses.dataclass(frozen=True)
class ShadowMask:
    """Binary shadow mask; True marks shadow pixels."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != bool:
            raise InvalidInputError("mask must be a 2-D boolean array")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def pixel_count(self) -> int:
        return int(self.data.sum())

    def to_image(self) -> RasterImage:
        return RasterImage.from_array(self.data.astype(np.float64))


@dataclasses.dataclass(frozen=True)
class FusionResult:
    """Single-channel fusion image plus the channel mixing factors."""

    image: RasterImage
    factors: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=np.float64)
        if f.shape != (3,) or (f < 0).any() or abs(f.sum() - 1.0) > 1e-9:
            raise InvalidInputError("fusion factors must be non-negative and sum to 1")


def knn_posterior(features: np.ndarray, shadow_feats: np.ndarray, lit_feats: np.ndarray, k: int = 3) -> np.ndarray:
    """Fraction of shadow points among the k nearest training pixels.

    Exact squared-Euclidean search over all training pixels; equal distances
    are resolved in favor of lower training index. Shadow pixels precede lit
    pixels, so among equal distances shadow points always fill the remaining
    slots first; this lets duplicate feature values collapse to weighted
    uniques (a large win on quantized images) without changing the result.
    """
    h, w, c = features.shape
    if shadow_feats.shape[0] + lit_feats.shape[0] < k:
        raise InsufficientStrokesError("fewer training pixels than neighbors requested")

    raw = np.concatenate([shadow_feats, lit_feats], axis=0)
    uniq, inv = np.unique(raw, axis=0, return_inverse=True)
    w_shadow = np.bincount(inv[: shadow_feats.shape[0]], minlength=uniq.shape[0]).astype(np.float64)
    w_total = np.bincount(inv, minlength=uniq.shape[0]).astype(np.float64)

    flat = features.reshape(-1, c)
    q_uniq, q_inv = np.unique(flat, axis=0, return_inverse=True)

    post_u = np.empty(q_uniq.shape[0])
    if uniq.shape[0] <= 64 or q_uniq.shape[0] * uniq.shape[0] <= 4_000_000:
        _knn_exact_rows(q_uniq, uniq, w_total, w_shadow, k, post_u, np.arange(q_uniq.shape[0]))
    else:
        _knn_tree_rows(q_uniq, uniq, w_total, w_shadow, k, post_u)
    return post_u[q_inv].reshape(h, w)


def _direct_distances(x, uniq):
    # elementwise (x - t)^2 sums: deterministic regardless of batch shape,
    # so equal inputs always produce bit-equal distances
    d = np.zeros((x.shape[0], uniq.shape[0]))
    for ch in range(x.shape[1]):
        diff = x[:, ch : ch + 1] - uniq[None, :, ch]
        d += diff * diff
    return d


def _knn_exact_rows(queries, uniq, w_total, w_shadow, k, out, rows_idx):
    """Dense exact path over weighted unique train features."""
    m = min(k, uniq.shape[0])  # each unique carries weight >= 1
    chunk = max(1, int(4_000_000 // max(uniq.shape[0], 1)))
    for start in range(0, rows_idx.shape[0], chunk):
        sel = rows_idx[start : start + chunk]
        x = queries[sel]
        d = _direct_distances(x, uniq)
        n = x.shape[0]
        small = np.partition(d, m - 1, axis=1)[:, :m]
        small.sort(axis=1)
        # cumulative (total, shadow) weights at each candidate threshold
        w_le = np.empty((n, m))
        s_le = np.empty((n, m))
        for j in range(m):
            le = d <= small[:, j : j + 1]
            w_le[:, j] = le @ w_total
            s_le[:, j] = le @ w_shadow
        # first candidate whose cumulative weight reaches k
        j_star = np.argmax(w_le >= k, axis=1)
        rows = np.arange(n)
        w_below = np.where(j_star > 0, w_le[rows, np.maximum(j_star - 1, 0)], 0.0)
        s_below = np.where(j_star > 0, s_le[rows, np.maximum(j_star - 1, 0)], 0.0)
        s_at = s_le[rows, j_star] - s_below
        taken = np.minimum(k - w_below, s_at)
        out[sel] = (s_below + taken) / float(k)


def _knn_tree_rows(queries, uniq, w_total, w_shadow, k, out):
    """KD-tree path: rows whose k-weight boundary is strictly separated from
    its neighbors are resolved from the tree; rows with distance ties (where
    float formulas could disagree) fall back to the dense exact path.

    Only used with more than k unique train features, so querying k+1
    neighbors always brackets the boundary group.
    """
    from scipy.spatial import cKDTree

    kq = k + 1
    tree = cKDTree(uniq)
    dist, idx = tree.query(queries, k=kq)
    cw = np.cumsum(w_total[idx], axis=1)
    cs = np.cumsum(w_shadow[idx], axis=1)
    # each unique weighs >= 1, so the boundary index satisfies j* <= k-1
    j_star = np.argmax(cw >= k, axis=1)
    rows = np.arange(queries.shape[0])
    gaps = np.diff(dist, axis=1) > np.maximum(dist[:, :-1] * 1e-9, 1e-15)
    safe = gaps[rows, j_star]
    safe &= (j_star == 0) | gaps[rows, np.maximum(j_star - 1, 0)]
    w_below = np.where(j_star > 0, cw[rows, np.maximum(j_star - 1, 0)], 0.0)
    s_below = np.where(j_star > 0, cs[rows, np.maximum(j_star - 1, 0)], 0.0)
    s_at = cs[rows, j_star] - s_below
    taken = np.minimum(k - w_below, s_at)
    out[:] = (s_below + taken) / float(k)
    fallback = np.nonzero(~safe)[0]
    if fallback.size:
        _knn_exact_rows(queries, uniq, w_total, w_shadow, k, out, fallback)


def detect_mask(img: RasterImage, strokes: StrokeSet, h1: int) -> ShadowMask:
    """KNN classification of every pixel, posterior smoothing, thresholding.

    Features are per-pixel log intensities. The posterior is smoothed by a
    Gaussian of size h1 (rounded odd) and sigma ceil(h1/2), thresholded
    strictly above 0.5, and speckle components are dropped.
    """
    labels = strokes.labels_present()
    if SHADOW not in labels or LIT not in labels:
        raise InsufficientStrokesError("need at least one shadow stroke and one lit stroke")
    shadow_px, lit_px = strokes.rasterize(img.width, img.height)
    feats = color_convert(img, "logrgb").data if img.channels == 3 else np.repeat(img.data, 3, axis=2)
    shadow_feats = feats[shadow_px]
    lit_feats = feats[lit_px]
    if shadow_feats.shape[0] == 0 or lit_feats.shape[0] == 0:
        raise InsufficientStrokesError("strokes rasterized to empty pixel sets")

    posterior = knn_posterior(feats, shadow_feats, lit_feats, k=3)
    size = odd_size(h1)
    sigma = float(np.ceil(h1 / 2.0))
    smooth = spatial_filter(RasterImage.from_array(posterior), "gaussian", size=size, sigma=sigma)
    mask = smooth.data[:, :, 0] > 0.5
    mask = _drop_speckle(mask)
    if not mask.any():
        raise NoShadowError("detection produced an empty shadow mask")
    return ShadowMask(mask)


def _drop_speckle(mask: np.ndarray) -> np.ndarray:
    min_px = MIN_COMPONENT_FRACTION * mask.size
    labeled, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return mask
    sizes = ndimage.sum_labels(np.ones_like(mask, dtype=np.int64), labeled, index=np.arange(1, count + 1))
    keep = np.zeros(count + 1, dtype=bool)
    keep[1:] = sizes >= min_px
    return keep[labeled]


def fusion_objective(values_shadow: np.ndarray, values_lit: np.ndarray, eps: float = 1e-6) -> float:
    """Contrast objective for one candidate mix: shadow/lit mean ratio plus
    within-class spread over pooled spread; lower is better."""
    pooled = np.concatenate([values_shadow, values_lit])
    term1 = values_shadow.mean() / max(values_lit.mean(), eps)
    term2 = (values_shadow.std() + values_lit.std()) / max(pooled.std(), eps)
    return float(term1 + term2)


def _simplex_grid(step: int = 100) -> np.ndarray:
    pts = []
    for i in range(step + 1):
        for j in range(step + 1 - i):
            pts.append((i, j, step - i - j))
    return np.asarray(pts, dtype=np.float64) / step


def _objective_batch(cands: np.ndarray, ys, yl, eps: float = 1e-6) -> np.ndarray:
    # closed form from first/second moments: mean is linear in the factors,
    # variance is a quadratic form of the per-class covariance
    def moments(y):
        m = y.mean(axis=0)
        c = np.cov(y, rowvar=False, bias=True) if y.shape[0] > 1 else np.zeros((3, 3))
        return m, np.atleast_2d(c)

    ms, cs = moments(ys)
    ml, cl = moments(yl)
    pooled = np.concatenate([ys, yl], axis=0)
    mp, cp = moments(pooled)
    mean_s = cands @ ms
    mean_l = cands @ ml
    var_s = np.einsum("ij,jk,ik->i", cands, cs, cands)
    var_l = np.einsum("ij,jk,ik->i", cands, cl, cands)
    var_p = np.einsum("ij,jk,ik->i", cands, cp, cands)
    term1 = mean_s / np.maximum(mean_l, eps)
    term2 = (np.sqrt(np.maximum(var_s, 0)) + np.sqrt(np.maximum(var_l, 0))) / np.maximum(
        np.sqrt(np.maximum(var_p, 0)), eps
    )
    return term1 + term2


def build_fusion_image(img: RasterImage, strokes: StrokeSet, h2: int) -> FusionResult:
    """Find the YCbCr mixing factors by dense simplex grid search (step
    0.01) plus local refinement, then suppress texture with a median filter
    of window h2 (rounded odd)."""
    labels = strokes.labels_present()
    if SHADOW not in labels or LIT not in labels:
        raise InsufficientStrokesError("need both stroke labels to build the fusion image")
    shadow_px, lit_px = strokes.rasterize(img.width, img.height)
    ycbcr = color_convert(img, "ycbcr") if img.channels == 3 else RasterImage(np.repeat(img.data, 3, axis=2))
    ys = ycbcr.data[shadow_px]
    yl = ycbcr.data[lit_px]
    if ys.shape[0] == 0 or yl.shape[0] == 0:
        raise InsufficientStrokesError("strokes rasterized to empty pixel sets")

    grid = _simplex_grid(100)
    scores = _objective_batch(grid, ys, yl)
    if np.concatenate([ys, yl], axis=0).std(axis=0).max() < 1e-9 or not np.isfinite(scores).any():
        raise DegenerateFusionError("stroke samples have no spread in any channel mix")
    best = int(np.argmin(scores))
    best_a, best_e = grid[best], float(scores[best])

    # refinement: 0.001 lattice inside the winning cell, projected to the simplex
    deltas = []
    for di in range(-10, 11):
        for dj in range(-10, 11):
            dk = -di - dj
            if -10 <= dk <= 10:
                deltas.append((di, dj, dk))
    fine = best_a[None, :] + np.asarray(deltas, dtype=np.float64) / 1000.0
    fine = fine[(fine >= 0).all(axis=1)]
    if fine.shape[0]:
        fine_scores = _objective_batch(fine, ys, yl)
        j = int(np.argmin(fine_scores))
        if fine_scores[j] < best_e:
            best_a, best_e = fine[j], float(fine_scores[j])

    fused = np.clip(ycbcr.data @ best_a, 0.0, 1.0)
    smoothed = spatial_filter(RasterImage.from_array(fused), "median", size=odd_size(h2))
    return FusionResult(image=smoothed, factors=best_a / best_a.sum())
