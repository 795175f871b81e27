"""Penumbra unwrapping.

Boundary points of the detected mask are traced and, at each sampled point,
a line is grown along the local fusion-image gradient until the projected
gradient at both ends decays. Line profiles (log intensities) are filtered
for outliers by density clustering on their illumination-change feature,
length-normalized into a strip, and finally each column is registered to
the strip mean by a center shift plus a symmetric stretch.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateSampleError,
    InvalidInputError,
    NoShadowError,
    NoValidSamplesError,
)
from .imgcore import RasterImage, VectorField, as_bool_mask, resample_column

# one sampling line every N traced boundary pixels
DEFAULT_SPACING = 2
_MIN_PERIMETER = 8
_MIN_PROFILE = 4


@dataclasses.dataclass(eq=False)
class BoundaryPoint:
    x: float
    y: float
    normal: np.ndarray  # outward unit 2-vector


@dataclasses.dataclass(eq=False)
class SamplingLine:
    """A boundary-perpendicular intensity profile, shadow end first."""

    start: np.ndarray          # (x, y), shadow side
    end: np.ndarray            # (x, y), lit side
    boundary_point: np.ndarray
    direction: np.ndarray      # unit vector from start towards end
    profile: np.ndarray        # (n, 3) log intensities at unit steps

    def __post_init__(self):
        if self.profile.shape[0] < _MIN_PROFILE:
            raise DegenerateSampleError("sampling line profile shorter than 4 samples")
        gap = self.end - self.start
        norm = np.linalg.norm(gap)
        if norm < 1e-12:
            raise DegenerateSampleError("sampling line has zero extent")

    @property
    def length(self) -> int:
        return self.profile.shape[0]

    def positions(self) -> np.ndarray:
        """Pixel positions of the profile samples, start to end."""
        steps = np.arange(self.length)[:, None]
        return self.start[None, :] + steps * self.direction[None, :]


@dataclasses.dataclass(eq=False)
class PenumbraStrip:
    """Length-normalized profiles stacked as columns (rows x columns x 3)."""

    columns: np.ndarray
    lines: list
    stretches: np.ndarray
    shifts: np.ndarray
    aligned: bool = False

    @property
    def n_rows(self) -> int:
        return self.columns.shape[0]

    @property
    def n_cols(self) -> int:
        return self.columns.shape[1]


# ---------------------------------------------------------------------------
# boundary tracing

_MOORE = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]


def _trace_component(comp: np.ndarray) -> list:
    """Moore-neighborhood contour of one connected component, in traversal
    order. Returns (row, col) pixels; may revisit pixels on 1-px spurs."""
    ys, xs = np.nonzero(comp)
    if len(ys) == 0:
        return []
    start = (int(ys[0]), int(xs[0]))  # topmost, then leftmost
    h, w = comp.shape

    def at(p):
        return 0 <= p[0] < h and 0 <= p[1] < w and comp[p[0], p[1]]

    contour = [start]
    # enter as if coming from the pixel to the left of start
    prev_dir = _MOORE.index((0, -1))
    current = start
    limit = 4 * comp.size
    for _ in range(limit):
        found = False
        # scan clockwise starting just after the backtrack direction
        for i in range(8):
            d = (prev_dir + 1 + i) % 8
            cand = (current[0] + _MOORE[d][0], current[1] + _MOORE[d][1])
            if at(cand):
                contour.append(cand)
                prev_dir = (d + 4) % 8  # direction back to where we came from
                current = cand
                found = True
                break
        if not found:
            break  # isolated pixel
        if current == start and len(contour) > 2:
            break
    if len(contour) > 1 and contour[-1] == start:
        contour.pop()
    return contour


def extract_boundary(mask, spacing: int = DEFAULT_SPACING) -> list:
    """Trace each connected component and subsample boundary points with
    smoothed outward normals. Returns one list of points per component;
    components with a perimeter below 8 pixels are skipped."""
    data = as_bool_mask(mask)
    if not data.any():
        raise NoShadowError("mask is empty; nothing to trace")
    if spacing < 1:
        raise InvalidInputError("spacing must be >= 1")
    labeled, count = ndimage.label(data, structure=np.ones((3, 3), dtype=int))
    components = []
    for ci in range(1, count + 1):
        comp = labeled == ci
        contour = _trace_component(comp)
        if len(contour) < _MIN_PERIMETER:
            continue
        pts = _points_with_normals(contour, data, spacing)
        if pts:
            components.append(pts)
    if not components:
        raise NoShadowError("no component with a large enough perimeter")
    return components


def _points_with_normals(contour: list, mask: np.ndarray, spacing: int) -> list:
    n = len(contour)
    h, w = mask.shape
    arr = np.asarray(contour, dtype=np.float64)  # (n, 2) as (row, col)
    pts = []
    reach = 3
    for i in range(0, n, spacing):
        a = arr[(i - reach) % n]
        b = arr[(i + reach) % n]
        t = b - a  # tangent in (row, col)
        norm = np.linalg.norm(t)
        if norm < 1e-9:
            continue
        t /= norm
        # rotate tangent a quarter turn; orientation fixed by probing the mask
        nvec = np.array([-t[1], t[0]])  # (row, col) normal
        probe = arr[i] + 2.0 * nvec
        pr = int(round(min(max(probe[0], 0), h - 1)))
        pc = int(round(min(max(probe[1], 0), w - 1)))
        if mask[pr, pc]:
            nvec = -nvec
        pts.append(
            BoundaryPoint(
                x=float(arr[i][1]),
                y=float(arr[i][0]),
                normal=np.array([nvec[1], nvec[0]]),  # store as (dx, dy)
            )
        )
    return pts


# ---------------------------------------------------------------------------
# sampling-line growth


def _bilinear(field: np.ndarray, x: float, y: float):
    h, w = field.shape[:2]
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    v00 = field[y0, x0]
    v01 = field[y0, x1]
    v10 = field[y1, x0]
    v11 = field[y1, x1]
    return (
        v00 * (1 - fx) * (1 - fy)
        + v01 * fx * (1 - fy)
        + v10 * (1 - fx) * fy
        + v11 * fx * fy
    )


def start_gradient(point: BoundaryPoint, grad: VectorField) -> float:
    """Fusion gradient magnitude at a boundary point (bilinear lookup)."""
    gx = _bilinear(grad.data[:, :, 0], point.x, point.y)
    gy = _bilinear(grad.data[:, :, 1], point.x, point.y)
    return float(np.hypot(gx, gy))


def grow_sampling_line(
    point: BoundaryPoint,
    fusion: RasterImage,
    grad: VectorField,
    h5: float,
    log_img: np.ndarray,
    min_magnitude: float = 0.0,
) -> SamplingLine:
    """Grow a line symmetrically from a boundary point along the fusion
    gradient until both projected end gradients fall below 1/h5 of the
    starting magnitude or an end leaves the image.

    A starting gradient at or below `min_magnitude` counts as zero: such
    points sit off the illumination edge and the decay test would compare
    against noise.
    """
    gx, gy = _bilinear(grad.data[:, :, 0], point.x, point.y), _bilinear(grad.data[:, :, 1], point.x, point.y)
    g0 = np.array([gx, gy], dtype=np.float64)
    mag = np.linalg.norm(g0)
    if mag <= max(min_magnitude, 1e-12):
        raise DegenerateSampleError("zero fusion gradient at boundary point")
    dv = g0 / mag
    # keep the lit side on the outward-normal side even if texture flips the
    # local gradient
    if point.normal is not None and float(dv @ point.normal) < 0:
        dv = -dv

    h, w = grad.height, grad.width
    p_s = np.array([point.x, point.y], dtype=np.float64)
    p_e = p_s.copy()
    threshold = mag / float(h5)
    max_steps = max(h, w)
    for _ in range(max_steps):
        ns = p_s - dv
        ne = p_e + dv
        if not (0 <= ns[0] <= w - 1 and 0 <= ns[1] <= h - 1):
            break
        if not (0 <= ne[0] <= w - 1 and 0 <= ne[1] <= h - 1):
            break
        p_s, p_e = ns, ne
        vs = np.array(
            [_bilinear(grad.data[:, :, 0], p_s[0], p_s[1]), _bilinear(grad.data[:, :, 1], p_s[0], p_s[1])]
        )
        ve = np.array(
            [_bilinear(grad.data[:, :, 0], p_e[0], p_e[1]), _bilinear(grad.data[:, :, 1], p_e[0], p_e[1])]
        )
        if float(vs @ dv) < threshold and float(ve @ dv) < threshold:
            break

    n = int(round(np.linalg.norm(p_e - p_s))) + 1
    if n < _MIN_PROFILE:
        raise DegenerateSampleError("sampling line too short")
    profile = np.empty((n, 3))
    for i in range(n):
        pos = p_s + i * dv
        for c in range(3):
            profile[i, c] = _bilinear(log_img[:, :, c], pos[0], pos[1])
    return SamplingLine(
        start=p_s,
        end=p_e,
        boundary_point=np.array([point.x, point.y]),
        direction=dv,
        profile=profile,
    )


# ---------------------------------------------------------------------------
# outlier filtering (density clustering on illumination-change features)


def line_feature(line: SamplingLine) -> np.ndarray:
    """Spherical coordinates (r, theta, phi) of the lit-half minus
    shadow-half mean log intensity."""
    n = line.length
    half = n // 2
    shadow_mean = line.profile[:half].mean(axis=0)
    lit_mean = line.profile[half:].mean(axis=0)
    return to_spherical(lit_mean - shadow_mean)


def to_spherical(v: np.ndarray) -> np.ndarray:
    r = float(np.linalg.norm(v))
    if r < 1e-12:
        return np.array([0.0, 0.0, 0.0])
    theta = float(np.arccos(np.clip(v[2] / r, -1.0, 1.0)))
    phi = float(np.arctan2(v[1], v[0]))
    return np.array([r, theta, phi])


def dbscan(points: np.ndarray, eps: float, min_pts: int = 3) -> np.ndarray:
    """Plain density clustering; returns labels with -1 for noise.

    Deterministic: points are visited in index order and clusters expand
    breadth-first.
    """
    n = points.shape[0]
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    neighbors = [np.nonzero(dist[i] <= eps)[0] for i in range(n)]
    labels = np.full(n, -1, dtype=int)
    visited = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        if len(neighbors[i]) < min_pts:
            continue
        labels[i] = cluster
        frontier = list(neighbors[i])
        k = 0
        while k < len(frontier):
            j = frontier[k]
            k += 1
            if not visited[j]:
                visited[j] = True
                if len(neighbors[j]) >= min_pts:
                    frontier.extend(neighbors[j])
            if labels[j] == -1:
                labels[j] = cluster
        cluster += 1
    return labels


def mean_shift(points: np.ndarray, bandwidth: float, max_iter: int = 200, tol: float = 1e-7) -> np.ndarray:
    """Flat-kernel mean shift; returns group labels.

    Every point iterates to the mean of its in-bandwidth neighborhood; modes
    closer than the bandwidth are merged and points take their mode's label.
    """
    n = points.shape[0]
    shifted = points.astype(np.float64).copy()
    for _ in range(max_iter):
        moved = 0.0
        for i in range(n):
            d = np.linalg.norm(points - shifted[i], axis=1)
            sel = points[d <= bandwidth]
            if sel.shape[0] == 0:
                continue
            newp = sel.mean(axis=0)
            moved = max(moved, float(np.linalg.norm(newp - shifted[i])))
            shifted[i] = newp
        if moved < tol:
            break
    modes = []
    labels = np.empty(n, dtype=int)
    for i in range(n):
        for mi, m in enumerate(modes):
            if np.linalg.norm(shifted[i] - m) <= bandwidth:
                labels[i] = mi
                break
        else:
            modes.append(shifted[i].copy())
            labels[i] = len(modes) - 1
    return labels


def filter_outliers(lines: list, h3: float, h4: float) -> list:
    """Keep lines in the dominant illumination-change cluster, then prune
    minor sub-groups (fewer than 10% of the largest sub-group)."""
    if len(lines) < 3:
        raise NoValidSamplesError("need at least 3 sampling lines to filter")
    feats = np.stack([line_feature(l) for l in lines])
    labels = dbscan(feats, eps=float(h3), min_pts=3)
    valid_labels = labels[labels >= 0]
    if valid_labels.size == 0:
        raise NoValidSamplesError("all sampling lines classified as noise")
    counts = np.bincount(valid_labels)
    main = int(np.argmax(counts))  # ties resolve to the first-found cluster
    keep_idx = np.nonzero(labels == main)[0]

    sub = mean_shift(feats[keep_idx], bandwidth=float(h4))
    sub_counts = np.bincount(sub)
    largest = int(sub_counts.max())
    good_groups = {g for g, c in enumerate(sub_counts) if c * 10 >= largest}
    kept = [int(i) for i, g in zip(keep_idx, sub) if g in good_groups]
    if not kept:
        raise NoValidSamplesError("all sub-groups fell below the 10% rule")
    return [lines[i] for i in kept]


# ---------------------------------------------------------------------------
# strip building and alignment


def build_strip(lines: list) -> PenumbraStrip:
    """Resample every profile to the longest valid length and concatenate
    them as columns in boundary order (row 0 = shadow end)."""
    if not lines:
        raise NoValidSamplesError("no lines to assemble into a strip")
    n_rows = max(l.length for l in lines)
    cols = np.empty((n_rows, len(lines), 3))
    for j, line in enumerate(lines):
        cols[:, j, :] = resample_column(line.profile, n_rows)
    m = len(lines)
    return PenumbraStrip(
        columns=cols,
        lines=list(lines),
        stretches=np.zeros(m),
        shifts=np.zeros(m),
        aligned=False,
    )


def _sample(col: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Linear interpolation with edge-value extension; col is (n,) or (n, c)."""
    n = col.shape[0]
    p = np.clip(pos, 0.0, n - 1.0)
    i0 = np.floor(p).astype(np.intp)
    i1 = np.minimum(i0 + 1, n - 1)
    f = p - i0
    if col.ndim == 1:
        return col[i0] * (1.0 - f) + col[i1] * f
    return col[i0] * (1.0 - f)[:, None] + col[i1] * f[:, None]


def warp_positions(n: int, stretch: float, shift: float) -> np.ndarray:
    """Source positions implementing a center shift followed by a symmetric
    stretch that moves both ends outward by `stretch` samples."""
    m = (n - 1) / 2.0
    denom = max(m + stretch, 0.25)
    r = np.arange(n, dtype=np.float64)
    return m + (r - m) * (m / denom) - shift


def warp_column(col: np.ndarray, stretch: float, shift: float) -> np.ndarray:
    """Apply the alignment map: identity at stretch = shift = 0."""
    if stretch == 0.0 and shift == 0.0:
        return col.copy()
    return _sample(col, warp_positions(col.shape[0], stretch, shift))


def unwarp_column(col: np.ndarray, stretch: float, shift: float, target_len: int) -> np.ndarray:
    """Invert the alignment map and resample back to the original profile
    length in one pass."""
    n = col.shape[0]
    m = (n - 1) / 2.0
    denom = max(m + stretch, 0.25)
    t = np.linspace(0.0, n - 1.0, int(target_len))
    pos = m + (t - m + shift) * (denom / m)
    return _sample(col, pos)


def _column_error(col_mean: np.ndarray, reference: np.ndarray, stretch: float, shift: float) -> float:
    warped = _sample(col_mean, warp_positions(col_mean.shape[0], stretch, shift))
    d = warped - reference
    return float(np.mean(d * d))


def _golden_refine(fn, lo: float, hi: float, tol: float = 1e-4) -> float:
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = fn(c), fn(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = fn(d)
    return (a + b) / 2.0


def align_params(profile: np.ndarray, reference: np.ndarray, bound: float) -> tuple:
    """Best (stretch, shift) for one column: integer-grid seeding over the
    bounded square, then golden-section coordinate descent."""
    b = int(np.floor(bound))
    n = profile.shape[0]
    m = (n - 1) / 2.0
    r = np.arange(n, dtype=np.float64)
    ss, kk = np.meshgrid(np.arange(-b, b + 1, dtype=np.float64), np.arange(-b, b + 1, dtype=np.float64))
    cand_s = np.concatenate([[0.0], ss.ravel()])
    cand_k = np.concatenate([[0.0], kk.ravel()])
    denom = np.maximum(m + cand_s, 0.25)
    pos = m + (r[None, :] - m) * (m / denom)[:, None] - cand_k[:, None]
    warped = _sample(profile, pos)
    errs = np.mean((warped - reference[None, :]) ** 2, axis=1)
    # candidate 0 is the identity; strict improvement required to move off it
    best_i = 0
    best_e = float(errs[0])
    j = int(np.argmin(errs))
    if errs[j] < best_e - 1e-15:
        best_i, best_e = j, float(errs[j])
    stretch, shift = float(cand_s[best_i]), float(cand_k[best_i])
    for _ in range(40):
        new_shift = _golden_refine(
            lambda k: _column_error(profile, reference, stretch, k),
            max(shift - 1.0, -bound),
            min(shift + 1.0, bound),
        )
        new_stretch = _golden_refine(
            lambda s: _column_error(profile, reference, s, new_shift),
            max(stretch - 1.0, -bound),
            min(stretch + 1.0, bound),
        )
        e = _column_error(profile, reference, new_stretch, new_shift)
        if best_e - e < 1e-8:
            if e < best_e:
                stretch, shift, best_e = new_stretch, new_shift, e
            break
        stretch, shift, best_e = new_stretch, new_shift, e
    return stretch, shift, best_e


def align_strip(strip: PenumbraStrip) -> PenumbraStrip:
    """Register every column to the strip mean profile.

    The reference is the per-row mean over all columns, averaged across
    channels; alignment parameters are shared by the three channels of a
    column. Single-column strips return unchanged with zero parameters.
    """
    if strip.n_cols < 2:
        return PenumbraStrip(
            columns=strip.columns.copy(),
            lines=list(strip.lines),
            stretches=np.zeros(strip.n_cols),
            shifts=np.zeros(strip.n_cols),
            aligned=True,
        )
    reference = strip.columns.mean(axis=1).mean(axis=1)  # (rows,)
    bound = strip.n_rows / 4.0
    aligned = np.empty_like(strip.columns)
    stretches = np.zeros(strip.n_cols)
    shifts = np.zeros(strip.n_cols)
    for j in range(strip.n_cols):
        col_mean = strip.columns[:, j, :].mean(axis=1)
        stretch, shift, _ = align_params(col_mean, reference, bound)
        stretches[j] = stretch
        shifts[j] = shift
        aligned[:, j, :] = warp_column(strip.columns[:, j, :], stretch, shift)
    return PenumbraStrip(
        columns=aligned,
        lines=list(strip.lines),
        stretches=stretches,
        shifts=shifts,
        aligned=True,
    )
