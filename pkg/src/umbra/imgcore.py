"""Image containers, color conversion, spatial filtering, gradients,
harmonic in-painting and 1-D resampling.

All pixel math runs on float64 numpy arrays. Images are (height, width,
channels) with samples in [0, 1]; fields carry per-pixel vectors or scales.
"""

from __future__ import annotations

import dataclasses
import io
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage, sparse
from scipy.sparse.linalg import spsolve

from .errors import InvalidInputError, InvalidParameterError

# Offset for the log intensity domain; keeps ln() finite for black pixels.
LOG_EPS = 1.0 / 255.0

_LOG_LO = np.log(LOG_EPS)
_LOG_HI = np.log(1.0 + LOG_EPS)

# BT.601 luma weights (full-range).
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclasses.dataclass(frozen=True)
class RasterImage:
    """Floating-point image in [0, 1]; data shape (height, width, 1 or 3)."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if not isinstance(d, np.ndarray) or d.ndim != 3 or d.shape[2] not in (1, 3):
            raise InvalidInputError(f"image data must be (h, w, 1|3), got {getattr(d, 'shape', None)}")
        if not np.isfinite(d).all():
            raise InvalidInputError("image contains non-finite samples")
        if d.min() < 0.0 or d.max() > 1.0:
            raise InvalidInputError("image samples outside [0, 1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_array(cls, arr: np.ndarray, clamp: bool = False) -> "RasterImage":
        """Wrap an array as an image; 2-D input becomes single-channel."""
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if clamp:
            a = np.clip(a, 0.0, 1.0)
        return cls(np.ascontiguousarray(a))

    def gray2d(self) -> np.ndarray:
        """Single-channel plane as a 2-D array (luma for color images)."""
        if self.channels == 1:
            return self.data[:, :, 0]
        return self.data @ _LUMA


def load_image(path) -> RasterImage:
    """Load an 8-bit PNG/JPEG; samples divide by 255 into [0, 1]."""
    with Image.open(path) as im:
        if im.mode in ("L", "I;16"):
            im = im.convert("L")
            arr = np.asarray(im, dtype=np.float64) / 255.0
            return RasterImage.from_array(arr)
        im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
        return RasterImage(np.ascontiguousarray(arr))


def _to_uint8(img: RasterImage) -> np.ndarray:
    # round-half-up to 8 bit
    return np.floor(img.data * 255.0 + 0.5).astype(np.uint8)


def save_image(img: RasterImage, path) -> None:
    """Write an image as 8-bit PNG or JPEG depending on the suffix."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(_pil_frame(img)).save(path)


def encode_png(img: RasterImage) -> bytes:
    """8-bit PNG bytes for an image (deterministic for identical pixels)."""
    buf = io.BytesIO()
    Image.fromarray(_pil_frame(img)).save(buf, format="PNG")
    return buf.getvalue()


def _pil_frame(img: RasterImage) -> np.ndarray:
    u8 = _to_uint8(img)
    return u8[:, :, 0] if img.channels == 1 else u8


def save_gray16(values: np.ndarray, path) -> None:
    """Write a 2-D array in [0, 1] as a 16-bit grayscale PNG."""
    u16 = np.floor(np.clip(values, 0.0, 1.0) * 65535.0 + 0.5).astype(np.uint16)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(u16).save(path)


def encode_gray16(values: np.ndarray) -> bytes:
    u16 = np.floor(np.clip(values, 0.0, 1.0) * 65535.0 + 0.5).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(u16).save(buf, format="PNG")
    return buf.getvalue()


@dataclasses.dataclass(frozen=True)
class VectorField:
    """Per-pixel 2-vector (dx, dy); data shape (height, width, 2)."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[2] != 2:
            raise InvalidInputError(f"vector field must be (h, w, 2), got {d.shape}")
        if not np.isfinite(d).all():
            raise InvalidInputError("vector field contains non-finite components")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclasses.dataclass(frozen=True)
class ScaleField:
    """Per-pixel, per-channel multiplicative shadow scale in (0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[2] != 3:
            raise InvalidInputError(f"scale field must be (h, w, 3), got {d.shape}")
        if not np.isfinite(d).all():
            raise InvalidInputError("scale field contains non-finite values")
        if d.min() <= 0.0 or d.max() > 1.0:
            raise InvalidInputError("scale values must lie in (0, 1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# color conversion


def to_log(values: np.ndarray) -> np.ndarray:
    """Natural log of intensity with a small offset: ln(x + 1/255)."""
    return np.log(values + LOG_EPS)


def from_log(values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_log`."""
    return np.exp(values) - LOG_EPS


def color_convert(img: RasterImage, target: str) -> RasterImage:
    """Convert to 'ycbcr' (BT.601 full range), 'gray' (BT.601 luma) or
    'logrgb' (per-channel log intensity affinely rescaled to [0, 1])."""
    target = target.lower()
    if target in ("ycbcr", "logrgb") and img.channels != 3:
        raise InvalidInputError(f"{target} conversion needs a 3-channel image")
    if target == "gray":
        return RasterImage.from_array(img.gray2d())
    if target == "ycbcr":
        r, g, b = img.data[:, :, 0], img.data[:, :, 1], img.data[:, :, 2]
        y = 0.299 * r + 0.587 * g + 0.114 * b
        cb = (b - y) / 1.772 + 0.5
        cr = (r - y) / 1.402 + 0.5
        out = np.stack([y, cb, cr], axis=-1)
        return RasterImage(np.clip(out, 0.0, 1.0))
    if target == "logrgb":
        out = (to_log(img.data) - _LOG_LO) / (_LOG_HI - _LOG_LO)
        return RasterImage(np.clip(out, 0.0, 1.0))
    raise InvalidParameterError(f"unknown color target {target!r}")


def ycbcr_to_rgb(img: RasterImage) -> RasterImage:
    """Inverse BT.601 conversion, used to verify the forward round trip."""
    if img.channels != 3:
        raise InvalidInputError("ycbcr image must have 3 channels")
    y, cb, cr = img.data[:, :, 0], img.data[:, :, 1], img.data[:, :, 2]
    r = y + 1.402 * (cr - 0.5)
    b = y + 1.772 * (cb - 0.5)
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return RasterImage(np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0))


# ---------------------------------------------------------------------------
# spatial filters (border policy: edge replication)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    c = (size - 1) / 2.0
    x = np.arange(size) - c
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_gaussian(ch: np.ndarray, size: int, sigma: float) -> np.ndarray:
    k = _gaussian_kernel(size, sigma)
    out = ndimage.correlate1d(ch, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def _moving_average_1d(ch: np.ndarray, size: int, axis: int) -> np.ndarray:
    """Box mean along one axis with edge replication.

    For even sizes the window at index i spans [i - (size-1)//2, i + size//2].
    """
    if size == 1:
        return ch.copy()
    lo, hi = (size - 1) // 2, size // 2
    pad = [(0, 0)] * ch.ndim
    pad[axis] = (lo, hi)
    padded = np.pad(ch, pad, mode="edge")
    c = np.cumsum(padded, axis=axis, dtype=np.float64)
    zero = np.zeros_like(np.take(c, [0], axis=axis))
    c = np.concatenate([zero, c], axis=axis)
    n = ch.shape[axis]
    upper = np.take(c, np.arange(size, size + n), axis=axis)
    lower = np.take(c, np.arange(0, n), axis=axis)
    return (upper - lower) / float(size)


def _filter_average(ch: np.ndarray, width: int, height: int) -> np.ndarray:
    out = _moving_average_1d(ch, height, axis=0)
    return _moving_average_1d(out, width, axis=1)


def _filter_bilateral(ch: np.ndarray, sigma_space: float, sigma_range: float) -> np.ndarray:
    """Grid-based bilateral filter; linear cost even for very wide kernels.

    Splats (value, weight) into a coarse (y, x, intensity) grid, blurs the
    grid with a unit Gaussian, then slices back with trilinear interpolation.
    """
    h, w = ch.shape
    ss = max(float(sigma_space), 1.0)
    sr = max(float(sigma_range), 1.0 / 255.0)
    pad = 3
    gy = ch.shape[0] / ss
    gx = ch.shape[1] / ss
    ny = int(np.ceil(gy)) + 1 + 2 * pad
    nx = int(np.ceil(gx)) + 1 + 2 * pad
    nz = int(np.ceil(1.0 / sr)) + 1 + 2 * pad

    yy, xx = np.mgrid[0:h, 0:w]
    py = yy.ravel() / ss + pad
    px = xx.ravel() / ss + pad
    pz = ch.ravel() / sr + pad

    num = np.zeros((ny, nx, nz))
    den = np.zeros((ny, nx, nz))
    iy = np.rint(py).astype(np.intp)
    ix = np.rint(px).astype(np.intp)
    iz = np.rint(pz).astype(np.intp)
    np.add.at(num, (iy, ix, iz), ch.ravel())
    np.add.at(den, (iy, ix, iz), 1.0)

    num = ndimage.gaussian_filter(num, 1.0, mode="constant")
    den = ndimage.gaussian_filter(den, 1.0, mode="constant")

    def trilinear(vol, y, x, z):
        y0 = np.floor(y).astype(np.intp)
        x0 = np.floor(x).astype(np.intp)
        z0 = np.floor(z).astype(np.intp)
        fy, fx, fz = y - y0, x - x0, z - z0
        acc = np.zeros_like(y, dtype=np.float64)
        for dy in (0, 1):
            wy = np.where(dy == 0, 1 - fy, fy)
            for dx in (0, 1):
                wx = np.where(dx == 0, 1 - fx, fx)
                for dz in (0, 1):
                    wz = np.where(dz == 0, 1 - fz, fz)
                    acc += wy * wx * wz * vol[y0 + dy, x0 + dx, z0 + dz]
        return acc

    top = trilinear(num, py, px, pz)
    bot = trilinear(den, py, px, pz)
    vals = np.where(bot > 1e-12, top / np.maximum(bot, 1e-12), ch.ravel())
    return vals.reshape(h, w)


def spatial_filter(img: RasterImage, kind: str, **params) -> RasterImage:
    """Per-channel spatial filtering.

    Kinds: gaussian(size, sigma), median(size), average(width, height),
    bilateral(sigma_space, sigma_range). Borders replicate edge samples and
    the output keeps the input dimensions.
    """
    kind = kind.lower()
    data = img.data
    out = np.empty_like(data)
    if kind == "gaussian":
        size, sigma = int(params["size"]), float(params["sigma"])
        if size < 1 or sigma <= 0:
            raise InvalidParameterError("gaussian needs size >= 1 and sigma > 0")
        if size % 2 == 0:
            raise InvalidParameterError("gaussian kernel size must be odd")
        for c in range(data.shape[2]):
            out[:, :, c] = _filter_gaussian(data[:, :, c], size, sigma)
    elif kind == "median":
        size = int(params["size"])
        if size < 1:
            raise InvalidParameterError("median needs size >= 1")
        if size % 2 == 0:
            raise InvalidParameterError("median window must be odd")
        for c in range(data.shape[2]):
            out[:, :, c] = ndimage.median_filter(data[:, :, c], size=size, mode="nearest")
    elif kind == "average":
        width, height = int(params["width"]), int(params["height"])
        if width < 1 or height < 1:
            raise InvalidParameterError("average needs width, height >= 1")
        for c in range(data.shape[2]):
            out[:, :, c] = _filter_average(data[:, :, c], width, height)
    elif kind == "bilateral":
        sigma_space = float(params["sigma_space"])
        sigma_range = float(params["sigma_range"])
        if sigma_space <= 0 or sigma_range <= 0:
            raise InvalidParameterError("bilateral needs positive sigmas")
        for c in range(data.shape[2]):
            out[:, :, c] = _filter_bilateral(data[:, :, c], sigma_space, sigma_range)
    else:
        raise InvalidParameterError(f"unknown filter kind {kind!r}")
    return RasterImage(np.clip(out, 0.0, 1.0))


def odd_size(n: int) -> int:
    """Round a kernel size up to the next odd integer."""
    n = int(n)
    return n if n % 2 == 1 else n + 1


def as_bool_mask(mask) -> np.ndarray:
    """Accept a ShadowMask-like object or a plain array; return 2-D bool."""
    arr = mask if isinstance(mask, np.ndarray) else mask.data
    arr = np.asarray(arr)
    return arr if arr.dtype == bool else arr.astype(bool)


# ---------------------------------------------------------------------------
# gradients


def gradient_field(img: RasterImage) -> VectorField:
    """Gradient of a single-channel image: central differences in the
    interior, one-sided at the borders."""
    if img.channels != 1:
        raise InvalidInputError("gradient_field expects a single-channel image")
    ch = img.data[:, :, 0]
    dy, dx = np.gradient(ch)
    return VectorField(np.stack([dx, dy], axis=-1))


# ---------------------------------------------------------------------------
# harmonic in-painting


def harmonic_fill(values: np.ndarray, known: np.ndarray, region: np.ndarray | None = None) -> np.ndarray:
    """Fill unknown pixels with the discrete harmonic (Laplace) interpolant.

    Known pixels are Dirichlet data and are preserved exactly. Pixels outside
    `region` (when given) are left untouched and excluded from the stencil.
    """
    values = np.asarray(values, dtype=np.float64)
    known = np.asarray(known, dtype=bool)
    if values.shape != known.shape or values.ndim != 2:
        raise InvalidInputError("values and known mask must be matching 2-D arrays")
    if not known.any():
        raise InvalidInputError("harmonic fill needs at least one known pixel")
    if region is None:
        region = np.ones_like(known)
    unknown = region & ~known
    out = values.copy()
    n = int(unknown.sum())
    if n == 0:
        return out

    h, w = values.shape
    idx = -np.ones((h, w), dtype=np.int64)
    uy, ux = np.nonzero(unknown)
    idx[uy, ux] = np.arange(n)

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    deg = np.zeros(n)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx = uy + dy, ux + dx
        inb = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        # neighbor is another unknown
        m = inb.copy()
        m[inb] = unknown[ny[inb], nx[inb]]
        rows.append(idx[uy[m], ux[m]])
        cols.append(idx[ny[m], nx[m]])
        vals.append(-np.ones(int(m.sum())))
        deg[idx[uy[m], ux[m]]] += 1
        # neighbor is known boundary data
        b = inb.copy()
        b[inb] = known[ny[inb], nx[inb]]
        np.add.at(rhs, idx[uy[b], ux[b]], values[ny[b], nx[b]])
        deg[idx[uy[b], ux[b]]] += 1

    deg = np.maximum(deg, 1.0)  # isolated pixels keep a well-posed row
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(deg)
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    sol = spsolve(mat, rhs)
    # the discrete harmonic solution provably stays within the boundary data
    # range; clipping removes only solver round-off
    kv = values[known]
    sol = np.clip(sol, kv.min(), kv.max())
    out[uy, ux] = sol
    return out


def inpaint_field(field: ScaleField, known: np.ndarray, region: np.ndarray | None = None) -> ScaleField:
    """Harmonic interpolation of a sparse scale field; known values are kept
    exactly and the result is clamped to (0, 1]."""
    known = np.asarray(known, dtype=bool)
    if known.shape != (field.height, field.width):
        raise InvalidInputError("known mask shape must match the field")
    if not known.any():
        raise InvalidInputError("inpaint_field needs a non-empty known set")
    out = np.empty_like(field.data)
    for c in range(3):
        out[:, :, c] = harmonic_fill(field.data[:, :, c], known, region)
    return ScaleField(np.clip(out, 1e-6, 1.0))


# ---------------------------------------------------------------------------
# 1-D resampling


def resample_column(values: np.ndarray, target_len: int) -> np.ndarray:
    """Linear resampling to `target_len` samples at uniform parameter
    spacing; endpoints are preserved exactly."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] < 2:
        raise InvalidInputError("resample_column needs at least 2 samples")
    if target_len < 2:
        raise InvalidInputError("target length must be >= 2")
    n = values.shape[0]
    if target_len == n:
        return values.copy()
    t = np.linspace(0.0, n - 1.0, int(target_len))
    if values.ndim == 1:
        return np.interp(t, np.arange(n), values)
    out = np.empty((int(target_len),) + values.shape[1:])
    for c in range(values.shape[1]):
        out[:, c] = np.interp(t, np.arange(n), values[:, c])
    return out
