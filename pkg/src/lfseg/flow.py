"""Dense correspondence between views, .flo I/O, and textureless masking.

The built-in matcher is coarse-to-fine SSD block matching with parabolic
sub-pixel refinement.  Precomputed flow can be imported from Middlebury
``.flo`` files instead; the rest of the pipeline does not care where flow
comes from.
"""
from __future__ import annotations

import dataclasses
import struct
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates, median_filter, uniform_filter

from .lightfield import Mask, Viewpoint, _freeze

FLO_MAGIC = 202021.25
SENTINEL = 1e9


class FlowError(Exception):
    """Flow computation or I/O failure."""


class BadMagicError(FlowError):
    pass


class TruncatedError(FlowError):
    pass


@dataclasses.dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement field; ``du``/``dv`` are (H, W) arrays in px."""

    du: np.ndarray
    dv: np.ndarray

    def __post_init__(self):
        du = np.asarray(self.du, dtype=np.float64)
        dv = np.asarray(self.dv, dtype=np.float64)
        if du.ndim != 2 or du.shape != dv.shape:
            raise ValueError("du and dv must be matching 2-D arrays")
        object.__setattr__(self, "du", _freeze(du))
        object.__setattr__(self, "dv", _freeze(dv))

    @property
    def width(self) -> int:
        return self.du.shape[1]

    @property
    def height(self) -> int:
        return self.du.shape[0]


@dataclasses.dataclass(frozen=True)
class FlowPair:
    """Forward (center -> view) and backward (view -> center) flow for one viewpoint."""

    viewpoint: Viewpoint
    forward: FlowField
    backward: FlowField

    def __post_init__(self):
        if self.forward.du.shape != self.backward.du.shape:
            raise ValueError("forward and backward fields must share shape")


TextureMask = Mask


@dataclasses.dataclass(frozen=True)
class FlowParams:
    levels: int = 3
    search_radius_px: int = 16
    patch_radius_px: int = 4

    def __post_init__(self):
        if self.levels < 1 or self.search_radius_px < 1 or self.patch_radius_px < 1:
            raise ValueError("flow parameters must be positive")


def _downsample2(img: np.ndarray) -> np.ndarray:
    # anti-alias before decimation or fine texture decorrelates the levels
    img = gaussian_filter(img, sigma=1.0, mode="nearest")
    h, w = img.shape
    if h % 2 or w % 2:
        img = np.pad(img, ((0, h % 2), (0, w % 2)), mode="edge")
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def _bilinear_resize(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = arr.shape
    nh, nw = shape
    yy = (np.arange(nh) + 0.5) * (h / nh) - 0.5
    xx = (np.arange(nw) + 0.5) * (w / nw) - 0.5
    gy, gx = np.meshgrid(yy, xx, indexing="ij")
    return map_coordinates(arr, [gy, gx], order=1, mode="nearest")


def _warp_integer(img: np.ndarray, du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    # integer displacements keep the warp lossless (pure gather, clamped)
    h, w = img.shape
    gy, gx = np.meshgrid(np.arange(h, dtype=np.int64), np.arange(w, dtype=np.int64), indexing="ij")
    xi = np.clip(gx + du.astype(np.int64), 0, w - 1)
    yi = np.clip(gy + dv.astype(np.int64), 0, h - 1)
    return img[yi, xi]


def _search_level(src: np.ndarray, dst: np.ndarray, radius: int, patch_radius: int):
    """Integer SSD search plus per-axis parabolic refinement, all pixels at once."""
    h, w = src.shape
    size = 2 * radius + 1
    win = 2 * patch_radius + 1
    pad = np.pad(dst, radius, mode="edge")
    vol = np.empty((size, size, h, w), dtype=np.float32)
    for iy in range(size):
        for ix in range(size):
            diff = src - pad[iy : iy + h, ix : ix + w]
            vol[iy, ix] = uniform_filter(diff * diff, size=win, mode="nearest")

    flat = vol.reshape(size * size, h, w)
    best = np.argmin(flat, axis=0)
    by, bx = np.divmod(best, size)
    s0 = np.take_along_axis(flat, best[None], axis=0)[0]

    def _axis_offset(idx, lo_idx, hi_idx, at_border):
        s_lo = np.take_along_axis(flat, lo_idx[None], axis=0)[0]
        s_hi = np.take_along_axis(flat, hi_idx[None], axis=0)[0]
        denom = s_lo - 2.0 * s0 + s_hi
        num = s_lo - s_hi
        off = np.where(denom > 1e-12, 0.5 * num / np.maximum(denom, 1e-12), 0.0)
        # an exact match pins the optimum (the box filter leaves ~1e-9 of
        # accumulation dust, hence the tolerance); borders cannot interpolate
        off = np.where((s0 <= 1e-6) | at_border, 0.0, off)
        return np.clip(off, -0.5, 0.5)

    x_border = (bx == 0) | (bx == size - 1)
    y_border = (by == 0) | (by == size - 1)
    off_x = _axis_offset(bx, by * size + np.maximum(bx - 1, 0), by * size + np.minimum(bx + 1, size - 1), x_border)
    off_y = _axis_offset(by, np.maximum(by - 1, 0) * size + bx, np.minimum(by + 1, size - 1) * size + bx, y_border)

    du = (bx - radius) + off_x
    dv = (by - radius) + off_y
    return du, dv


_POLISH_RADIUS = 2


def _polish(src: np.ndarray, dst: np.ndarray, du: np.ndarray, dv: np.ndarray, patch_radius: int):
    """Seam-free refinement of an integer-rounded flow estimate.

    The pyramid warps by a per-pixel base, so patches straddling a base
    discontinuity see mixed content.  This pass re-scores a small integer
    neighborhood of each pixel's estimate directly against the unwarped
    destination and re-fits the sub-pixel parabola there.
    """
    h, w = src.shape
    pr = patch_radius
    dr = _POLISH_RADIUS
    side = 2 * dr + 1
    win = 2 * pr + 1
    base_u = np.rint(du).astype(np.int64)
    base_v = np.rint(dv).astype(np.int64)
    gy, gx = np.meshgrid(np.arange(h, dtype=np.int64), np.arange(w, dtype=np.int64), indexing="ij")

    # destination samples at every combined offset the deltas need
    reach = pr + dr
    planes = {}
    for cy in range(-reach, reach + 1):
        for cx in range(-reach, reach + 1):
            tx = np.clip(gx + base_u + cx, 0, w - 1)
            ty = np.clip(gy + base_v + cy, 0, h - 1)
            planes[(cx, cy)] = dst[ty, tx]

    src_pad = np.pad(src, pr, mode="edge")
    ssd = np.zeros((side, side, h, w))
    for oy in range(-pr, pr + 1):
        for ox in range(-pr, pr + 1):
            s = src_pad[pr + oy : pr + oy + h, pr + ox : pr + ox + w]
            for iy in range(side):
                for ix in range(side):
                    diff = s - planes[(ix - dr + ox, iy - dr + oy)]
                    ssd[iy, ix] += diff * diff
    ssd /= win * win

    flat = ssd.reshape(side * side, h, w)
    best = np.argmin(flat, axis=0)
    by, bx = np.divmod(best, side)
    s0 = np.take_along_axis(flat, best[None], axis=0)[0]

    def axis_offset(lo, hi, border):
        s_lo = np.take_along_axis(flat, lo[None], axis=0)[0]
        s_hi = np.take_along_axis(flat, hi[None], axis=0)[0]
        denom = s_lo - 2.0 * s0 + s_hi
        off = np.where(denom > 1e-12, 0.5 * (s_lo - s_hi) / np.maximum(denom, 1e-12), 0.0)
        off = np.where((s0 <= 1e-6) | border, 0.0, off)
        return np.clip(off, -0.5, 0.5)

    off_x = axis_offset(by * side + np.maximum(bx - 1, 0), by * side + np.minimum(bx + 1, side - 1),
                        (bx == 0) | (bx == side - 1))
    off_y = axis_offset(np.maximum(by - 1, 0) * side + bx, np.minimum(by + 1, side - 1) * side + bx,
                        (by == 0) | (by == side - 1))
    return base_u + (bx - dr) + off_x, base_v + (by - dr) + off_y


def compute_flow(src: np.ndarray, dst: np.ndarray, params: FlowParams = FlowParams()) -> FlowField:
    """Dense displacement from ``src`` to ``dst`` by pyramidal block matching.

    At each pyramid level the destination is warped by the current estimate
    and the residual displacement minimizing the patch SSD inside the search
    window is found, then refined to sub-pixel accuracy by fitting a parabola
    to the SSD samples along each axis (clamped to +/-0.5 px).  A final pass
    re-scores each pixel's integer neighborhood against the unwarped
    destination, which removes warp-seam artifacts.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape:
        raise FlowError("images must share shape")
    diameter = 2 * params.patch_radius_px + 1
    if min(src.shape) < diameter:
        raise FlowError(f"images smaller than the {diameter}-px patch diameter")

    pyr = [(src, dst)]
    for _ in range(params.levels - 1):
        s, d = pyr[-1]
        if min(s.shape) // 2 < diameter:
            break
        pyr.append((_downsample2(s), _downsample2(d)))

    du = np.zeros(pyr[-1][0].shape)
    dv = np.zeros_like(du)
    for level in range(len(pyr) - 1, -1, -1):
        s, d = pyr[level]
        if du.shape != s.shape:
            du = 2.0 * _bilinear_resize(du, s.shape)
            dv = 2.0 * _bilinear_resize(dv, s.shape)
        # warp by a smoothed, rounded estimate: rounding keeps integer
        # matches exact, smoothing keeps the warp free of rounding seams
        base_u = np.rint(gaussian_filter(du, sigma=2.0, mode="nearest"))
        base_v = np.rint(gaussian_filter(dv, sigma=2.0, mode="nearest"))
        warped = _warp_integer(d, base_u, base_v)
        rdu, rdv = _search_level(s, warped, params.search_radius_px, params.patch_radius_px)
        du = base_u + rdu
        dv = base_v + rdv
        if level > 0:
            # reject isolated false matches before they seed the next level
            du = median_filter(du, size=3, mode="nearest")
            dv = median_filter(dv, size=3, mode="nearest")
    du, dv = _polish(src, dst, du, dv, params.patch_radius_px)
    return FlowField(du, dv)


def load_flo(path) -> FlowField:
    """Read a Middlebury .flo file (magic 202021.25, little-endian float32)."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise TruncatedError(f"{path}: shorter than the 12-byte header")
    (magic,) = struct.unpack("<f", raw[:4])
    if magic != np.float32(FLO_MAGIC):
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    w, h = struct.unpack("<ii", raw[4:12])
    if w < 0 or h < 0:
        raise TruncatedError(f"{path}: nonsensical size {w}x{h}")
    need = 2 * w * h * 4
    payload = raw[12:]
    if len(payload) < need:
        raise TruncatedError(f"{path}: payload holds {len(payload)} bytes, need {need}")
    data = np.frombuffer(payload[:need], dtype="<f4").reshape(h, w, 2)
    return FlowField(data[..., 0], data[..., 1])


def save_flo(flow: FlowField, path) -> None:
    """Write a FlowField in Middlebury .flo layout (float32)."""
    h, w = flow.du.shape
    inter = np.empty((h, w, 2), dtype="<f4")
    inter[..., 0] = flow.du
    inter[..., 1] = flow.dv
    with open(Path(path), "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", w, h))
        f.write(inter.tobytes())


def sentinel_mask(flow: FlowField) -> np.ndarray:
    """Boolean map of NaN / huge-sentinel entries in an imported flow."""
    bad = ~np.isfinite(flow.du) | ~np.isfinite(flow.dv)
    return bad | (np.abs(flow.du) > SENTINEL) | (np.abs(flow.dv) > SENTINEL)


def sample_flow(flow: FlowField, x, y):
    """Bilinearly interpolate (du, dv) at real coordinates, clamped to borders."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, flow.width - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, flow.height - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, flow.width - 1)
    y1 = np.minimum(y0 + 1, flow.height - 1)
    fx = x - x0
    fy = y - y0

    def bil(a):
        return ((a[y0, x0] * (1 - fx) + a[y0, x1] * fx) * (1 - fy)
                + (a[y1, x0] * (1 - fx) + a[y1, x1] * fx) * fy)

    return bil(flow.du), bil(flow.dv)


def texture_mask(img: np.ndarray, window_radius: int = 4, grad_threshold: float = 16.0) -> Mask:
    """Mark pixels whose windowed squared horizontal gradient is usable.

    ``mask = 0`` where the mean of ``(I(u+1, v) - I(u, v))**2`` over the
    ``(2r+1)**2`` window falls below ``grad_threshold`` (replicate-padded).
    """
    if window_radius < 1:
        raise ValueError("window_radius must be >= 1")
    arr = np.asarray(img, dtype=np.float64)
    gx = np.zeros_like(arr)
    gx[:, :-1] = arr[:, 1:] - arr[:, :-1]
    mean = uniform_filter(gx * gx, size=2 * window_radius + 1, mode="nearest")
    return Mask((mean >= grad_threshold).astype(np.uint8))
