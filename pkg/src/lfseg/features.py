"""Per-pixel light-field features: linearity, consistency, occlusion direction.

For every pixel of the reference view the correspondence offsets to all
other viewpoints form a set of ``(s, t, du, dv)`` samples.  On a Lambertian
surface these lie on a hyperplane through the origin; the smallest
eigenvalue of the 4x4 scatter matrix measures how far a pixel deviates from
that model (the "linearity").  Forward-backward matching failures are
binarized per viewpoint and matched against directional half-plane
templates to localize occlusion boundaries.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .flow import FlowPair, sample_flow
from .lightfield import LightField, ScalarMap, _freeze

DIRECTIONS = (0, 45, 90, 135, 180, 225, 270, 315)

_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 30
_COORD_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class LFD:
    """Correspondence offsets of one pixel: rows ``(s, t, du, dv)``, center excluded."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != 4:
            raise ValueError("samples must be (K, 4)")
        object.__setattr__(self, "samples", _freeze(samples))


@dataclasses.dataclass(frozen=True)
class HyperplaneFit:
    normal: np.ndarray
    residual: float


@dataclasses.dataclass(frozen=True)
class ConsistencyVolume:
    """Binary forward-backward inconsistency, one (H, W) plane per non-center view."""

    viewpoints: np.ndarray
    planes: np.ndarray

    def __post_init__(self):
        vps = np.asarray(self.viewpoints, dtype=np.float64)
        planes = np.asarray(self.planes, dtype=np.uint8)
        if planes.ndim != 3 or vps.shape != (planes.shape[0], 2):
            raise ValueError("planes must be (K, H, W) aligned with viewpoints")
        object.__setattr__(self, "viewpoints", _freeze(vps))
        object.__setattr__(self, "planes", _freeze(planes))

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def height(self) -> int:
        return self.planes.shape[1]


@dataclasses.dataclass(frozen=True)
class OcclusionDetector:
    """Normalized half-plane template over the viewpoint grid for one direction."""

    theta: int
    viewpoints: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        vps = np.asarray(self.viewpoints, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if vps.shape != (len(w), 2):
            raise ValueError("weights must align with viewpoints")
        object.__setattr__(self, "viewpoints", _freeze(vps))
        object.__setattr__(self, "weights", _freeze(w))

    def weight_grid(self, grid_rows: int, grid_cols: int) -> np.ndarray:
        """Weights arranged on the (t, s) grid, zeros where no viewpoint."""
        grid = np.zeros((grid_rows, grid_cols))
        t_half = (grid_rows - 1) / 2
        s_half = (grid_cols - 1) / 2
        for (s, t), w in zip(self.viewpoints, self.weights):
            grid[int(round(t + t_half)), int(round(s + s_half))] = w
        return grid


@dataclasses.dataclass(frozen=True)
class OcclusionResponse:
    """Strongest detector response per pixel and the direction that won."""

    o_max: ScalarMap
    theta_map: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta_map, dtype=np.uint16)
        if theta.shape != self.o_max.data.shape:
            raise ValueError("theta_map must match o_max")
        object.__setattr__(self, "theta_map", _freeze(theta))


def build_lfd(flows: Sequence[FlowPair], u: int, v: int) -> LFD:
    """Gather (s, t, du, dv) for pixel (u, v) from every non-center flow pair."""
    rows = np.empty((len(flows), 4))
    for k, pair in enumerate(flows):
        rows[k, 0] = pair.viewpoint.s
        rows[k, 1] = pair.viewpoint.t
        rows[k, 2] = pair.forward.du[v, u]
        rows[k, 3] = pair.forward.dv[v, u]
    return LFD(rows)


def jacobi_eigh(mats: np.ndarray):
    """Cyclic Jacobi eigendecomposition of batched symmetric 4x4 matrices.

    Sweeps run until the off-diagonal norm of every matrix drops below
    1e-12 (or the float64 floor stalls progress).  Returns ``(eigvals,
    eigvecs)`` with eigenvectors in columns.
    """
    a = np.array(mats, dtype=np.float64, copy=True)
    squeeze = a.ndim == 2
    a = a.reshape(-1, 4, 4)
    n = a.shape[0]
    v = np.tile(np.eye(4), (n, 1, 1))

    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    prev_off = np.inf
    for _ in range(_JACOBI_MAX_SWEEPS):
        off_sq = np.zeros(n)
        for p, q in pairs:
            off_sq += 2.0 * a[:, p, q] ** 2
        off = math.sqrt(float(off_sq.max()))
        if off < _JACOBI_TOL or off >= prev_off:
            break
        prev_off = off
        for p, q in pairs:
            apq = a[:, p, q]
            active = apq != 0.0
            with np.errstate(over="ignore"):
                theta = np.where(active, (a[:, q, q] - a[:, p, p]) / np.where(active, 2.0 * apq, 1.0), 0.0)
            theta = np.clip(theta, -1e150, 1e150)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)  # sign(0) = 0 would stall the rotation
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            ap = a[:, p, :].copy()
            aq = a[:, q, :].copy()
            a[:, p, :] = c[:, None] * ap - s[:, None] * aq
            a[:, q, :] = s[:, None] * ap + c[:, None] * aq
            ap = a[:, :, p].copy()
            aq = a[:, :, q].copy()
            a[:, :, p] = c[:, None] * ap - s[:, None] * aq
            a[:, :, q] = s[:, None] * ap + c[:, None] * aq

            vp = v[:, :, p].copy()
            vq = v[:, :, q].copy()
            v[:, :, p] = c[:, None] * vp - s[:, None] * vq
            v[:, :, q] = s[:, None] * vp + c[:, None] * vq

    eigvals = np.einsum("nii->ni", a).copy()
    if squeeze:
        return eigvals[0], v[0]
    return eigvals, v


def fit_hyperplane(lfd: LFD) -> HyperplaneFit:
    """Least-squares hyperplane through the origin for one pixel's samples.

    The unit normal is the eigenvector of ``A^T A`` for its smallest
    eigenvalue, which is the fit residual (clamped at zero).  A fully zero
    sample set returns the conventional normal (0, 0, 1, 0).
    """
    samples = lfd.samples
    if samples.shape[0] < 3:
        raise ValueError("hyperplane fit needs at least 3 samples")
    g = samples.T @ samples
    if not g.any():
        return HyperplaneFit(normal=np.array([0.0, 0.0, 1.0, 0.0]), residual=0.0)
    eigvals, eigvecs = jacobi_eigh(g)
    i = int(np.argmin(eigvals))
    normal = eigvecs[:, i]
    k = int(np.argmax(np.abs(normal)))
    if normal[k] < 0:
        normal = -normal
    return HyperplaneFit(normal=normal, residual=max(float(eigvals[i]), 0.0))


def scatter_matrices(flows: Sequence[FlowPair]) -> np.ndarray:
    """(H, W, 4, 4) scatter matrix A^T A of the per-pixel samples."""
    h, w = flows[0].forward.du.shape
    g = np.zeros((h, w, 4, 4))
    for pair in flows:
        s, t = pair.viewpoint.s, pair.viewpoint.t
        du, dv = pair.forward.du, pair.forward.dv
        g[..., 0, 0] += s * s
        g[..., 0, 1] += s * t
        g[..., 0, 2] += s * du
        g[..., 0, 3] += s * dv
        g[..., 1, 1] += t * t
        g[..., 1, 2] += t * du
        g[..., 1, 3] += t * dv
        g[..., 2, 2] += du * du
        g[..., 2, 3] += du * dv
        g[..., 3, 3] += dv * dv
    for i in range(4):
        for j in range(i + 1, 4):
            g[..., j, i] = g[..., i, j]
    return g


def linearity_map(flows: Sequence[FlowPair], lightfield: LightField) -> ScalarMap:
    """Hyperplane-fit residual at every pixel of the reference view."""
    h, w = lightfield.height, lightfield.width
    if flows[0].forward.du.shape != (h, w):
        raise ValueError("flow shape does not match the light field")
    g = scatter_matrices(flows).reshape(-1, 4, 4)
    eigvals, _ = jacobi_eigh(g)
    res = np.clip(eigvals.min(axis=1), 0.0, None)
    return ScalarMap(res.reshape(h, w))


def fb_error(pair: FlowPair, u, v):
    """Forward-backward geometric error at pixel(s) (u, v) of the center view."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    fu = pair.forward.du[v.astype(np.intp), u.astype(np.intp)]
    fv = pair.forward.dv[v.astype(np.intp), u.astype(np.intp)]
    bu, bv = sample_flow(pair.backward, u + fu, v + fv)
    err = np.hypot(fu + bu, fv + bv)
    return float(err) if err.ndim == 0 else err


def fb_error_map(pair: FlowPair) -> np.ndarray:
    h, w = pair.forward.du.shape
    gy, gx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return fb_error(pair, gx, gy)


def consistency_volume(flows: Sequence[FlowPair], tau: float) -> ConsistencyVolume:
    """Binarized matching errors: 0 where e < tau (consistent), 1 otherwise."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    planes = np.stack([(fb_error_map(p) >= tau).astype(np.uint8) for p in flows])
    vps = np.array([[p.viewpoint.s, p.viewpoint.t] for p in flows])
    return ConsistencyVolume(viewpoints=vps, planes=planes)


def directional_detectors(viewpoints: np.ndarray, thetas: Sequence[int] = DIRECTIONS) -> list[OcclusionDetector]:
    """Half-plane occlusion templates over an arbitrary viewpoint set.

    Support is ``{(s, t): s*cos(theta) + t*sin(theta) > 0}``; cells tied on
    the boundary line count only at the grid's extreme corners.  Weights are
    ``1/k`` over the k supported cells so responses live in [0, 1]; the
    center cell is always zero.
    """
    vps = np.asarray(viewpoints, dtype=np.float64)
    s, t = vps[:, 0], vps[:, 1]
    center = (np.abs(s) <= _COORD_TOL) & (np.abs(t) <= _COORD_TOL)
    s_max, t_max = np.abs(s).max(), np.abs(t).max()
    corner = (np.abs(np.abs(s) - s_max) <= _COORD_TOL) & (np.abs(np.abs(t) - t_max) <= _COORD_TOL)

    detectors = []
    for theta in thetas:
        rad = math.radians(theta)
        dot = s * math.cos(rad) + t * math.sin(rad)
        support = (dot > _COORD_TOL) | ((np.abs(dot) <= _COORD_TOL) & corner)
        support &= ~center
        k = int(support.sum())
        if k == 0:
            raise ValueError(f"no viewpoint supports direction {theta}")
        weights = np.where(support, 1.0 / k, 0.0)
        detectors.append(OcclusionDetector(theta=theta, viewpoints=vps, weights=weights))
    return detectors


def make_detectors(grid_rows: int, grid_cols: int) -> list[OcclusionDetector]:
    """The 8 directional detectors for a full odd-sized viewpoint grid."""
    if grid_rows % 2 == 0 or grid_cols % 2 == 0:
        raise ValueError("detector grids require odd dimensions")
    s_half = (grid_cols - 1) // 2
    t_half = (grid_rows - 1) // 2
    vps = [(float(s), float(t)) for t in range(-t_half, t_half + 1) for s in range(-s_half, s_half + 1)]
    return directional_detectors(np.array(vps))


def _align_weights(det: OcclusionDetector, viewpoints: np.ndarray) -> np.ndarray:
    out = np.empty(len(viewpoints))
    for i, (s, t) in enumerate(viewpoints):
        d = np.abs(det.viewpoints[:, 0] - s) + np.abs(det.viewpoints[:, 1] - t)
        j = int(np.argmin(d))
        if d[j] > _COORD_TOL:
            raise ValueError(f"detector has no cell for viewpoint ({s:g}, {t:g})")
        out[i] = det.weights[j]
    return out


def occlusion_response(cv: ConsistencyVolume, detectors: Sequence[OcclusionDetector]) -> OcclusionResponse:
    """Inner products of the consistency bits with every detector.

    ``theta_map`` is the direction of the largest response (ties broken by
    the smallest angle), ``o_max`` the response there.  With the uniform
    1/k weights the product is evaluated as an exact bit count over the
    support divided by k, so full and empty responses are exactly 1 and 0.
    """
    dets = sorted(detectors, key=lambda d: d.theta)
    responses = np.empty((len(dets),) + cv.planes.shape[1:], dtype=np.float64)
    for i, det in enumerate(dets):
        w = _align_weights(det, cv.viewpoints)
        support = w > 0
        k = int(support.sum())
        counts = np.tensordot(support.astype(np.int64), cv.planes.astype(np.int64), axes=(0, 0))
        responses[i] = counts / float(k)
    idx = np.argmax(responses, axis=0)
    thetas = np.array([d.theta for d in dets], dtype=np.uint16)
    o_max = np.take_along_axis(responses, idx[None], axis=0)[0]
    return OcclusionResponse(o_max=ScalarMap(o_max), theta_map=thetas[idx])
