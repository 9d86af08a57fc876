"""Two-label segmentation energy over the pixel grid.

Regional costs come from the sigmoid-scaled linearity and the occlusion
response; boundary costs are direction-gated exponentials that make cuts
cheap across detected occlusion boundaries.  ``build_graph`` packages both
as terminal and neighbor capacities whose min cut is the optimal labeling.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.special import expit

from .features import OcclusionResponse
from .lightfield import Mask, ScalarMap

SQRT2 = math.sqrt(2.0)


@dataclasses.dataclass(frozen=True)
class EnergyParams:
    """Pipeline weights; the defaults are the reference operating point."""

    alpha: float = 70.0
    beta: float = 4.5
    gamma: float = 4.5
    a: float = 0.5
    b: float = 5.0
    tau: float = 8.0

    def __post_init__(self):
        vals = dataclasses.astuple(self)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("energy parameters must be finite")
        if self.alpha <= 0 or self.gamma <= 0 or self.a <= 0:
            raise ValueError("alpha, gamma and a must be positive")


@dataclasses.dataclass(frozen=True)
class DirectedWeights:
    """Per-pixel weight toward each 4-neighbor (right, up, left, down)."""

    right: np.ndarray
    up: np.ndarray
    left: np.ndarray
    down: np.ndarray


@dataclasses.dataclass(frozen=True)
class BoundaryTerm:
    """Undirected per-edge penalties; horizontal is (H, W-1), vertical (H-1, W)."""

    horizontal: np.ndarray
    vertical: np.ndarray


@dataclasses.dataclass(frozen=True)
class SegGraph:
    """Capacities of the segmentation network (t-links and 4-neighbor n-links)."""

    cap_src: np.ndarray
    cap_snk: np.ndarray
    ncap_h: np.ndarray
    ncap_v: np.ndarray

    def __post_init__(self):
        h, w = self.cap_src.shape
        if self.cap_snk.shape != (h, w):
            raise ValueError("terminal capacity shapes differ")
        if self.ncap_h.shape != (h, max(w - 1, 0)) or self.ncap_v.shape != (max(h - 1, 0), w):
            raise ValueError("neighbor capacity shapes are inconsistent")
        for arr in (self.cap_src, self.cap_snk, self.ncap_h, self.ncap_v):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError("capacities must be finite and nonnegative")

    @property
    def width(self) -> int:
        return self.cap_src.shape[1]

    @property
    def height(self) -> int:
        return self.cap_src.shape[0]


Labeling = Mask


def sigmoid(phi, a: float, b: float):
    """Overflow-safe ``1 / (1 + exp(-a * (phi - b)))``."""
    out = expit(a * (np.asarray(phi, dtype=np.float64) - b))
    return float(out) if out.ndim == 0 else out


def scale_linearity(linearity: ScalarMap, a: float, b: float) -> ScalarMap:
    """Squash raw residuals into (0, 1); ``b`` acts as the soft threshold."""
    return ScalarMap(sigmoid(linearity.data, a, b))


def regional_terms(e_tilde: ScalarMap, occ: OcclusionResponse, texture: Mask, beta: float):
    """Label costs per pixel.

    Textured pixels pay ``beta * E~ * (1 - O~)`` for background and
    ``E~ * O~ + (1 - E~)`` for foreground.  Textureless pixels are forced to
    background (0 against ``beta``).
    """
    et = e_tilde.data
    om = occ.o_max.data
    if et.shape != om.shape or et.shape != texture.data.shape:
        raise ValueError("map shapes differ")
    tex = texture.data.astype(bool)
    r0 = np.where(tex, beta * et * (1.0 - om), 0.0)
    r1 = np.where(tex, et * om + (1.0 - et), beta)
    return ScalarMap(r0), ScalarMap(r1)


def boundary_weights(occ: OcclusionResponse) -> DirectedWeights:
    """Distribute each pixel's response onto the edges along its direction.

    Axis directions put the full response on the single neighbor they point
    at; diagonal directions split it as ``O~ / sqrt(2)`` over the two
    adjacent axis neighbors.  Neighbor convention (v axis pointing down):
    0 -> right, 90 -> up, 180 -> left, 270 -> down.
    """
    om = occ.o_max.data
    th = occ.theta_map
    right = np.zeros_like(om)
    up = np.zeros_like(om)
    left = np.zeros_like(om)
    down = np.zeros_like(om)
    diag = om / SQRT2
    for theta, targets in (
        (0, (right,)),
        (45, (right, up)),
        (90, (up,)),
        (135, (up, left)),
        (180, (left,)),
        (225, (left, down)),
        (270, (down,)),
        (315, (down, right)),
    ):
        m = th == theta
        val = om if len(targets) == 1 else diag
        for tgt in targets:
            tgt[m] = val[m]
    return DirectedWeights(right=right, up=up, left=left, down=down)


def boundary_term(w: DirectedWeights, gamma: float) -> BoundaryTerm:
    """Undirected edge penalty ``exp(-gamma * (w_pq + w_qp))`` per 4-neighbor edge."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    bh = np.exp(-gamma * (w.right[:, :-1] + w.left[:, 1:]))
    bv = np.exp(-gamma * (w.down[:-1, :] + w.up[1:, :]))
    return BoundaryTerm(horizontal=bh, vertical=bv)


def build_graph(r0: ScalarMap, r1: ScalarMap, b: BoundaryTerm, alpha: float) -> SegGraph:
    """Assemble the min-cut instance: label-1 pixels end up on the source side."""
    return SegGraph(
        cap_src=r0.data.copy(),
        cap_snk=r1.data.copy(),
        ncap_h=alpha * b.horizontal,
        ncap_v=alpha * b.vertical,
    )


def energy_of(labeling: Labeling, r0: ScalarMap, r1: ScalarMap, b: BoundaryTerm, alpha: float) -> float:
    """Total labeling cost; each undirected neighbor edge counted once."""
    lab = labeling.data
    if lab.shape != r0.data.shape:
        raise ValueError("labeling shape differs from the cost maps")
    unary = float(np.where(lab == 1, r1.data, r0.data).sum())
    cut_h = lab[:, :-1] != lab[:, 1:]
    cut_v = lab[:-1, :] != lab[1:, :]
    pairwise = float(b.horizontal[cut_h].sum() + b.vertical[cut_v].sum())
    return unary + alpha * pairwise
