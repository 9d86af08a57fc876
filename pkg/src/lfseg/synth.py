"""Synthetic light fields with analytically known ground truth.

Scenes are layered: a textured background plane with uniform disparity, an
optional refractive patch whose per-view displacement picks up a radial
linear term and a quadratic term (the quadratic part is what breaks the
per-pixel hyperplane model), and opaque occluders with larger disparity.
Because every layer's displacement is analytic, the generator can emit
exact forward/backward flows and exact per-view visibility masks.
"""
from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Union

import numpy as np

from .flow import FlowField, FlowPair, save_flo
from .lightfield import LightField, Mask, Viewpoint, write_gray, write_mask

_INVERSE_ITERS = 60
_INVERSE_TOL = 1e-12
_SRC_TOL = 1e-6

_K1 = np.uint64(0x9E3779B97F4A7C15)
_K2 = np.uint64(0xC2B2AE3D27D4EB4F)
_K3 = np.uint64(0x165667B19E3779F9)
_M1 = np.uint64(0xFF51AFD7ED558CCD)
_M2 = np.uint64(0xC4CEB9FE1A85EC53)
_33 = np.uint64(33)


@dataclasses.dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float

    def contains(self, x, y):
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.radius**2

    def radial(self, x, y):
        return np.hypot(x - self.cx, y - self.cy) / self.radius

    def bbox(self):
        return (self.cx - self.radius, self.cy - self.radius,
                self.cx + self.radius, self.cy + self.radius)


@dataclasses.dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, x, y):
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)

    def radial(self, x, y):
        cx, cy = 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)
        half_diag = 0.5 * math.hypot(self.x1 - self.x0, self.y1 - self.y0)
        return np.hypot(x - cx, y - cy) / half_diag

    def bbox(self):
        return (self.x0, self.y0, self.x1, self.y1)


Shape = Union[Disk, Rect]


@dataclasses.dataclass(frozen=True)
class RefractiveRegion:
    """Transparent patch: base disparity plus radial and quadratic distortion.

    For a point with normalized radial offset ``r`` the displacement seen
    from view (s, t) is::

        du = (d + kappa * r) * s + kappa2 * s**2
        dv = (d + kappa * r) * t + kappa2 * t**2

    The quadratic ``kappa2`` term is what makes the per-pixel samples leave
    the hyperplane; the radial ``kappa`` term displaces the refracted
    footprint relative to the background near the silhouette, which is what
    gives the boundary its occlusion signature.
    """

    shape: Shape
    disparity: float = 0.5
    kappa: float = 2.5
    kappa2: float = 1.5


@dataclasses.dataclass(frozen=True)
class Occluder:
    shape: Shape
    disparity: float


@dataclasses.dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    grid_rows: int = 5
    grid_cols: int = 5
    bg_disparity: float = 0.5
    texture_seed: int = 0
    region: RefractiveRegion | None = None
    occluders: tuple[Occluder, ...] = ()
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ValueError("scene too small")
        if self.grid_rows % 2 == 0 or self.grid_cols % 2 == 0:
            raise ValueError("viewpoint grid must have odd dimensions")
        for occ in self.occluders:
            if not occ.disparity > self.bg_disparity:
                raise ValueError("occluders must be nearer than the background")
        if self.region is not None:
            x0, y0, x1, y1 = self.region.shape.bbox()
            if x0 < 0 or y0 < 0 or x1 > self.width - 1 or y1 > self.height - 1:
                raise ValueError("transparent region exceeds image bounds")


@dataclasses.dataclass(frozen=True)
class SynthScene:
    lightfield: LightField
    gt_mask: Mask
    exact_flows: tuple[FlowPair, ...]
    occlusion_gt: tuple[Mask, ...]
    noisy_flows: tuple[FlowPair, ...] | None = None

    @property
    def flows(self) -> tuple[FlowPair, ...]:
        """The flows an observer of this scene would work with."""
        return self.noisy_flows if self.noisy_flows is not None else self.exact_flows


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        h = ix.astype(np.uint64) * _K1
        h ^= iy.astype(np.uint64) * _K2
        h ^= np.uint64(seed % (1 << 64)) * _K3
        h ^= h >> _33
        h *= _M1
        h ^= h >> _33
        h *= _M2
        h ^= h >> _33
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _value_noise(x: np.ndarray, y: np.ndarray, wavelength: float, seed: int) -> np.ndarray:
    gx = np.asarray(x, dtype=np.float64) / wavelength
    gy = np.asarray(y, dtype=np.float64) / wavelength
    ix = np.floor(gx)
    iy = np.floor(gy)
    fx = gx - ix
    fy = gy - iy
    wx = fx * fx * (3.0 - 2.0 * fx)
    wy = fy * fy * (3.0 - 2.0 * fy)
    ix = ix.astype(np.int64)
    iy = iy.astype(np.int64)
    v00 = _hash01(ix, iy, seed)
    v10 = _hash01(ix + 1, iy, seed)
    v01 = _hash01(ix, iy + 1, seed)
    v11 = _hash01(ix + 1, iy + 1, seed)
    top = v00 * (1 - wx) + v10 * wx
    bot = v01 * (1 - wx) + v11 * wx
    return top * (1 - wy) + bot * wy


_OCTAVES = ((17.0, 70.0), (5.9, 56.0), (2.3, 56.0), (1.55, 52.0))


def texture(x, y, seed: int) -> np.ndarray:
    """Band-limited value noise over all of R^2, roughly spanning [11, 245].

    The fine octaves keep the windowed horizontal-gradient energy above the
    default textureless threshold at every pixel.
    """
    val = np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, 128.0)
    for k, (wavelength, amp) in enumerate(_OCTAVES):
        val += amp * (_value_noise(x, y, wavelength, seed * 8 + k + 1) - 0.5)
    return val


def _grid_viewpoints(rows: int, cols: int) -> np.ndarray:
    s_half = (cols - 1) // 2
    t_half = (rows - 1) // 2
    return np.array(
        [(float(s), float(t)) for t in range(-t_half, t_half + 1) for s in range(-s_half, s_half + 1)]
    )


def _region_displacement(region: RefractiveRegion, x, y, s: float, t: float):
    r = region.shape.radial(x, y)
    lin = region.disparity + region.kappa * r
    return lin * s + region.kappa2 * s * s, lin * t + region.kappa2 * t * t


def _region_inverse(region: RefractiveRegion, qx, qy, s: float, t: float):
    """Solve p + D(p) = q for the region displacement by fixed-point iteration."""
    px = qx - (region.disparity * s + region.kappa2 * s * s)
    py = qy - (region.disparity * t + region.kappa2 * t * t)
    for _ in range(_INVERSE_ITERS):
        dx, dy = _region_displacement(region, px, py, s, t)
        nx = qx - dx
        ny = qy - dy
        delta = np.max(np.abs(nx - px)) + np.max(np.abs(ny - py))
        px, py = nx, ny
        if delta < _INVERSE_TOL:
            break
    return px, py


def _visibility(spec: SceneSpec, s: float, t: float, qx: np.ndarray, qy: np.ndarray):
    """Visible layer id and its center-view source point at view positions q.

    Layers: 0 background, 1 region, 2+i occluder i (occluders sorted by
    disparity, nearest wins).
    """
    layer = np.zeros(qx.shape, dtype=np.int32)
    src_x = qx - spec.bg_disparity * s
    src_y = qy - spec.bg_disparity * t

    if spec.region is not None:
        px, py = _region_inverse(spec.region, qx, qy, s, t)
        inside = spec.region.shape.contains(px, py)
        for occ in spec.occluders:
            inside &= ~occ.shape.contains(px, py)
        layer[inside] = 1
        src_x = np.where(inside, px, src_x)
        src_y = np.where(inside, py, src_y)

    order = sorted(range(len(spec.occluders)), key=lambda i: spec.occluders[i].disparity)
    for i in order:
        occ = spec.occluders[i]
        ox = qx - occ.disparity * s
        oy = qy - occ.disparity * t
        inside = occ.shape.contains(ox, oy)
        layer[inside] = 2 + i
        src_x = np.where(inside, ox, src_x)
        src_y = np.where(inside, oy, src_y)
    return layer, src_x, src_y


def _layer_texture(spec: SceneSpec, layer: np.ndarray, src_x: np.ndarray, src_y: np.ndarray):
    img = texture(src_x, src_y, spec.texture_seed)
    for i, _ in enumerate(spec.occluders):
        m = layer == 2 + i
        if m.any():
            img[m] = texture(src_x[m], src_y[m], spec.texture_seed + 7919 * (i + 1))
    return np.rint(np.clip(img, 0, 255)).astype(np.uint8)


def _forward_displacement(spec: SceneSpec, layer: np.ndarray, x, y, s: float, t: float):
    du = np.full(layer.shape, spec.bg_disparity * s)
    dv = np.full(layer.shape, spec.bg_disparity * t)
    if spec.region is not None:
        m = layer == 1
        if m.any():
            ru, rv = _region_displacement(spec.region, x[m], y[m], s, t)
            du[m] = ru
            dv[m] = rv
    for i, occ in enumerate(spec.occluders):
        m = layer == 2 + i
        du[m] = occ.disparity * s
        dv[m] = occ.disparity * t
    return du, dv


def generate(spec: SceneSpec) -> SynthScene:
    """Render all views plus exact flows, ground-truth mask, and visibility."""
    h, w = spec.height, spec.width
    gy, gx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    vps = _grid_viewpoints(spec.grid_rows, spec.grid_cols)
    center_index = int(np.flatnonzero((vps[:, 0] == 0) & (vps[:, 1] == 0))[0])

    center_layer, _, _ = _visibility(spec, 0.0, 0.0, gx, gy)
    gt = spec.region.shape.contains(gx, gy) if spec.region is not None else np.zeros((h, w), bool)

    views = []
    flows = []
    occ_gt = []
    for idx, (s, t) in enumerate(vps):
        layer, src_x, src_y = _visibility(spec, s, t, gx, gy)
        views.append(_layer_texture(spec, layer, src_x, src_y))
        if idx == center_index:
            continue
        fdu, fdv = _forward_displacement(spec, center_layer, gx, gy, s, t)
        vis_layer, vis_src_x, vis_src_y = _visibility(spec, s, t, gx + fdu, gy + fdv)
        hidden = (vis_layer != center_layer) | (np.abs(vis_src_x - gx) > _SRC_TOL) | (np.abs(vis_src_y - gy) > _SRC_TOL)
        occ_gt.append(Mask(hidden.astype(np.uint8)))
        # a matcher cannot track appearance behind an opaque cover: pixels
        # whose target lands on an occluder pick up the occluder's motion
        corrupt = hidden & (vis_layer >= 2)
        fdu = np.where(corrupt, (gx + fdu) - vis_src_x, fdu)
        fdv = np.where(corrupt, (gy + fdv) - vis_src_y, fdv)
        bdu = src_x - gx
        bdv = src_y - gy
        flows.append(FlowPair(
            viewpoint=Viewpoint(float(s), float(t)),
            forward=FlowField(fdu, fdv),
            backward=FlowField(bdu, bdv),
        ))

    lf = LightField(
        grid_rows=spec.grid_rows,
        grid_cols=spec.grid_cols,
        views=np.stack(views),
        viewpoints=vps,
        center_index=center_index,
    )

    noisy = None
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.rng_seed)
        noisy = tuple(
            FlowPair(
                viewpoint=p.viewpoint,
                forward=FlowField(
                    p.forward.du + rng.normal(0.0, spec.noise_sigma, (h, w)),
                    p.forward.dv + rng.normal(0.0, spec.noise_sigma, (h, w)),
                ),
                backward=FlowField(
                    p.backward.du + rng.normal(0.0, spec.noise_sigma, (h, w)),
                    p.backward.dv + rng.normal(0.0, spec.noise_sigma, (h, w)),
                ),
            )
            for p in flows
        )

    return SynthScene(
        lightfield=lf,
        gt_mask=Mask(gt.astype(np.uint8)),
        exact_flows=tuple(flows),
        occlusion_gt=tuple(occ_gt),
        noisy_flows=noisy,
    )


def coord_tag(x: float) -> str:
    return f"{x:g}"


def emit(scene: SynthScene, dir_path, flows: str | None = "auto") -> None:
    """Write the light-field directory plus ``gt_mask.png``.

    ``flows`` selects which displacement fields go into the ``.flo`` cache:
    "auto" (noisy when present, exact otherwise), "exact", "noisy", or None
    to skip flow files.
    """
    out = Path(dir_path)
    out.mkdir(parents=True, exist_ok=True)
    lf = scene.lightfield

    lines = [f"grid_rows={lf.grid_rows}", f"grid_cols={lf.grid_cols}"]
    for i in range(lf.num_views):
        s, t = lf.viewpoints[i]
        fname = f"view_{i:02d}.png"
        lines.append(f"view {i} {coord_tag(s)} {coord_tag(t)} {fname}")
        write_gray(lf.views[i], out / fname)
    (out / "manifest").write_text("\n".join(lines) + "\n")

    write_mask(scene.gt_mask, out / "gt_mask.png")

    if flows is not None:
        if flows == "auto":
            pairs = scene.flows
        elif flows == "exact":
            pairs = scene.exact_flows
        elif flows == "noisy":
            if scene.noisy_flows is None:
                raise ValueError("scene has no noisy flows")
            pairs = scene.noisy_flows
        else:
            raise ValueError(f"unknown flows selector {flows!r}")
        for pair in pairs:
            s, t = pair.viewpoint
            save_flo(pair.forward, out / f"flow_f_{coord_tag(s)}_{coord_tag(t)}.flo")
            save_flo(pair.backward, out / f"flow_b_{coord_tag(s)}_{coord_tag(t)}.flo")


def parse_scene_spec(path) -> SceneSpec:
    """Read a key=value scene description.

    Recognized keys: width, height, grid_rows, grid_cols, bg_disparity,
    texture_seed, rng_seed, noise_sigma, region (``disk cx cy r`` or
    ``rect x0 y0 x1 y1``), region_disparity, region_kappa, region_kappa2,
    and repeatable ``occluder=<shape...> <disparity>`` lines.
    """
    ints = {"width": None, "height": None, "grid_rows": 5, "grid_cols": 5,
            "texture_seed": 0, "rng_seed": 0}
    floats = {"bg_disparity": 0.5, "noise_sigma": 0.0, "region_disparity": 0.5,
              "region_kappa": 2.5, "region_kappa2": 1.5}
    region_shape: Shape | None = None
    occluders: list[Occluder] = []

    def parse_shape(tokens: list[str]) -> Shape:
        kind = tokens[0]
        args = [float(v) for v in tokens[1:]]
        if kind == "disk" and len(args) == 3:
            return Disk(*args)
        if kind == "rect" and len(args) == 4:
            return Rect(*args)
        raise ValueError(f"bad shape spec: {' '.join(tokens)}")

    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key in ints:
                ints[key] = int(value)
            elif key in floats:
                floats[key] = float(value)
            elif key == "region":
                region_shape = parse_shape(value.split())
            elif key == "occluder":
                tokens = value.split()
                occluders.append(Occluder(shape=parse_shape(tokens[:-1]), disparity=float(tokens[-1])))
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"scene spec line {lineno}: {exc}") from exc

    if ints["width"] is None or ints["height"] is None:
        raise ValueError("scene spec must set width and height")
    region = None
    if region_shape is not None:
        region = RefractiveRegion(
            shape=region_shape,
            disparity=floats["region_disparity"],
            kappa=floats["region_kappa"],
            kappa2=floats["region_kappa2"],
        )
    return SceneSpec(
        width=ints["width"],
        height=ints["height"],
        grid_rows=ints["grid_rows"],
        grid_cols=ints["grid_cols"],
        bg_disparity=floats["bg_disparity"],
        texture_seed=ints["texture_seed"],
        region=region,
        occluders=tuple(occluders),
        noise_sigma=floats["noise_sigma"],
        rng_seed=ints["rng_seed"],
    )


def example_scene_spec(
    width: int = 128,
    height: int = 128,
    seed: int = 0,
    with_region: bool = True,
    with_occluder: bool = True,
    noise_sigma: float = 0.0,
    kappa: float = 2.5,
    kappa2: float = 1.5,
) -> SceneSpec:
    """The stock disk-plus-occluder benchmark scene at a given size and seed.

    Noisy batches should raise ``kappa`` (to about 4) so the silhouette
    displacement gap stays above a consistency tolerance that itself has to
    sit above the flow-noise floor.
    """
    region = None
    if with_region:
        radius = 0.28 * min(width, height)
        region = RefractiveRegion(
            shape=Disk(cx=0.56 * width, cy=0.55 * height, radius=radius),
            disparity=0.5,
            kappa=kappa,
            kappa2=kappa2,
        )
    occluders = ()
    if with_occluder:
        occluders = (Occluder(shape=Rect(
            x0=0.04 * width, y0=0.05 * height,
            x1=0.17 * width, y1=0.18 * height,
        ), disparity=2.5),)
    return SceneSpec(
        width=width,
        height=height,
        bg_disparity=0.5,
        texture_seed=seed,
        region=region,
        occluders=occluders,
        noise_sigma=noise_sigma,
        rng_seed=seed,
    )
