"""End-to-end orchestration: flows, features, energy assembly, min cut.

``segment_lightfield`` is the in-memory pipeline; ``segment`` and
``features_dump`` wrap it with directory I/O.  Per-view flow computation may
run on a thread pool; results are assembled by view index so the output is
independent of the worker count.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .energy import (
    EnergyParams,
    boundary_term,
    boundary_weights,
    build_graph,
    energy_of,
    regional_terms,
    scale_linearity,
)
from .features import (
    ConsistencyVolume,
    OcclusionResponse,
    consistency_volume,
    directional_detectors,
    linearity_map,
    occlusion_response,
)
from .flow import FlowField, FlowPair, FlowParams, compute_flow, load_flo, texture_mask
from .lightfield import (
    LightField,
    Mask,
    ScalarMap,
    load_lightfield,
    write_gray,
    write_mask,
    write_scalar_map,
)
from .mincut import max_flow, network_from_seggraph
from .synth import coord_tag

SUBSETS = ("all", "corners5", "uniform9")


class FlowSourceMissingError(Exception):
    """Configured flow import directory or file is absent."""


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    energy: EnergyParams = EnergyParams()
    flow: FlowParams = FlowParams()
    texture_window: int = 4
    texture_thresh: float = 16.0
    flow_source: str = "builtin"
    subset: str = "all"
    threads: int = 1

    def __post_init__(self):
        if self.subset not in SUBSETS:
            raise ValueError(f"subset must be one of {SUBSETS}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclasses.dataclass(frozen=True)
class FeatureBundle:
    lightfield: LightField
    flows: tuple[FlowPair, ...]
    texture: Mask
    linearity: ScalarMap
    e_tilde: ScalarMap
    consistency: ConsistencyVolume
    occlusion: OcclusionResponse
    flow_seconds: float
    feature_seconds: float


@dataclasses.dataclass(frozen=True)
class SegmentResult:
    bundle: FeatureBundle
    r0: ScalarMap
    r1: ScalarMap
    mask: Mask
    energy_value: float
    flow_value: float
    solve_seconds: float


def select_viewpoint_indices(lf: LightField, selector: str) -> list[int]:
    """Indices of the views a subset keeps; always includes the center."""
    vps = lf.viewpoints
    if selector == "all":
        return list(range(lf.num_views))
    s_max = float(np.abs(vps[:, 0]).max())
    t_max = float(np.abs(vps[:, 1]).max())
    if selector == "corners5":
        wanted = [(0.0, 0.0)] + [(ss * s_max, tt * t_max) for ss in (-1, 1) for tt in (-1, 1)]
    elif selector == "uniform9":
        wanted = [(ss, tt) for tt in (-t_max, 0.0, t_max) for ss in (-s_max, 0.0, s_max)]
    else:
        raise ValueError(f"unknown selector {selector!r}")
    indices = []
    for s, t in wanted:
        hit = np.flatnonzero((np.abs(vps[:, 0] - s) < 1e-9) & (np.abs(vps[:, 1] - t) < 1e-9))
        if len(hit) != 1:
            raise ValueError(f"selector {selector!r} needs viewpoint ({s:g}, {t:g}) which the grid lacks")
        indices.append(int(hit[0]))
    return indices


def subset_views(lf: LightField, flows, selector: str):
    """Reduce a light field plus its flows to a viewpoint subset.

    Returns ``(lightfield, flows, detectors)`` with occlusion detectors
    rebuilt over the remaining cells.  The reduced set must leave at least
    4 non-center samples for the hyperplane fit.
    """
    indices = select_viewpoint_indices(lf, selector)
    if len(indices) - 1 < 4:
        raise ValueError("viewpoint subset leaves fewer than 4 samples")
    reduced = LightField(
        grid_rows=lf.grid_rows,
        grid_cols=lf.grid_cols,
        views=lf.views[indices].copy(),
        viewpoints=lf.viewpoints[indices].copy(),
        center_index=indices.index(lf.center_index),
    )
    kept = {(float(lf.viewpoints[i, 0]), float(lf.viewpoints[i, 1])) for i in indices}
    reduced_flows = tuple(p for p in flows if (p.viewpoint.s, p.viewpoint.t) in kept)
    if len(reduced_flows) != len(indices) - 1:
        raise ValueError("flows do not cover the selected viewpoints")
    noncenter = reduced.viewpoints[[i for i in range(reduced.num_views) if i != reduced.center_index]]
    return reduced, reduced_flows, directional_detectors(noncenter)


def _flow_cache_key(src: np.ndarray, dst: np.ndarray, params: FlowParams) -> str:
    h = hashlib.sha256()
    h.update(src.tobytes())
    h.update(dst.tobytes())
    h.update(repr(dataclasses.astuple(params)).encode())
    return h.hexdigest()[:24]


def _computed_flow(src, dst, params: FlowParams, cache_dir: Path | None) -> FlowField:
    if cache_dir is None:
        return compute_flow(src, dst, params)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{_flow_cache_key(src, dst, params)}.npy"
    if path.is_file():
        data = np.load(path)
        return FlowField(data[0], data[1])
    flow = compute_flow(src, dst, params)
    np.save(path, np.stack([flow.du, flow.dv]))
    return flow


def _builtin_flows(lf: LightField, indices, config: PipelineConfig, cache_dir: Path | None):
    center = lf.center_view
    noncenter = [i for i in indices if i != lf.center_index]

    def one(i: int) -> FlowPair:
        view = lf.views[i]
        return FlowPair(
            viewpoint=lf.viewpoint(i),
            forward=_computed_flow(center, view, config.flow, cache_dir),
            backward=_computed_flow(view, center, config.flow, cache_dir),
        )

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return tuple(pool.map(one, noncenter))
    return tuple(one(i) for i in noncenter)


def _imported_flows(lf: LightField, indices, flow_dir: Path):
    if not flow_dir.is_dir():
        raise FlowSourceMissingError(f"flow import directory {flow_dir} does not exist")
    pairs = []
    for i in indices:
        if i == lf.center_index:
            continue
        vp = lf.viewpoint(i)
        f_path = flow_dir / f"flow_f_{coord_tag(vp.s)}_{coord_tag(vp.t)}.flo"
        b_path = flow_dir / f"flow_b_{coord_tag(vp.s)}_{coord_tag(vp.t)}.flo"
        for p in (f_path, b_path):
            if not p.is_file():
                raise FlowSourceMissingError(f"missing flow file {p}")
        fwd = load_flo(f_path)
        bwd = load_flo(b_path)
        if fwd.du.shape != (lf.height, lf.width) or bwd.du.shape != (lf.height, lf.width):
            raise FlowSourceMissingError(f"flow files for view ({vp.s:g}, {vp.t:g}) have the wrong size")
        pairs.append(FlowPair(viewpoint=vp, forward=fwd, backward=bwd))
    return tuple(pairs)


def compute_features(
    lf: LightField,
    config: PipelineConfig,
    cache_dir: Path | None = None,
    flows=None,
) -> FeatureBundle:
    """Flows (computed, imported, or passed in), texture mask, linearity, occlusion.

    ``flows`` may inject in-memory flow pairs covering every non-center view
    of the light field; the configured flow source is then ignored.
    """
    indices = select_viewpoint_indices(lf, config.subset)
    if len(indices) - 1 < 4:
        raise ValueError("viewpoint subset leaves fewer than 4 samples")
    sub = LightField(
        grid_rows=lf.grid_rows,
        grid_cols=lf.grid_cols,
        views=lf.views[indices].copy(),
        viewpoints=lf.viewpoints[indices].copy(),
        center_index=indices.index(lf.center_index),
    ) if config.subset != "all" else lf

    t0 = time.perf_counter()
    if flows is not None:
        kept = {(float(lf.viewpoints[i, 0]), float(lf.viewpoints[i, 1]))
                for i in indices if i != lf.center_index}
        flows = tuple(p for p in flows if (p.viewpoint.s, p.viewpoint.t) in kept)
        if len(flows) != len(indices) - 1:
            raise ValueError("injected flows do not cover the selected viewpoints")
    elif config.flow_source == "builtin":
        flows = _builtin_flows(lf, indices, config, cache_dir)
    else:
        flows = _imported_flows(lf, indices, Path(config.flow_source))
    t1 = time.perf_counter()

    texture = texture_mask(sub.center_view, config.texture_window, config.texture_thresh)
    linearity = linearity_map(flows, sub)
    e_tilde = scale_linearity(linearity, config.energy.a, config.energy.b)
    cv = consistency_volume(flows, config.energy.tau)
    noncenter = sub.viewpoints[[i for i in range(sub.num_views) if i != sub.center_index]]
    occ = occlusion_response(cv, directional_detectors(noncenter))
    t2 = time.perf_counter()

    return FeatureBundle(
        lightfield=sub,
        flows=flows,
        texture=texture,
        linearity=linearity,
        e_tilde=e_tilde,
        consistency=cv,
        occlusion=occ,
        flow_seconds=t1 - t0,
        feature_seconds=t2 - t1,
    )


def segment_lightfield(
    lf: LightField,
    config: PipelineConfig,
    cache_dir: Path | None = None,
    flows=None,
) -> SegmentResult:
    bundle = compute_features(lf, config, cache_dir, flows=flows)
    params = config.energy
    r0, r1 = regional_terms(bundle.e_tilde, bundle.occlusion, bundle.texture, params.beta)
    bterm = boundary_term(boundary_weights(bundle.occlusion), params.gamma)
    graph = build_graph(r0, r1, bterm, params.alpha)

    t0 = time.perf_counter()
    flow_value, reach = max_flow(network_from_seggraph(graph))
    mask = Mask(reach[: graph.height * graph.width].astype(np.uint8).reshape(graph.height, graph.width))
    t1 = time.perf_counter()

    return SegmentResult(
        bundle=bundle,
        r0=r0,
        r1=r1,
        mask=mask,
        energy_value=energy_of(mask, r0, r1, bterm, params.alpha),
        flow_value=flow_value,
        solve_seconds=t1 - t0,
    )


def _write_intermediates(bundle: FeatureBundle, out: Path) -> None:
    write_scalar_map(bundle.linearity, out / "E.png")
    write_scalar_map(bundle.e_tilde, out / "E_tilde.png")
    write_scalar_map(bundle.occlusion.o_max, out / "occ.png")
    write_gray((bundle.occlusion.theta_map // 45).astype(np.uint8) * 36, out / "theta.png")


def segment(lf_dir, config: PipelineConfig, out_dir) -> SegmentResult:
    """Run the full pipeline on a light-field directory and write results.

    Produces ``mask.png`` plus the intermediate maps and a ``run.json``
    summary (energy value, pixel counts, timings).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lf = load_lightfield(lf_dir)
    result = segment_lightfield(lf, config, cache_dir=out / "flow_cache")
    write_mask(result.mask, out / "mask.png")
    _write_intermediates(result.bundle, out)
    summary = {
        "width": lf.width,
        "height": lf.height,
        "views_used": result.bundle.lightfield.num_views,
        "energy": result.energy_value,
        "max_flow": result.flow_value,
        "foreground_pixels": int(result.mask.data.sum()),
        "background_pixels": int((1 - result.mask.data).sum()),
        "textureless_pixels": int((1 - result.bundle.texture.data).sum()),
        "timings": {
            "flow_seconds": result.bundle.flow_seconds,
            "feature_seconds": result.bundle.feature_seconds,
            "solve_seconds": result.solve_seconds,
        },
    }
    (out / "run.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return result


def features_dump(lf_dir, config: PipelineConfig, out_dir) -> FeatureBundle:
    """Compute and write the intermediate maps without segmenting."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lf = load_lightfield(lf_dir)
    bundle = compute_features(lf, config, cache_dir=out / "flow_cache")
    _write_intermediates(bundle, out)
    return bundle


def flow_dump(lf_dir, config: PipelineConfig, out_dir) -> None:
    """Compute builtin flows for every non-center view and write a .flo cache."""
    from .flow import save_flo

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lf = load_lightfield(lf_dir)
    flows = _builtin_flows(lf, list(range(lf.num_views)), config, cache_dir=None)
    for pair in flows:
        s, t = pair.viewpoint
        save_flo(pair.forward, out / f"flow_f_{coord_tag(s)}_{coord_tag(t)}.flo")
        save_flo(pair.backward, out / f"flow_b_{coord_tag(s)}_{coord_tag(t)}.flo")
