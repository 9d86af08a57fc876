"""Acceptance battery: one test per release criterion, printed pass/fail.

Synthetic scenes run with a consistency tolerance matched to their flow
accuracy (0.9 px for exact flows, 1.8 px for sigma = 0.3 noise); all other
parameters are the stock defaults.  Run with ``pytest -s`` to see the
per-criterion lines.
"""
import dataclasses
import math
import time

import numpy as np
import pytest

from conftest import enumerate_min_energy, random_seggraph
from lfseg.energy import EnergyParams, energy_of
from lfseg.features import (
    ConsistencyVolume,
    linearity_map,
    make_detectors,
    occlusion_response,
)
from lfseg.metrics import prf, threshold_baseline
from lfseg.mincut import max_flow, network_from_seggraph, solve_segmentation
from lfseg.pipeline import PipelineConfig, segment, segment_lightfield
from lfseg.synth import emit, example_scene_spec, generate

EXACT_TAU = 0.9
NOISY_TAU = 1.8
NOISY_SIGMA = 0.3
NOISY_KAPPA = 4.0
BATCH_SEEDS = range(10)


def report(name, ok, detail=""):
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def solver_instances():
    rng = np.random.default_rng(2024)
    out = []
    for _ in range(100):
        r0, r1, bterm, graph = random_seggraph(rng, 4, 4, hi=10.0)
        mask = solve_segmentation(graph)
        value, _ = max_flow(network_from_seggraph(graph))
        out.append((r0, r1, bterm, graph, mask, value))
    return out


@pytest.fixture(scope="module")
def noisy_batch():
    """Ten seeded noisy scenes plus their full/9/5-view segmentations."""
    config25 = PipelineConfig(energy=EnergyParams(tau=NOISY_TAU))
    config9 = dataclasses.replace(config25, subset="uniform9")
    config5 = dataclasses.replace(config25, subset="corners5")
    rows = []
    for seed in BATCH_SEEDS:
        spec = dataclasses.replace(
            example_scene_spec(width=128, height=128, seed=seed, kappa=NOISY_KAPPA),
            noise_sigma=NOISY_SIGMA)
        scene = generate(spec)
        lf = scene.lightfield
        flows = scene.flows
        res25 = segment_lightfield(lf, config25, flows=flows)
        res9 = segment_lightfield(lf, config9, flows=flows)
        res5 = segment_lightfield(lf, config5, flows=flows)
        baseline = threshold_baseline(res25.bundle.linearity, 5.0, res25.bundle.texture)
        rows.append({
            "f25": prf(res25.mask, scene.gt_mask).f_measure,
            "f9": prf(res9.mask, scene.gt_mask).f_measure,
            "f5": prf(res5.mask, scene.gt_mask).f_measure,
            "fb": prf(baseline, scene.gt_mask).f_measure,
        })
    return rows


def test_c1_mincut_optimality(solver_instances):
    t0 = time.perf_counter()
    worst = 0.0
    for r0, r1, bterm, graph, mask, value in solver_instances:
        got = energy_of(mask, r0, r1, bterm, alpha=1.0)
        best, _ = enumerate_min_energy(r0.data, r1.data, bterm.horizontal, bterm.vertical, 1.0)
        worst = max(worst, abs(got - best))
    elapsed = time.perf_counter() - t0
    report("C1 min-cut optimality (100 x 4x4 exhaustive)",
           worst < 1e-9 and elapsed < 30.0,
           f"max |gap|={worst:.2e}, {elapsed:.1f}s")


def test_c2_flow_value_matches_energy(solver_instances):
    worst = 0.0
    for r0, r1, bterm, graph, mask, value in solver_instances:
        worst = max(worst, abs(value - energy_of(mask, r0, r1, bterm, alpha=1.0)))
    report("C2 max-flow equals labeling energy", worst < 1e-9, f"max |diff|={worst:.2e}")


def test_c3_lambertian_linearity():
    spec = example_scene_spec(width=128, height=128, seed=0,
                              with_region=False, with_occluder=False)
    scene = generate(spec)
    t0 = time.perf_counter()
    emap = linearity_map(scene.exact_flows, scene.lightfield)
    elapsed = time.perf_counter() - t0
    exact_ok = emap.data.max() <= 1e-9

    noisy = generate(dataclasses.replace(spec, noise_sigma=0.1))
    med = float(np.median(linearity_map(noisy.flows, noisy.lightfield).data))
    report("C3 Lambertian linearity zero test",
           exact_ok and med < 5.0 and elapsed < 10.0,
           f"max E={emap.data.max():.2e}, noisy median={med:.3f}, {elapsed:.2f}s")


def test_c4_occlusion_direction_recovery():
    detectors = make_detectors(5, 5)
    h, w = 12, 16
    inside = np.zeros((h, w), bool)
    inside[3:9, 4:12] = True
    ok = True
    details = []
    for det in detectors:
        support = det.weights > 0
        planes = np.zeros((24, h, w), np.uint8)
        vps = []
        k = 0
        for (s, t), in_support in zip(det.viewpoints, support):
            if (s, t) == (0.0, 0.0):
                continue
            vps.append((s, t))
            planes[k][inside] = 1 if in_support else 0
            k += 1
        cv = ConsistencyVolume(viewpoints=np.array(vps), planes=planes)
        occ = occlusion_response(cv, detectors)
        hit = (occ.theta_map[inside] == det.theta).all()
        unit = (occ.o_max.data[inside] == 1.0).all()
        quiet = (occ.o_max.data[~inside] == 0.0).all()
        ok &= bool(hit and unit and quiet)
        details.append(f"{det.theta}:{'ok' if hit and unit and quiet else 'BAD'}")
    report("C4 occlusion direction recovery", ok, " ".join(details))


def test_c5_end_to_end_segmentation(tmp_path):
    spec = example_scene_spec(width=128, height=128, seed=0)
    scene = generate(spec)
    emit(scene, tmp_path / "lf", flows="exact")
    config = PipelineConfig(energy=EnergyParams(tau=EXACT_TAU), flow_source=str(tmp_path / "lf"))
    result = segment(tmp_path / "lf", config, tmp_path / "out")
    med = float(np.median(result.bundle.linearity.data[scene.gt_mask.data.astype(bool)]))
    f = prf(result.mask, scene.gt_mask).f_measure
    report("C5 end-to-end synthetic segmentation",
           f >= 0.90 and med >= 3 * config.energy.b,
           f"F={f:.3f} (>=0.90), interior median E={med:.1f} (>= {3 * config.energy.b})")


def test_c6_method_ordering(noisy_batch):
    ours = float(np.mean([r["f25"] for r in noisy_batch]))
    base = float(np.mean([r["fb"] for r in noisy_batch]))
    report("C6 method ordering vs thresholding", ours > base,
           f"F(graph-cut)={ours:.3f} > F(threshold)={base:.3f}")


def test_c7_viewpoint_count_trend(noisy_batch):
    f25 = float(np.mean([r["f25"] for r in noisy_batch]))
    f9 = float(np.mean([r["f9"] for r in noisy_batch]))
    f5 = float(np.mean([r["f5"] for r in noisy_batch]))
    ok = (f25 >= f9 - 0.02) and (f9 >= f5 - 0.02)
    report("C7 viewpoint-count trend", ok, f"F25={f25:.3f} >= F9={f9:.3f} >= F5={f5:.3f}")


def test_c8_unit_closed_forms():
    from lfseg.energy import sigmoid

    sig_ok = sigmoid(5.0, 0.5, 5.0) == 0.5
    b_ok = math.exp(-4.5) == pytest.approx(0.011109, abs=1e-6)
    from lfseg.energy import boundary_term, boundary_weights
    from lfseg.features import OcclusionResponse
    from lfseg.lightfield import ScalarMap

    occ = OcclusionResponse(o_max=ScalarMap(np.array([[1.0, 0.0]])),
                            theta_map=np.array([[0, 0]], np.uint16))
    bterm = boundary_term(boundary_weights(occ), gamma=4.5)
    b_exact = bterm.horizontal[0, 0] == math.exp(-4.5)

    counts = {d.theta: int((d.weights > 0).sum()) for d in make_detectors(5, 5)}
    det_ok = all(counts[t] == 10 for t in (0, 90, 180, 270)) and \
        all(counts[t] == 12 for t in (45, 135, 225, 315))
    report("C8 unit closed forms", sig_ok and b_ok and b_exact and det_ok,
           f"sigmoid@midpoint=0.5:{sig_ok} B=e^-4.5:{b_exact} detector counts 10/12:{det_ok}")


def test_c9_determinism(tmp_path):
    scene = generate(example_scene_spec(width=48, height=48, seed=6,
                                        with_region=False, with_occluder=False))
    emit(scene, tmp_path / "lf", flows=None)
    from lfseg.flow import FlowParams

    runs = []
    for threads, name in ((1, "a"), (4, "b"), (1, "c")):
        config = PipelineConfig(energy=EnergyParams(tau=2.0),
                                flow=FlowParams(levels=2, search_radius_px=5, patch_radius_px=3),
                                threads=threads)
        segment(tmp_path / "lf", config, tmp_path / name)
        runs.append(tmp_path / name)
    ok = True
    for fname in ("mask.png", "E.png", "E_tilde.png", "occ.png", "theta.png"):
        blobs = [(d / fname).read_bytes() for d in runs]
        ok &= blobs[0] == blobs[1] == blobs[2]
    report("C9 determinism across runs and thread counts", ok,
           "byte-identical masks and intermediates")
