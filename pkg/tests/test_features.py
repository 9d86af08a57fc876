import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_smallest_eig
from lfseg.features import (
    ConsistencyVolume,
    LFD,
    build_lfd,
    consistency_volume,
    fb_error,
    fit_hyperplane,
    jacobi_eigh,
    linearity_map,
    make_detectors,
    occlusion_response,
)
from lfseg.flow import FlowField, FlowPair
from lfseg.lightfield import LightField, Viewpoint


def grid_viewpoints(n=2):
    return [(float(s), float(t)) for t in range(-n, n + 1) for s in range(-n, n + 1) if (s, t) != (0, 0)]


def flows_from_field(fn, w=6, h=5, n=2):
    """Build one FlowPair per non-center viewpoint with du, dv = fn(s, t, x, y)."""
    gy, gx = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    pairs = []
    for s, t in grid_viewpoints(n):
        du, dv = fn(s, t, gx, gy)
        du = np.broadcast_to(du, (h, w)).astype(float)
        dv = np.broadcast_to(dv, (h, w)).astype(float)
        pairs.append(FlowPair(Viewpoint(s, t), FlowField(du, dv), FlowField(-du, -dv)))
    return pairs


def tiny_lightfield(w=6, h=5, n=2):
    vps = [(float(s), float(t)) for t in range(-n, n + 1) for s in range(-n, n + 1)]
    views = np.zeros((len(vps), h, w), np.uint8)
    center = vps.index((0.0, 0.0))
    return LightField(grid_rows=2 * n + 1, grid_cols=2 * n + 1, views=views,
                      viewpoints=np.array(vps), center_index=center)


def test_build_lfd_zero_flows():
    pairs = flows_from_field(lambda s, t, x, y: (0.0, 0.0))
    lfd = build_lfd(pairs, 2, 2)
    assert lfd.samples.shape == (24, 4)
    assert not lfd.samples[:, 2:].any()


def test_build_lfd_pure_disparity():
    d = 1.5
    pairs = flows_from_field(lambda s, t, x, y: (d * s, d * t))
    lfd = build_lfd(pairs, 1, 3)
    for s, t, du, dv in lfd.samples:
        assert du == pytest.approx(d * s) and dv == pytest.approx(d * t)


def test_build_lfd_sample_count_5x5():
    pairs = flows_from_field(lambda s, t, x, y: (0.0, 0.0))
    assert build_lfd(pairs, 0, 0).samples.shape[0] == 24


def test_fit_hyperplane_disparity_has_zero_residual():
    for d in (0.25, 1.0, 3.0):
        rows = [(s, t, d * s, d * t) for s, t in grid_viewpoints()]
        fit = fit_hyperplane(LFD(np.array(rows)))
        assert fit.residual <= 1e-9
        assert np.linalg.norm(fit.normal) == pytest.approx(1.0, abs=1e-9)


def test_fit_hyperplane_zero_displacements():
    rows = [(s, t, 0.0, 0.0) for s, t in grid_viewpoints()]
    fit = fit_hyperplane(LFD(np.array(rows)))
    assert fit.residual <= 1e-9
    # normal must be orthogonal to every sample row
    for row in rows:
        assert abs(np.dot(fit.normal, row)) < 1e-9


def test_fit_hyperplane_degenerate_all_zero():
    fit = fit_hyperplane(LFD(np.zeros((24, 4))))
    assert fit.residual == 0.0
    assert fit.normal.tolist() == [0.0, 0.0, 1.0, 0.0]


def test_fit_hyperplane_needs_samples():
    with pytest.raises(ValueError):
        fit_hyperplane(LFD(np.zeros((2, 4))))


def test_fit_hyperplane_quadratic_matches_eig_oracle():
    d, eps = 1.0, 0.5
    # the stated case: dv = d*t duplicates the t column, so the residual is 0
    rows = [(s, t, d * s + eps * s * s, d * t) for s, t in grid_viewpoints()]
    a = np.array(rows)
    fit = fit_hyperplane(LFD(a))
    expected, _ = oracle_smallest_eig(a.T @ a)
    assert fit.residual == pytest.approx(expected, abs=1e-8)
    # and a genuinely non-planar variant
    rows = [(s, t, d * s + eps * s * s, d * t + eps * t * t) for s, t in grid_viewpoints()]
    a = np.array(rows)
    fit = fit_hyperplane(LFD(a))
    expected, _ = oracle_smallest_eig(a.T @ a)
    assert expected > 1.0
    assert fit.residual == pytest.approx(expected, rel=1e-8, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(*(st.floats(min_value=-5, max_value=5, allow_nan=False) for _ in range(4)))
def test_coplanar_lfd_residual_tiny(a, b, c, d):
    rows = [(s, t, a * s + b * t, c * s + d * t) for s, t in grid_viewpoints()]
    fit = fit_hyperplane(LFD(np.array(rows)))
    assert fit.residual <= 1e-9


def test_residual_scale_covariance():
    rows = np.array([(s, t, 0.7 * s + 0.3 * s * s, 0.7 * t) for s, t in grid_viewpoints()])
    base = fit_hyperplane(LFD(rows)).residual
    for k in (0.5, 2.0, -3.0):
        scaled = rows.copy()
        scaled[:, 2:] *= k
        res = fit_hyperplane(LFD(scaled)).residual
        lo, hi = sorted((1.0, k * k))
        assert lo * base - 1e-9 <= res <= hi * base + 1e-9
    # exact zero is preserved under scaling
    zrows = np.array([(s, t, 0.0, 0.0) for s, t in grid_viewpoints()])
    zscaled = zrows.copy()
    zscaled[:, 2:] *= 5.0
    assert fit_hyperplane(LFD(zrows)).residual == fit_hyperplane(LFD(zscaled)).residual == 0.0


def test_jacobi_matches_numpy_on_random_symmetric():
    rng = np.random.default_rng(0)
    mats = rng.normal(size=(50, 4, 4))
    mats = mats + mats.transpose(0, 2, 1)
    vals, vecs = jacobi_eigh(mats)
    expected = np.linalg.eigvalsh(mats)
    assert np.allclose(np.sort(vals, axis=1), expected, atol=1e-9)
    # eigenvector property A v = lambda v
    for i in range(0, 50, 7):
        for j in range(4):
            assert np.allclose(mats[i] @ vecs[i][:, j], vals[i][j] * vecs[i][:, j], atol=1e-7)


def test_linearity_map_matches_per_pixel_fit():
    pairs = flows_from_field(lambda s, t, x, y: (0.5 * s + 0.01 * x * s * s, 0.5 * t))
    lf = tiny_lightfield()
    emap = linearity_map(pairs, lf)
    for (u, v) in ((0, 0), (3, 2), (5, 4)):
        fit = fit_hyperplane(build_lfd(pairs, u, v))
        assert emap.data[v, u] == pytest.approx(fit.residual, abs=1e-12)


def test_linearity_map_disparity_plane_is_zero():
    pairs = flows_from_field(lambda s, t, x, y: (0.75 * s, 0.75 * t))
    emap = linearity_map(pairs, tiny_lightfield())
    assert emap.data.max() <= 1e-9


def test_fb_error_rigid_inverse_is_zero():
    pairs = flows_from_field(lambda s, t, x, y: (2.0 * s, 2.0 * t), w=12, h=10)
    for pair in pairs:
        assert fb_error(pair, 5, 5) == pytest.approx(0.0, abs=1e-12)


def test_fb_error_arithmetic():
    w = h = 8
    fwd = FlowField(np.full((h, w), 3.0), np.zeros((h, w)))
    bwd = FlowField(np.full((h, w), -1.0), np.zeros((h, w)))
    pair = FlowPair(Viewpoint(1.0, 0.0), fwd, bwd)
    assert fb_error(pair, 2, 4) == pytest.approx(2.0)


def test_consistency_threshold_boundary():
    w = h = 6
    for e_val, expect in ((7.9, 0), (8.0, 1)):
        fwd = FlowField(np.full((h, w), e_val), np.zeros((h, w)))
        bwd = FlowField(np.zeros((h, w)), np.zeros((h, w)))
        pair = FlowPair(Viewpoint(1.0, 0.0), fwd, bwd)
        cv = consistency_volume([pair], tau=8.0)
        assert cv.planes[0, 3, 1] == expect


def test_consistency_zero_flows_all_consistent():
    pairs = flows_from_field(lambda s, t, x, y: (0.0, 0.0))
    cv = consistency_volume(pairs, tau=8.0)
    assert not cv.planes.any()


def test_consistency_requires_positive_tau():
    pairs = flows_from_field(lambda s, t, x, y: (0.0, 0.0))
    with pytest.raises(ValueError):
        consistency_volume(pairs, tau=0.0)


# --- detectors -------------------------------------------------------------


def test_detector_counts_5x5():
    dets = {d.theta: d for d in make_detectors(5, 5)}
    for theta in (0, 90, 180, 270):
        k = int((dets[theta].weights > 0).sum())
        assert k == 10
        assert dets[theta].weights.max() == pytest.approx(1 / 10)
    for theta in (45, 135, 225, 315):
        k = int((dets[theta].weights > 0).sum())
        assert k == 12
        assert dets[theta].weights.max() == pytest.approx(1 / 12)


def test_detector_theta0_support_is_right_half():
    det = next(d for d in make_detectors(5, 5) if d.theta == 0)
    for (s, t), w in zip(det.viewpoints, det.weights):
        assert (w > 0) == (s > 0)


def test_detector_theta45_support():
    det = next(d for d in make_detectors(5, 5) if d.theta == 45)
    support = {tuple(v) for v, w in zip(det.viewpoints.tolist(), det.weights) if w > 0}
    expected = {(s, t) for s, t in grid_viewpoints() if s + t > 0} | {(2.0, -2.0), (-2.0, 2.0)}
    assert support == {(float(s), float(t)) for s, t in expected}


def test_detector_center_weight_zero():
    for det in make_detectors(5, 5):
        grid = det.weight_grid(5, 5)
        assert grid[2, 2] == 0.0


def test_detector_weights_sum_to_one():
    for det in make_detectors(7, 7):
        assert det.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_detector_even_grid_rejected():
    with pytest.raises(ValueError):
        make_detectors(4, 4)


def test_detector_point_symmetry():
    dets = {d.theta: d for d in make_detectors(5, 5)}
    for theta in (0, 45, 90, 135):
        a = dets[theta].weight_grid(5, 5)
        b = dets[(theta + 180) % 360].weight_grid(5, 5)
        assert np.allclose(b, a[::-1, ::-1])


def test_detector_supports_have_no_containment():
    dets = sorted(make_detectors(5, 5), key=lambda d: d.theta)
    supports = [frozenset(map(tuple, d.viewpoints[d.weights > 0].tolist())) for d in dets]
    for i, a in enumerate(supports):
        for j, b in enumerate(supports):
            if i != j:
                assert not a <= b


# --- occlusion response ----------------------------------------------------


def plane_volume(bits_fn, w=6, h=5):
    vps = np.array(grid_viewpoints())
    planes = np.stack([np.full((h, w), bits_fn(s, t), np.uint8) for s, t in vps])
    return ConsistencyVolume(viewpoints=vps, planes=planes)


def test_response_all_consistent():
    cv = plane_volume(lambda s, t: 0)
    occ = occlusion_response(cv, make_detectors(5, 5))
    assert not occ.o_max.data.any()
    assert not occ.theta_map.any()  # tie-break lands on 0


def test_response_all_inconsistent():
    cv = plane_volume(lambda s, t: 1)
    occ = occlusion_response(cv, make_detectors(5, 5))
    assert (occ.o_max.data == 1.0).all()


def test_response_right_half_plane():
    cv = plane_volume(lambda s, t: 1 if s > 0 else 0)
    dets = make_detectors(5, 5)
    occ = occlusion_response(cv, dets)
    assert (occ.theta_map == 0).all()
    assert (occ.o_max.data == 1.0).all()
    # and the opposite detector sees nothing
    det180 = next(d for d in dets if d.theta == 180)
    support = det180.weights > 0
    bits = np.array([1 if s > 0 else 0 for s, t in det180.viewpoints])
    assert (bits[support]).sum() == 0


def test_response_monotone_in_bits():
    rng = np.random.default_rng(1)
    vps = np.array(grid_viewpoints())
    planes = rng.integers(0, 2, (24, 4, 4)).astype(np.uint8)
    cv = ConsistencyVolume(viewpoints=vps, planes=planes)
    dets = make_detectors(5, 5)

    def responses(c):
        out = occlusion_response(c, dets)
        return out.o_max.data

    base = responses(cv)
    zeros = np.argwhere(planes == 0)
    for k in range(0, len(zeros), 17):
        i, y, x = zeros[k]
        bumped = planes.copy()
        bumped[i, y, x] = 1
        new = responses(ConsistencyVolume(viewpoints=vps, planes=bumped))
        assert new[y, x] >= base[y, x] - 1e-12


def test_theta_map_invariant_to_weight_scaling():
    rng = np.random.default_rng(2)
    vps = np.array(grid_viewpoints())
    planes = rng.integers(0, 2, (24, 3, 3)).astype(np.uint8)
    cv = ConsistencyVolume(viewpoints=vps, planes=planes)
    dets = make_detectors(5, 5)
    occ = occlusion_response(cv, dets)
    import dataclasses

    scaled = [dataclasses.replace(d, weights=d.weights * 3.5) for d in dets]
    occ2 = occlusion_response(cv, scaled)
    assert np.array_equal(occ.theta_map, occ2.theta_map)
