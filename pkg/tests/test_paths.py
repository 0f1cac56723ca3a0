import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cdoblab.errors import (
    DegenerateTangent,
    InvalidGeometry,
    OutOfRange,
    SingularFit,
    TooFewPoints,
    TooFewPointsPerSegment,
)
from cdoblab.paths import (
    PathSegment,
    PresetGeometry,
    build_arclength_table,
    curvature_at,
    densify,
    fit_path,
    make_preset_path,
    preset_waypoints,
    sample_path,
    segment_points,
)
from cdoblab.sim import preset_path

CURVED = ("single-lane", "double-lane", "avoidance")


def circle_path(R, arc=1.0, n_segments=8):
    th = np.linspace(0.0, arc, 401)
    pts = np.c_[R * np.cos(th), R * np.sin(th)]
    return fit_path(segment_points(pts, n_segments))


def lobes(rho, frac=0.01):
    """Sign changes between curvature lobes that exceed frac of the peak."""
    keep = rho[np.abs(rho) > frac * np.abs(rho).max()]
    return int(np.sum(np.sign(keep[1:]) != np.sign(keep[:-1])))


def test_preset_shapes():
    av = np.array(preset_waypoints("avoidance"))
    assert av[0, 0] == 0.0 and av[-1, 0] == 100.0
    outside = (av[:, 0] <= 20.0) | (av[:, 0] >= 50.0)
    assert np.all(av[outside, 1] == 0.0)
    assert av[:, 1].max() == pytest.approx(2.0)
    sl = preset_waypoints("single-lane", PresetGeometry(lane_width=3.5))
    assert sl[0].y == 0.0 and sl[-1].y == 3.5
    dl = preset_waypoints("double-lane")
    assert dl[0].y == 0.0 and dl[-1].y == 0.0
    for kind in ("straight",) + CURVED:
        xs = [p.x for p in preset_waypoints(kind)]
        assert all(b > a for a, b in zip(xs, xs[1:]))


def test_preset_geometry_validation():
    with pytest.raises(InvalidGeometry):
        preset_waypoints("single-lane", PresetGeometry(single_change=(60.0, 30.0)))
    with pytest.raises(InvalidGeometry):
        preset_waypoints("double-lane", PresetGeometry(double_up=(20.0, 60.0)))
    with pytest.raises(InvalidGeometry):
        preset_waypoints("avoidance", PresetGeometry(bump_extent=(20.0, 120.0)))
    with pytest.raises(InvalidGeometry):
        preset_waypoints("single-lane", PresetGeometry(lane_width=-1.0))


def test_densify_examples():
    assert len(densify([(0.0, 0.0), (10.0, 0.0)], 1.0)) == 11
    assert densify([(0.0, 0.0), (3.0, 4.0)], 10.0) == [(0.0, 0.0), (3.0, 4.0)]
    with pytest.raises(TooFewPoints):
        densify([(0.0, 0.0)], 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(-3.0, 3.0), st.lists(st.floats(0.1, 20.0), min_size=1, max_size=8))
def test_densify_properties(spacing, slope, steps):
    x = np.concatenate([[0.0], np.cumsum(steps)])
    pts = np.c_[x, 1.0 + slope * x]
    out = np.array(densify(pts, spacing))
    np.testing.assert_array_equal(out[0], pts[0])
    np.testing.assert_array_equal(out[-1], pts[-1])
    assert np.max(np.hypot(*np.diff(out, axis=0).T)) <= spacing * (1 + 1e-9)
    # collinear in, collinear out
    assert np.max(np.abs(out[:, 1] - (1.0 + slope * out[:, 0]))) < 1e-12 * max(1.0, np.abs(out).max())


def test_segment_points_examples():
    pts = np.c_[np.arange(101.0), np.zeros(101)]
    runs = segment_points(pts, 2)
    assert [len(r) for r in runs] == [51, 51]
    assert runs[0][-1] == runs[1][0] == (50.0, 0.0)
    one = segment_points(pts, 1)
    assert len(one) == 1 and len(one[0]) == 101
    with pytest.raises(TooFewPointsPerSegment):
        segment_points(np.c_[np.arange(10.0), np.zeros(10)], 3, degree=5)


@settings(max_examples=40, deadline=None)
@given(st.integers(12, 400), st.integers(1, 8))
def test_segment_points_balanced(n, k):
    pts = np.c_[np.arange(float(n)), np.zeros(n)]
    try:
        runs = segment_points(pts, k)
    except TooFewPointsPerSegment:
        return
    sizes = [len(r) for r in runs]
    assert max(sizes) - min(sizes) <= 1
    for a, b in zip(runs, runs[1:]):
        assert a[-1] == b[0]
    assert sum(sizes) - (k - 1) == n


def test_fit_collinear():
    pts = np.c_[np.linspace(0.0, 40.0, 81), 2.0 + 0.5 * np.linspace(0.0, 40.0, 81)]
    path = fit_path(segment_points(pts, 4))
    s = np.linspace(0.0, path.length, 500)
    x, y, h, rho = path.sample_many(s)
    assert np.max(np.abs(y - (2.0 + 0.5 * x))) < 1e-10
    assert np.max(np.abs(rho)) < 1e-9
    assert np.ptp(h) < 1e-9


def test_fit_rejects_low_degree_and_singular():
    pts = np.c_[np.linspace(0, 10, 20), np.zeros(20)]
    with pytest.raises(ValueError):
        fit_path([pts], degree=2)
    with pytest.raises(SingularFit):
        fit_path([np.zeros((8, 2))])


@pytest.mark.parametrize("kind", CURVED)
def test_joint_continuity_and_endpoints(kind):
    path = preset_path(kind)
    wps = preset_waypoints(kind)
    for a, b in zip(path.segments, path.segments[1:]):
        for order in range(3):
            pa = np.array(a.derivative(1.0, order) if order else a.position(1.0))
            pb = np.array(b.derivative(0.0, order) if order else b.position(0.0))
            assert np.max(np.abs(pa - pb)) <= 1e-8 * max(1.0, np.abs(pa).max())
    start, end = path.sample(0.0), path.sample(path.length)
    assert math.hypot(start.x - wps[0].x, start.y - wps[0].y) < 1e-9
    assert math.hypot(end.x - wps[-1].x, end.y - wps[-1].y) < 1e-6


def test_single_lane_has_one_curvature_sign_change():
    _, rho = preset_path("single-lane").curvature_profile(4001)
    assert lobes(rho) == 1


def test_other_presets_lobe_counts():
    # up-change then down-change: (+, -) then (-, +), the middle lobes merge
    assert lobes(preset_path("double-lane").curvature_profile(4001)[1]) == 2
    assert lobes(preset_path("avoidance").curvature_profile(4001)[1]) == 2


@pytest.mark.parametrize("R", [20.0, 50.0, 200.0])
def test_circle_curvature(R):
    path = circle_path(R)
    _, rho = path.curvature_profile(2001)
    assert np.max(np.abs(rho * R - 1.0)) < 1e-6


def test_curvature_line_and_degenerate():
    line = PathSegment([0.0, 12.0, 0, 0, 0, 0], [3.0, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(curvature_at(line, np.linspace(0, 1, 5)), 0.0)
    with pytest.raises(DegenerateTangent):
        curvature_at(PathSegment([1.0, 0, 0], [2.0, 0, 0]), 0.5)


def test_reversal_negates_curvature():
    seg = circle_path(30.0, n_segments=1).segments[0]
    lam = np.linspace(0.0, 1.0, 21)
    np.testing.assert_allclose(curvature_at(seg.reversed(), 1.0 - lam), -curvature_at(seg, lam), rtol=1e-9)


def test_arclength_straight_and_convergence():
    path = preset_path("straight")
    assert path.length == pytest.approx(100.0, abs=1e-6)
    assert np.all(np.diff(path.s_nodes) > 0)
    curved = make_preset_path("avoidance")
    finer = build_arclength_table(curved, 0.025)
    assert abs(finer.length / curved.length - 1.0) < 1e-6
    assert np.all(np.diff(curved.s_nodes) <= 0.05 + 1e-12)


@pytest.mark.parametrize("kind", CURVED)
def test_sample_positions_against_quadrature(kind):
    path = preset_path(kind)
    for s_target in np.linspace(1.0, path.length - 1.0, 7):
        got = path.sample(s_target)
        # invert arc length with quad on the continuous speed
        k, lam = _locate_by_quad(path, s_target)
        x, y = path.segments[k].position(lam)
        assert math.hypot(got.x - x, got.y - y) < 1e-4


def _locate_by_quad(path, s_target):
    acc = 0.0
    for k, seg in enumerate(path.segments):
        seg_len = quad(lambda t: float(seg.speed(t)), 0.0, 1.0, epsabs=1e-12, epsrel=1e-12)[0]
        if acc + seg_len >= s_target:
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                part = quad(lambda t: float(seg.speed(t)), 0.0, mid, epsabs=1e-12, epsrel=1e-12)[0]
                lo, hi = (mid, hi) if acc + part < s_target else (lo, mid)
            return k, 0.5 * (lo + hi)
        acc += seg_len
    return len(path.segments) - 1, 1.0


@pytest.mark.parametrize("kind", CURVED)
def test_curvature_continuity_mm_samples(kind):
    path = preset_path(kind)
    s = np.arange(0.0, path.length, 1e-3)
    rho = path.sample_many(s)[3]
    assert np.max(np.abs(np.diff(rho))) < 0.01


def test_sample_path_straight_and_range():
    path = preset_path("straight")
    for s in (0.0, 33.3, 100.0):
        p = sample_path(path, s)
        assert p.heading == 0.0 and abs(p.rho) < 1e-12
    assert sample_path(path, 0.0)[:2] == pytest.approx((0.0, 0.0), abs=1e-12)
    with pytest.raises(OutOfRange):
        sample_path(path, -1.0)
    with pytest.raises(OutOfRange):
        sample_path(path, 100.5)


def test_heading_range():
    # half circle traversed clockwise ends pointing along -x
    th = np.linspace(math.pi / 2, -math.pi / 2, 401)
    path = fit_path(segment_points(np.c_[np.cos(th) * 10, np.sin(th) * 10], 8))
    h = path.sample_many(np.linspace(0.0, path.length, 300))[2]
    assert np.all(h > -math.pi) and np.all(h <= math.pi)


def test_fit_idempotence():
    base = make_preset_path("avoidance", n_segments=4)
    runs = [np.c_[seg.position(np.linspace(0.0, 1.0, 30))] for seg in base.segments]
    refit = fit_path(runs, param="uniform")
    for a, b in zip(base.segments, refit.segments):
        lam = np.linspace(0.0, 1.0, 30)
        np.testing.assert_allclose(np.c_[b.position(lam)], np.c_[a.position(lam)], atol=1e-8)
