import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poa.errors import DegenerateSurface, EmptyCloud, NoFeasiblePath, NoNeighbour, NoPath
from poa.geometry import FREE, OCCUPIED, Label, LabelledPointCloud, OccupancyGrid, Pose2D, Pose3D
from poa.paths import Path2D, Path3D, densify_points
from poa.terrain3d import (
    StabilityLimits,
    block_unstable,
    check_feasibility,
    estimate_attitude,
    fit_surface,
    inflate_grid,
    plan_3d,
    preprocess_cloud,
    project_path,
    relabel_cloud,
    remove_outliers,
    voxel_downsample,
)


def empty_grid(n=30, res=0.5):
    return OccupancyGrid.filled(n, n, res, value=FREE)


def surface_cloud(f, extent=15.0, spacing=0.1):
    t = np.arange(spacing / 2, extent, spacing)
    X, Y = np.meshgrid(t, t)
    pts = np.column_stack([X.ravel(), Y.ravel(), f(X.ravel(), Y.ravel())])
    return LabelledPointCloud(pts, np.zeros(len(pts), dtype=np.int8))


def model_for(f, **kw):
    g = empty_grid()
    return preprocess_cloud(surface_cloud(f), g, g, **kw)


@pytest.fixture(scope="module")
def flat():
    return model_for(lambda x, y: np.zeros_like(x))


# -- preprocessing -------------------------------------------------------------

def test_flat_surface_is_zero(flat):
    q = np.random.default_rng(0).uniform(1, 14, size=(200, 2))
    np.testing.assert_allclose(flat.height(q[:, 0], q[:, 1]), 0.0, atol=1e-9)
    assert estimate_attitude(Pose2D(7, 7, 0.3), flat) == pytest.approx((0.0, 0.0), abs=1e-9)


def test_isolated_outlier_is_removed():
    base = surface_cloud(lambda x, y: np.zeros_like(x), extent=3.0)
    spike = LabelledPointCloud(np.array([[1.5, 1.5, 5.0]]), np.array([0]))
    out = remove_outliers(LabelledPointCloud.concatenate([base, spike]))
    assert out.points[:, 2].max() < 1.0
    assert len(out) >= 0.95 * len(base)


def test_outlier_statistics_are_per_label():
    sparse = surface_cloud(lambda x, y: np.zeros_like(x), extent=3.0, spacing=0.3)
    rng = np.random.default_rng(1)
    dense = LabelledPointCloud(rng.normal([1.5, 1.5, 0.1], 0.02, size=(2000, 3)), np.full(2000, 1))
    out = remove_outliers(LabelledPointCloud.concatenate([sparse, dense]))
    # uniform ground lattice survives next to a much denser stone
    assert (out.labels == Label.FREE_SPACE).sum() >= 0.9 * len(sparse)


@settings(max_examples=50)
@given(st.integers(1, 400), st.floats(0.05, 0.5), st.integers(0, 2 ** 31))
def test_voxel_downsample_one_point_per_occupied_voxel(n, voxel, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 2, size=(n, 3))
    cloud = LabelledPointCloud(pts, rng.integers(0, 3, size=n))
    out = voxel_downsample(cloud, voxel)
    keys = {tuple(k) for k in np.floor(pts / voxel).astype(int).tolist()}
    assert len(out) == len(keys) <= n
    # each centroid lies in the voxel it summarises
    assert {tuple(k) for k in np.floor(out.points / voxel + 1e-9).astype(int).tolist()} <= keys | {
        tuple(k) for k in np.floor(out.points / voxel - 1e-9).astype(int).tolist()}


def test_voxel_label_tie_goes_to_restrictive_class():
    pts = np.array([[0.01, 0.01, 0.01], [0.02, 0.02, 0.02]])
    out = voxel_downsample(LabelledPointCloud(pts, np.array([0, 2]), np.array([-1, 4])), 0.1)
    assert out.labels.tolist() == [2] and out.instance_ids.tolist() == [4]


def test_inflate_and_relabel():
    cells = np.full((10, 10), FREE, dtype=np.int8)
    cells[5, 5] = OCCUPIED
    g = OccupancyGrid(0.5, 0.0, 0.0, cells)
    assert inflate_grid(g, 0.42) == g  # radius below one cell
    grown = inflate_grid(g, 0.5)
    assert grown.occupied.sum() == 5 and grown.occupied[4, 5] and not grown.occupied[4, 4]
    pts = np.array([[2.75, 2.75, 0.0], [0.25, 0.25, 0.0], [9.0, 9.0, 0.0]])
    cloud = LabelledPointCloud(pts, np.array([0, 2, 1]))
    out = relabel_cloud(cloud, g, empty_grid(10))
    assert out.labels.tolist() == [1, 0, 1]  # last point is off-grid and keeps its label


def test_preprocess_failures():
    g = empty_grid()
    with pytest.raises(EmptyCloud):
        preprocess_cloud(LabelledPointCloud.empty(), g, g)
    with pytest.raises(DegenerateSurface):
        fit_surface(np.zeros((3, 3)))
    stones_only = surface_cloud(lambda x, y: np.zeros_like(x), extent=3.0)
    full = OccupancyGrid.filled(30, 30, 0.5, value=OCCUPIED)
    with pytest.raises(DegenerateSurface):
        preprocess_cloud(stones_only, full, g)


# -- projection and attitude ---------------------------------------------------

def test_projection_examples(flat):
    path = Path2D.from_points(np.array([[2.0, 2.0], [3.0, 2.0]]))
    p3 = project_path(path, flat)
    assert isinstance(p3, Path3D) and len(p3) == 2
    np.testing.assert_allclose(p3.xyz[:, 2], 0.0)
    np.testing.assert_allclose(p3.xyz[:, :2], path.xy)
    with pytest.raises(NoNeighbour):
        project_path(Path2D.from_points(np.array([[2.0, 2.0], [20.0, 2.0]])), flat)


def test_nearest_matches_linear_scan_on_1000_queries(flat):
    q = np.random.default_rng(2).uniform(-1, 16, size=(1000, 2))
    dist, idx = flat.nearest(q)
    pts = flat.cloud.points[:, :2]
    for k in range(1000):
        d = np.hypot(pts[:, 0] - q[k, 0], pts[:, 1] - q[k, 1])
        assert dist[k] == pytest.approx(d.min(), abs=1e-12)
        assert d[idx[k]] == pytest.approx(d.min(), abs=1e-12)


@pytest.mark.parametrize("a,b", [(0.0, 0.0), (0.2, 0.0), (0.0, -0.3), (0.5, 0.5), (-0.4, 0.25)])
@pytest.mark.parametrize("yaw", [0.0, math.pi / 2, 2.3])
def test_attitude_on_analytic_planes(a, b, yaw):
    m = model_for(lambda x, y: a * x + b * y)
    c, s = math.cos(yaw), math.sin(yaw)
    roll, pitch = estimate_attitude(Pose3D(7.0, 7.0, 0.0, yaw=yaw), m)
    assert roll == pytest.approx(math.atan(-a * s + b * c), abs=0.01)
    assert pitch == pytest.approx(math.atan(a * c + b * s), abs=0.01)


def test_feasibility_check_examples():
    z = np.zeros(4)
    p = Path3D(np.zeros((4, 3)), z, np.array([0.0, 0.243, -0.175, 0.1]), np.array([0.0, 0.0, 0.0, -0.2]))
    assert check_feasibility(p) == [1, 3]  # the limit itself is allowed
    assert check_feasibility(p, StabilityLimits(0.3, 0.3)) == []
    with pytest.raises(ValueError):
        StabilityLimits(gamma_max=0.0)


def test_block_unstable_neighbourhoods():
    g = empty_grid(10)
    assert block_unstable(g, np.array([[2.25, 2.25]])).occupied.sum() == 9
    assert block_unstable(g, np.array([[0.1, 0.1]])).occupied.sum() == 4
    assert block_unstable(g, np.empty((0, 2))) == g
    kept = block_unstable(g, np.array([[2.25, 2.25]]), keep={(4, 4)})
    assert kept.occupied.sum() == 8 and not kept.occupied[4, 4]


# -- replanning loop -----------------------------------------------------------

def test_plan_3d_on_flat_ground_is_the_2d_plan(flat):
    g = empty_grid()
    s, t = Pose2D(0.75, 0.75, 0), Pose2D(14.25, 14.25, 0)
    p = plan_3d("astar", g, g, flat, s, t)
    assert p.meta["rounds"] == 1 and p.meta["blocked_cells"] == 0
    from poa.poa2d import poa_plan

    np.testing.assert_allclose(p.xyz[:, :2], poa_plan("astar", g, g, s, t).xy)


def test_plan_3d_routes_around_a_steep_hill():
    hill = lambda x, y: 0.8 * np.exp(-((x - 7.5) ** 2 + (y - 7.5) ** 2) / (2 * 1.0 ** 2))
    m = model_for(hill)
    g = empty_grid()
    s, t = Pose2D(0.75, 0.75, 0), Pose2D(14.25, 14.25, 0)
    p = plan_3d("astar", g, g, m, s, t)
    assert p.meta["rounds"] > 1 and p.meta["blocked_cells"] > 0
    assert np.abs(p.roll).max() <= 0.175 and np.abs(p.pitch).max() <= 0.175


def test_plan_3d_fails_behind_an_impassable_ridge():
    ridge = lambda x, y: 0.3 * np.sin(2.0 * x) * ((x > 5) & (x < 10))
    m = model_for(ridge)
    g = empty_grid()
    with pytest.raises(NoPath):
        plan_3d("astar", g, g, m, Pose2D(0.75, 7.25, 0), Pose2D(14.25, 7.25, 0), max_rounds=40)


def test_plan_3d_rejects_unstable_endpoint():
    m = model_for(lambda x, y: 0.4 * x)
    g = empty_grid()
    with pytest.raises(NoFeasiblePath):
        plan_3d("astar", g, g, m, Pose2D(0.75, 0.75, 0), Pose2D(14.25, 0.75, 0))
