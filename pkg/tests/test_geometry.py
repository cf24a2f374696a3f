import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from poa.errors import OutOfBounds, PoaError
from poa.geometry import (
    FREE,
    OCCUPIED,
    UNKNOWN,
    Ellipse2D,
    Label,
    LabelledPoint,
    LabelledPointCloud,
    OccupancyGrid,
    Pose2D,
    Pose3D,
    RobotGeometry,
    cell_bounds,
    cell_center,
    cells_overlapping_ellipse,
    ellipse_overlaps_cell,
    grid_from_text,
    grid_to_text,
    normalize_angle,
    normalize_angles,
    read_cloud,
    read_grid,
    world_to_cell,
    write_cloud,
    write_grid,
)

angles = st.floats(-1e4, 1e4, allow_nan=False)


def grid15(res=0.5):
    n = int(round(15 / res))
    return OccupancyGrid.filled(n, n, res, value=FREE)


# -- angles and poses -----------------------------------------------------

@given(angles)
def test_normalize_angle_range_idempotent_and_direction(a):
    n = normalize_angle(a)
    assert -math.pi < n <= math.pi
    assert normalize_angle(n) == n
    assert math.cos(n) == pytest.approx(math.cos(a), abs=1e-12)
    assert math.sin(n) == pytest.approx(math.sin(a), abs=1e-12)


def test_normalize_angle_maps_minus_pi_to_pi():
    assert normalize_angle(-math.pi) == math.pi
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)


@given(st.lists(angles, min_size=1, max_size=20))
def test_vectorised_normalisation_matches_scalar(values):
    vec = normalize_angles(np.array(values))
    for v, n in zip(values, vec):
        assert n == pytest.approx(normalize_angle(v), abs=1e-9) or abs(abs(n - normalize_angle(v)) - 2 * math.pi) < 1e-9
        assert -math.pi < n <= math.pi


def test_pose_normalises_on_construction_and_ops():
    p = Pose2D(1, 2, 3 * math.pi / 2)
    assert p.theta == pytest.approx(-math.pi / 2)
    assert p.rotated(math.pi).theta == pytest.approx(math.pi / 2)
    assert p.translated(1, -2).xy == (2.0, 0.0)
    q = Pose3D(0, 0, 0, yaw=4 * math.pi, pitch=-3 * math.pi, roll=0.5)
    assert q.yaw == pytest.approx(0.0, abs=1e-12) and q.pitch == pytest.approx(math.pi)


def test_robot_geometry_validates_passability():
    g = RobotGeometry()
    assert g.half_width == pytest.approx(0.42)
    assert g.body_gap == pytest.approx(0.36)
    with pytest.raises(ValueError):
        RobotGeometry(track_width=0.4)
    with pytest.raises(ValueError):
        RobotGeometry(turn_radius_min=0.0)


# -- grid indexing --------------------------------------------------------

def test_world_to_cell_examples():
    g = grid15()
    assert world_to_cell(g, (0.0, 0.0)) == (0, 0)
    assert world_to_cell(g, (7.49, 7.51)) == (14, 15)
    with pytest.raises(OutOfBounds):
        world_to_cell(g, (-0.1, 3.0))
    with pytest.raises(OutOfBounds):
        world_to_cell(g, (15.0, 3.0))  # half-open upper edge


@given(st.integers(0, 29), st.integers(0, 29))
def test_cell_center_round_trip(col, row):
    g = grid15()
    assert world_to_cell(g, cell_center(g, (col, row))) == (col, row)


@given(st.floats(0, 14.999), st.floats(0, 14.999))
def test_world_point_lies_in_its_cell(x, y):
    g = OccupancyGrid.filled(30, 30, 0.5, origin=(0.0, 0.0))
    x0, y0, x1, y1 = cell_bounds(g, world_to_cell(g, (x, y)))
    assert x0 <= x < x1 and y0 <= y < y1


def test_grid_validation_and_equality():
    g = OccupancyGrid.filled(4, 3, 0.5, value=UNKNOWN)
    assert g.cells.shape == (3, 4) and g.width == 4 and g.height == 3
    with pytest.raises(ValueError):
        g.cells[0, 0] = 1
    assert g == OccupancyGrid.filled(4, 3, 0.5, value=UNKNOWN)
    assert g != OccupancyGrid.filled(4, 3, 0.25, value=UNKNOWN)
    with pytest.raises(ValueError):
        OccupancyGrid(0.0, 0.0, 0.0, np.zeros((2, 2), dtype=np.int8))


# -- ellipse overlap ------------------------------------------------------

def test_ellipse_overlap_examples():
    g = OccupancyGrid.filled(10, 10, 0.2, value=FREE)
    cx, cy = cell_center(g, (4, 4))
    assert ellipse_overlaps_cell(Ellipse2D((cx, cy), 0.3, 0.3), g, (4, 4))
    assert not ellipse_overlaps_cell(Ellipse2D((cx + 10, cy), 0.2, 0.1), g, (4, 4))
    # a=0.3, b=0.15 axis-aligned, rightmost point exactly on the cell's left edge
    x0, y0, _, _ = cell_bounds(g, (4, 4))
    e = Ellipse2D((x0 - 0.3, y0 + 0.1), 0.3, 0.15)
    assert ellipse_overlaps_cell(e, g, (4, 4))
    # the oracle for the tangent case: dense sampling of the cell boundary hits the implicit equation
    t = np.linspace(0, 0.2, 2001)
    assert scaled(e, 1 + 1e-9).contains(np.full_like(t, x0), y0 + t).any()
    assert not ellipse_overlaps_cell(Ellipse2D((x0 - 0.301, y0 + 0.1), 0.3, 0.15), g, (4, 4))


def dense_sampler(e: Ellipse2D, x0, y0, size, step=1e-3):
    t = np.linspace(0.0, size, int(round(size / step)) + 1)
    X, Y = np.meshgrid(x0 + t, y0 + t)
    return bool(e.contains(X, Y).any())


def scaled(e: Ellipse2D, k: float) -> Ellipse2D:
    return Ellipse2D(e.center, e.semi_major * k, e.semi_minor * k, e.orientation)


def test_ellipse_overlap_matches_dense_sampler_on_1000_cases():
    rng = np.random.default_rng(20240611)
    g = OccupancyGrid.filled(20, 20, 0.2, value=FREE)
    checked = 0
    while checked < 1000:
        col, row = rng.integers(5, 15, size=2)
        x0, y0, _, _ = cell_bounds(g, (col, row))
        a = rng.uniform(0.03, 0.5)
        b = rng.uniform(0.02, a)
        cx = x0 + 0.1 + rng.uniform(-0.8, 0.8)
        cy = y0 + 0.1 + rng.uniform(-0.8, 0.8)
        e = Ellipse2D((cx, cy), a, b, rng.uniform(-math.pi, math.pi))
        # skip near-tangent draws the 1 mm sampler cannot resolve
        if dense_sampler(scaled(e, 0.98), x0, y0, 0.2) != dense_sampler(scaled(e, 1.02), x0, y0, 0.2):
            continue
        assert ellipse_overlaps_cell(e, g, (col, row)) == dense_sampler(e, x0, y0, 0.2), e
        checked += 1


def test_cells_overlapping_ellipse_agrees_with_per_cell_test():
    g = OccupancyGrid.filled(20, 20, 0.2, value=FREE)
    e = Ellipse2D((2.03, 1.97), 0.45, 0.2, 0.7)
    cols, rows = cells_overlapping_ellipse(g, e)
    got = set(zip(cols.tolist(), rows.tolist()))
    want = {(c, r) for c in range(20) for r in range(20) if ellipse_overlaps_cell(e, g, (c, r))}
    assert got == want and got


# -- file formats ---------------------------------------------------------

@given(st.lists(st.lists(st.sampled_from([FREE, OCCUPIED, UNKNOWN]), min_size=3, max_size=3), min_size=1, max_size=5),
       st.floats(0.01, 5), st.floats(-100, 100), st.floats(-100, 100))
def test_grid_text_round_trip(rows, res, ox, oy):
    g = OccupancyGrid(res, ox, oy, np.array(rows, dtype=np.int8))
    assert grid_from_text(grid_to_text(g)) == g


def test_grid_text_layout_row0_is_min_y(tmp_path):
    cells = np.array([[1, 0], [-1, 0]], dtype=np.int8)
    g = OccupancyGrid(0.5, 1.0, 2.0, cells)
    text = grid_to_text(g)
    assert text == "POAGRID v1 2 2 0.5 1.0 2.0\n#.\n?.\n"
    write_grid(tmp_path / "g.poagrid", g)
    assert read_grid(tmp_path / "g.poagrid") == g
    with pytest.raises(PoaError):
        grid_from_text("POAGRID v1 2 2 0.5 0 0\n#x\n..\n")


def test_cloud_round_trip(tmp_path):
    pts = [
        LabelledPoint(0.1, 0.2, 0.3, Label.FREE_SPACE),
        LabelledPoint(1.0, 2.0, 0.25, Label.PASSABLE, 7),
        LabelledPoint(-1.5, 3.25, 0.75, Label.UNPASSABLE, 2),
    ]
    cloud = LabelledPointCloud.from_points(pts)
    write_cloud(tmp_path / "c.poacloud", cloud)
    text = (tmp_path / "c.poacloud").read_text()
    assert text.splitlines()[0] == "POACLOUD v1 3"
    assert text.splitlines()[2] == "1.000000 2.000000 0.250000 1 7"
    back = read_cloud(tmp_path / "c.poacloud")
    np.testing.assert_allclose(back.points, cloud.points)
    assert back.labels.tolist() == [0, 1, 2]
    assert back.instance_ids.tolist() == [-1, 7, 2]
    assert list(back)[1] == pts[1]


def test_labelled_point_cloud_helpers():
    cloud = LabelledPointCloud(np.arange(12.0).reshape(4, 3), np.array([0, 1, 1, 2]))
    assert len(cloud.of_label(Label.PASSABLE)) == 2
    assert len(LabelledPointCloud.concatenate([cloud, cloud])) == 8
    assert len(LabelledPointCloud.empty()) == 0
    with pytest.raises(ValueError):
        LabelledPointCloud(np.zeros((2, 3)), np.array([0, 5]))
