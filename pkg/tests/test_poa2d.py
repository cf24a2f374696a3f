import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from poa.geometry import FREE, OCCUPIED, OccupancyGrid, Pose2D, RobotGeometry, cells_overlapping_ellipse
from poa.paths import Path2D, densify_points
from poa.planners import SegmentChecker, plan_astar
from poa.poa2d import (
    FootprintChecker,
    PoaParams,
    check_waypoint,
    generate_alternatives,
    poa_plan,
    repair_path,
    shift_offsets,
    wheel_ellipses,
)
from poa.scenario import builtin, generate_world


def grid_with(cells, n=150, res=0.1):
    a = np.full((n, n), FREE, dtype=np.int8)
    for c, r in cells:
        a[r, c] = OCCUPIED
    return OccupancyGrid(res, 0.0, 0.0, a)


def straight(y=5.0, x0=1.0, x1=14.0, step=0.1):
    return Path2D.from_points(densify_points(np.array([[x0, y], [x1, y]]), step))


def wheel_hits(path, grid, geom=RobotGeometry()):
    fc = FootprintChecker(grid, geom)
    return [k for k, (p, th) in enumerate(zip(path.xy.tolist(), path.theta.tolist()))
            if fc.wheel_hit(p[0], p[1], th) is not None]


# -- footprint -----------------------------------------------------------------

def test_wheel_ellipses_examples():
    left, right = wheel_ellipses(Pose2D(5, 5, 0))
    assert left.center == pytest.approx((5.0, 5.3)) and right.center == pytest.approx((5.0, 4.7))
    assert (left.semi_major, left.semi_minor, left.orientation) == (0.3, 0.12, 0.0)
    left, right = wheel_ellipses(Pose2D(5, 5, math.pi / 2))
    assert left.center == pytest.approx((4.7, 5.0)) and right.center == pytest.approx((5.3, 5.0))


def test_check_waypoint_examples():
    g = grid_with([(50, 50)])  # stone cell [5.0, 5.1]^2
    assert check_waypoint(Pose2D(5.05, 5.05, 0), g) is None  # straddled between the wheels
    rep = check_waypoint(Pose2D(5.05, 4.8, 0), g, index=7)
    assert (rep.waypoint_index, rep.wheel, rep.cell) == (7, "left", (50, 50))
    assert check_waypoint(Pose2D(5.05, 5.3, 0), g).wheel == "right"
    assert check_waypoint(Pose2D(5.05, 4.8, 0), grid_with([])) is None


@settings(max_examples=300)
@given(st.floats(1, 14), st.floats(1, 14), st.floats(-math.pi, math.pi))
@example(1.0, 7.09375, 0.0)  # wheel tip exactly tangent to a cell edge
def test_fast_wheel_check_agrees_with_vectorised_overlap(x, y, th):
    rng = np.random.default_rng(int(x * 1000) ^ int(y * 1000))
    cells = [tuple(c) for c in rng.integers(0, 150, size=(400, 2))]
    g = grid_with(cells)
    want = False
    for e in wheel_ellipses(Pose2D(x, y, th)):
        cols, rows = cells_overlapping_ellipse(g, e)
        want |= bool((g.cells[rows, cols] == OCCUPIED).any())
    assert (check_waypoint(Pose2D(x, y, th), g) is not None) == want


# -- alternatives ----------------------------------------------------------------

def test_shift_offsets_are_24_ordered_by_magnitude_positive_first():
    d = shift_offsets(PoaParams())
    assert len(d) == 24 and 0.0 not in d
    assert d[:4] == [0.05, -0.05, 0.1, -0.1] and d[-2:] == [0.6, -0.6]
    assert all(abs(a) <= abs(b) for a, b in zip(d, d[1:]))


def test_generate_alternatives_shift_along_the_left_normal():
    path = Path2D.from_points(np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]]))
    alts = generate_alternatives(path, 1)
    assert alts[0].xy == pytest.approx((-0.05, 1.0)) and alts[1].xy == pytest.approx((0.05, 1.0))
    assert all(a.theta == pytest.approx(math.pi / 2) for a in alts)


def test_params_validation_and_planner_defaults():
    assert (PoaParams.for_planner("astar").n_skip, PoaParams.for_planner("astar").n_clear) == (5, 20)
    assert (PoaParams.for_planner("gvd").n_skip, PoaParams.for_planner("gvd").n_clear) == (3, 10)
    with pytest.raises(ValueError):
        PoaParams(n_skip=0)
    with pytest.raises(ValueError):
        PoaParams(shift_min=0.1)


# -- repair ------------------------------------------------------------------

def test_clear_path_is_returned_unchanged():
    path = straight()
    out = repair_path(path, grid_with([]), grid_with([]))
    np.testing.assert_array_equal(out.xy, path.xy)
    assert out.meta["repair_count"] == 0 and out.meta["residual_collisions"] == []


def test_single_stone_under_a_wheel_is_avoided():
    stone = [(80, 52), (81, 52), (80, 53), (81, 53)]  # under the left wheel track at y = 5.3
    g = grid_with(stone)
    path = straight()
    assert wheel_hits(path, g)
    out = repair_path(path, g, grid_with([]))
    assert out.meta["repair_count"] >= 1 and not out.meta["residual_collisions"]
    assert not wheel_hits(out, g)
    assert out.xy[0] == pytest.approx(path.xy[0]) and out.xy[-1] == pytest.approx(path.xy[-1])
    # detour stays inside the lateral band of the shift range plus one turn radius
    p = PoaParams()
    assert np.abs(out.xy[:, 1] - 5.0).max() <= p.shift_max + p.turn_radius + 1e-9
    for s in out.meta["splices"]:
        a, b = s["anchors"]
        assert a < s["index"] < b


def test_unavoidable_wall_is_reported_as_residual():
    wall = [(80, r) for r in range(150)]
    g = grid_with(wall)
    out = repair_path(straight(), g, grid_with([]))
    assert out.meta["residual_collisions"] and out.meta["repair_count"] == 0


def test_splices_never_enter_unpassable_cells():
    stone = [(80, 52), (81, 52)]
    # unpassable block left of the path forbids the positive shifts
    block = [(c, r) for c in range(70, 92) for r in range(55, 62)]
    out = repair_path(straight(), grid_with(stone), grid_with(block))
    assert out.meta["repair_count"] >= 1
    assert SegmentChecker(grid_with(block), step=0.01).polyline_free(out.xy)
    assert not wheel_hits(out, grid_with(stone))


def test_repair_on_setup1_reduces_wheel_contacts():
    w = generate_world(builtin("setup1"))
    raw = plan_astar(w.unpassable, w.spec.start, Pose2D(14.25, 14.25, 0))
    p = PoaParams.for_planner("astar")
    dense = Path2D.from_points(densify_points(raw.xy, p.waypoint_spacing))
    out = repair_path(dense, w.passable, w.unpassable, params=p)
    assert out.meta["repair_count"] >= 1
    assert len(wheel_hits(out, w.passable)) < len(wheel_hits(dense, w.passable))
    assert SegmentChecker(w.unpassable, step=0.05).polyline_free(out.xy)


def test_poa_plan_examples():
    w = generate_world(builtin("setup2"))
    for base in ("astar", "gvd", "rrt_star"):
        out = poa_plan(base, w.passable, w.unpassable, w.spec.start, Pose2D(0.75, 14.25, 0))
        assert out.meta["poa"] and out.meta["base_planner"] == base
        assert out.xy[0] == pytest.approx(w.spec.start.xy)
        assert out.xy[-1] == pytest.approx((0.75, 14.25))
    # with no passable stones the result is the baseline path itself
    empty = grid_with([], n=30, res=0.5)
    base = plan_astar(empty, Pose2D(0.75, 0.75, 0), Pose2D(14.25, 14.25, 0))
    out = poa_plan("astar", empty, empty, Pose2D(0.75, 0.75, 0), Pose2D(14.25, 14.25, 0))
    np.testing.assert_array_equal(out.xy, base.xy)
    assert out.meta["repair_count"] == 0
