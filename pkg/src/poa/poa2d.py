"""Passable-obstacle-aware repair of a baseline 2D path.

The baseline path is planned on the unpassable grid only.  Walking it with
stride ``n_skip``, each checked waypoint's wheel ellipses are tested against
the passable grid.  At a hazardous waypoint ``i`` the waypoints strictly
between ``i - n_clear`` and ``i + n_clear`` are dropped and replaced by two
Dubins curves through a laterally shifted copy of waypoint ``i``; shifts are
tried smallest first and the first one whose curves hit neither passable nor
unpassable cells is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import ndimage

from .dubins import dubins_shortest, sample_dubins
from .geometry import OCCUPIED, Ellipse2D, OccupancyGrid, Pose2D, RobotGeometry
from .paths import Path2D, densify_points
from .planners import RrtParams, SegmentChecker, plan_base


@dataclass(frozen=True)
class PoaParams:
    n_skip: int = 3
    n_clear: int = 10
    shift_min: float = -0.6
    shift_max: float = 0.6
    shift_step: float = 0.05
    turn_radius: float = 0.4
    waypoint_spacing: float = 0.1

    def __post_init__(self):
        if self.n_skip < 1 or self.n_clear < 1:
            raise ValueError("n_skip and n_clear must be >= 1")
        if not self.shift_min < 0 < self.shift_max:
            raise ValueError("shift range must straddle zero")
        if not self.shift_step > 0 or not self.turn_radius > 0 or not self.waypoint_spacing > 0:
            raise ValueError("shift_step, turn_radius and waypoint_spacing must be > 0")

    @classmethod
    def for_planner(cls, planner: str, **overrides) -> "PoaParams":
        """Stride/window pairs used in the benchmark: A* uses (5, 20), the others (3, 10)."""
        base = cls(n_skip=5, n_clear=20) if planner == "astar" else cls()
        return replace(base, **overrides)


@dataclass(frozen=True)
class CollisionReport:
    waypoint_index: int
    wheel: Literal["left", "right"]
    cell: tuple[int, int]


def wheel_ellipses(pose: Pose2D, geom: RobotGeometry = RobotGeometry()) -> tuple[Ellipse2D, Ellipse2D]:
    """Left and right wheel collision ellipses, major axis along the heading."""
    half = geom.track_width / 2.0
    lx, ly = -math.sin(pose.theta) * half, math.cos(pose.theta) * half
    left = Ellipse2D((pose.x + lx, pose.y + ly), geom.wheel_ellipse_a, geom.wheel_ellipse_b, pose.theta)
    right = Ellipse2D((pose.x - lx, pose.y - ly), geom.wheel_ellipse_a, geom.wheel_ellipse_b, pose.theta)
    return left, right


def _rect_hits_unit_disk(us, vs) -> bool:
    """Does the convex quad with CCW corners ``(us[k], vs[k])`` touch the unit disk?"""
    inside = True
    for k in range(4):
        pu, pv = us[k], vs[k]
        qu, qv = us[(k + 1) % 4], vs[(k + 1) % 4]
        du, dv = qu - pu, qv - pv
        if du * (-pv) - dv * (-pu) < 0.0:
            inside = False
        seg2 = du * du + dv * dv
        t = -(pu * du + pv * dv) / seg2 if seg2 > 0 else 0.0
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
        wu, wv = pu + t * du, pv + t * dv
        # same tangency tolerance as the vectorised overlap test
        if wu * wu + wv * wv <= 1.0 + 1e-9:
            return True
    return inside


class FootprintChecker:
    """Fast wheel-ellipse queries against one grid's occupied cells.

    Works on plain Python scalars; the vectorised equivalent is
    :func:`poa.geometry.cells_overlapping_ellipse`.
    """

    def __init__(self, grid: OccupancyGrid, geom: RobotGeometry = RobotGeometry()):
        self.grid = grid
        self.geom = geom
        self.res = grid.resolution
        self.ox, self.oy = grid.origin_x, grid.origin_y
        self.w, self.h = grid.width, grid.height
        occ = grid.cells == OCCUPIED
        self.occ = occ.ravel().tolist()
        reach = geom.track_width / 2.0 + geom.wheel_ellipse_a
        k = int(math.ceil(reach / self.res)) + 1
        near = ndimage.binary_dilation(occ, structure=np.ones((2 * k + 1, 2 * k + 1), bool)) if occ.any() else occ
        self.near = near.ravel().tolist()
        self.any = bool(occ.any())

    def _cell_index(self, x: float, y: float) -> int:
        c = math.floor((x - self.ox) / self.res)
        r = math.floor((y - self.oy) / self.res)
        if 0 <= c < self.w and 0 <= r < self.h:
            return r * self.w + c
        return -1

    def ellipse_hit(self, cx: float, cy: float, a: float, b: float, th: float) -> tuple[int, int] | None:
        c, s = math.cos(th), math.sin(th)
        hx = math.sqrt((a * c) ** 2 + (b * s) ** 2)
        hy = math.sqrt((a * s) ** 2 + (b * c) ** 2)
        res, ox, oy = self.res, self.ox, self.oy
        c0 = max(math.floor((cx - hx - ox) / res), 0)
        c1 = min(math.floor((cx + hx - ox) / res), self.w - 1)
        r0 = max(math.floor((cy - hy - oy) / res), 0)
        r1 = min(math.floor((cy + hy - oy) / res), self.h - 1)
        for r in range(r0, r1 + 1):
            base = r * self.w
            for col in range(c0, c1 + 1):
                if not self.occ[base + col]:
                    continue
                x0, y0 = ox + col * res - cx, oy + r * res - cy
                xs = (x0, x0 + res, x0 + res, x0)
                ys = (y0, y0, y0 + res, y0 + res)
                us = [(c * X + s * Y) / a for X, Y in zip(xs, ys)]
                vs = [(-s * X + c * Y) / b for X, Y in zip(xs, ys)]
                if _rect_hits_unit_disk(us, vs):
                    return col, r
        return None

    def wheel_hit(self, x: float, y: float, th: float):
        """``(wheel, cell)`` for the first wheel ellipse touching an occupied cell."""
        if not self.any:
            return None
        idx = self._cell_index(x, y)
        if idx >= 0 and not self.near[idx]:
            return None
        g = self.geom
        half = g.track_width / 2.0
        lx, ly = -math.sin(th) * half, math.cos(th) * half
        hit = self.ellipse_hit(x + lx, y + ly, g.wheel_ellipse_a, g.wheel_ellipse_b, th)
        if hit is not None:
            return "left", hit
        hit = self.ellipse_hit(x - lx, y - ly, g.wheel_ellipse_a, g.wheel_ellipse_b, th)
        if hit is not None:
            return "right", hit
        return None

    def body_hit(self, x: float, y: float, th: float) -> bool:
        """Is an occupied cell under the body corridor between the wheels?

        The corridor is a rectangle ``2 * wheel_ellipse_a`` long and
        ``track_width - 2 * wheel_ellipse_b`` wide, centred on the pose.
        """
        if not self.any:
            return False
        idx = self._cell_index(x, y)
        if idx >= 0 and not self.near[idx]:
            return False
        g = self.geom
        hl, hw = g.wheel_ellipse_a, g.body_gap / 2.0
        c, s = math.cos(th), math.sin(th)
        corners = [(x + c * u - s * v, y + s * u + c * v) for u, v in ((-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw))]
        xs = [p[0] for p in corners]
        ys = [p[1] for p in corners]
        res, ox, oy = self.res, self.ox, self.oy
        c0 = max(math.floor((min(xs) - ox) / res), 0)
        c1 = min(math.floor((max(xs) - ox) / res), self.w - 1)
        r0 = max(math.floor((min(ys) - oy) / res), 0)
        r1 = min(math.floor((max(ys) - oy) / res), self.h - 1)
        for r in range(r0, r1 + 1):
            for col in range(c0, c1 + 1):
                if self.occ[r * self.w + col] and _rect_overlaps_rotated(
                    ox + col * res, oy + r * res, res, x, y, c, s, hl, hw
                ):
                    return True
        return False


def _rect_overlaps_rotated(x0, y0, res, px, py, c, s, hl, hw) -> bool:
    """Separating-axis test: axis-aligned cell vs the rotated body rectangle."""
    cell = [(x0, y0), (x0 + res, y0), (x0 + res, y0 + res), (x0, y0 + res)]
    body = [(px + c * u - s * v, py + s * u + c * v) for u, v in ((-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw))]
    for ax, ay in ((1.0, 0.0), (0.0, 1.0), (c, s), (-s, c)):
        a = [ax * X + ay * Y for X, Y in cell]
        b = [ax * X + ay * Y for X, Y in body]
        if max(a) < min(b) or max(b) < min(a):
            return False
    return True


def check_waypoint(
    pose: Pose2D,
    passable_grid: OccupancyGrid,
    geom: RobotGeometry = RobotGeometry(),
    index: int = 0,
    checker: FootprintChecker | None = None,
) -> CollisionReport | None:
    """Report a wheel touching an occupied passable cell; the body gap is not checked."""
    checker = checker or FootprintChecker(passable_grid, geom)
    hit = checker.wheel_hit(pose.x, pose.y, pose.theta)
    if hit is None:
        return None
    return CollisionReport(index, hit[0], hit[1])


def shift_offsets(params: PoaParams) -> list[float]:
    """Non-zero lateral offsets ordered by magnitude, positive before negative."""
    lo = math.ceil(params.shift_min / params.shift_step - 1e-9)
    hi = math.floor(params.shift_max / params.shift_step + 1e-9)
    ks = [k for k in range(lo, hi + 1) if k != 0]
    ks.sort(key=lambda k: (abs(k), -k))
    return [round(k * params.shift_step, 12) for k in ks]


def generate_alternatives(path: Path2D, i: int, params: PoaParams = PoaParams()) -> list[Pose2D]:
    pose = path[i]
    nx, ny = -math.sin(pose.theta), math.cos(pose.theta)
    return [Pose2D(pose.x + d * nx, pose.y + d * ny, pose.theta) for d in shift_offsets(params)]


def _point_polyline_distance(pts: np.ndarray, line: np.ndarray) -> np.ndarray:
    if len(line) == 1:
        return np.hypot(pts[:, 0] - line[0, 0], pts[:, 1] - line[0, 1])
    p = line[:-1][None, :, :]
    d = (line[1:] - line[:-1])[None, :, :]
    q = pts[:, None, :]
    seg2 = np.sum(d * d, axis=-1)
    t = np.clip(np.sum((q - p) * d, axis=-1) / np.where(seg2 > 0, seg2, 1.0), 0.0, 1.0)
    proj = p + t[..., None] * d
    return np.min(np.linalg.norm(q - proj, axis=-1), axis=1)


@dataclass
class _RepairLog:
    splices: list = field(default_factory=list)
    residual: list = field(default_factory=list)


def repair_path(
    path: Path2D,
    passable_grid: OccupancyGrid,
    unpassable_grid: OccupancyGrid,
    geom: RobotGeometry = RobotGeometry(),
    params: PoaParams = PoaParams(),
) -> Path2D:
    """Splice Dubins detours around wheel collisions with passable cells.

    Scanning resumes ``n_skip`` past the far anchor of each splice.  A hazard
    with no safe alternative is left in place and listed in
    ``meta["residual_collisions"]``.
    """
    passable_grid.require_same_geometry(unpassable_grid)
    n = len(path)
    wheels = FootprintChecker(passable_grid, geom)
    walls = SegmentChecker(unpassable_grid)
    sample_step = min(params.waypoint_spacing, unpassable_grid.resolution / 2.0)
    max_dev = params.shift_max + params.turn_radius
    xy, th = path.xy, path.theta
    log = _RepairLog()

    def hazardous(k: int):
        return wheels.wheel_hit(xy[k, 0], xy[k, 1], th[k])

    def curve_ok(poses: list[Pose2D], corridor: np.ndarray) -> bool:
        for p in poses:
            if not walls.point_free(p.x, p.y):
                return False
        for p in poses:
            if wheels.wheel_hit(p.x, p.y, p.theta) is not None:
                return False
        pts = np.array([(p.x, p.y) for p in poses])
        return bool(np.all(_point_polyline_distance(pts, corridor) <= max_dev + 1e-9))

    out_xy: list[np.ndarray] = []
    out_th: list[np.ndarray] = []
    copied = 0  # original waypoints [0, copied) already emitted
    floor = 0  # anchors may not reach back into an earlier splice
    i = 0
    while i < n:
        hit = hazardous(i)
        if hit is None:
            i += params.n_skip
            continue
        a = max(i - params.n_clear, floor)
        b = min(i + params.n_clear, n - 1)
        # an anchor inside a collision would doom every candidate curve
        for _ in range(params.n_clear):
            if a > floor and hazardous(a) is not None:
                a -= 1
        for _ in range(params.n_clear):
            if b < n - 1 and hazardous(b) is not None:
                b += 1
        report = CollisionReport(i, hit[0], hit[1])
        if a >= i or b <= i:
            log.residual.append(report)
            i += params.n_skip
            continue
        pa = Pose2D(xy[a, 0], xy[a, 1], th[a])
        pb = Pose2D(xy[b, 0], xy[b, 1], th[b])
        corridor = xy[a : b + 1]
        accepted = None
        for d, alt in zip(shift_offsets(params), generate_alternatives(path, i, params)):
            c1 = sample_dubins(dubins_shortest(pa, alt, params.turn_radius), sample_step)
            if not curve_ok(c1, corridor):
                continue
            c2 = sample_dubins(dubins_shortest(alt, pb, params.turn_radius), sample_step)
            if not curve_ok(c2, corridor):
                continue
            accepted = (d, c1, c2)
            break
        if accepted is None:
            log.residual.append(report)
            i += params.n_skip
            continue
        d, c1, c2 = accepted
        out_xy.append(xy[copied:a])
        out_th.append(th[copied:a])
        splice = c1 + c2[1:]
        out_xy.append(np.array([(p.x, p.y) for p in splice[:-1]]))
        out_th.append(np.array([p.theta for p in splice[:-1]]))
        copied = b
        floor = b
        log.splices.append({"index": i, "anchors": [a, b], "shift": d, "wheel": hit[0],
                            "at": [float(xy[i, 0]), float(xy[i, 1])]})
        i = b + params.n_skip
    out_xy.append(xy[copied:])
    out_th.append(th[copied:])
    new_xy = np.concatenate([p.reshape(-1, 2) for p in out_xy])
    new_th = np.concatenate(out_th)
    meta = {
        **path.meta,
        "repair_count": len(log.splices),
        "splices": log.splices,
        "residual_collisions": [
            {"index": r.waypoint_index, "wheel": r.wheel, "cell": list(r.cell)} for r in log.residual
        ],
        "resume_rule": "after_far_anchor",
    }
    return Path2D(new_xy, new_th, meta)


def poa_plan(
    base: str,
    passable_grid: OccupancyGrid,
    unpassable_grid: OccupancyGrid,
    start: Pose2D,
    goal: Pose2D,
    geom: RobotGeometry = RobotGeometry(),
    params: PoaParams | None = None,
    rrt: RrtParams = RrtParams(),
) -> Path2D:
    """Plan with ``base`` on the unpassable grid alone, then repair for passable stones."""
    params = params or PoaParams.for_planner(base)
    raw = plan_base(base, unpassable_grid, start, goal, geom, rrt)
    dense = Path2D.from_points(densify_points(raw.xy, params.waypoint_spacing), raw.meta)
    fixed = repair_path(dense, passable_grid, unpassable_grid, geom, params)
    if fixed.meta["repair_count"] == 0:
        # nothing spliced: hand back the baseline waypoints untouched
        fixed = Path2D(raw.xy, raw.theta, {**fixed.meta, **raw.meta})
    return fixed.with_meta(base_planner=base, poa=True, n_skip=params.n_skip, n_clear=params.n_clear)
