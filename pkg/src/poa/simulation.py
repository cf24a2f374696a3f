"""Kinematic traversal model: path length and time under a piecewise speed law."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import OccupancyGrid, RobotGeometry
from .paths import Path2D, Path3D, polyline_length
from .poa2d import FootprintChecker


@dataclass(frozen=True)
class SpeedModel:
    v_nominal: float = 0.12
    v_over_passable: float = 0.06
    v_turn_scale: float = 0.8

    def __post_init__(self):
        if not 0 < self.v_over_passable <= self.v_nominal:
            raise ValueError("need 0 < v_over_passable <= v_nominal")
        if not 0 < self.v_turn_scale <= 1:
            raise ValueError("v_turn_scale must lie in (0, 1]")


def path_length(path: Path2D | Path3D) -> float:
    if isinstance(path, Path3D):
        return polyline_length(path.xyz)
    return polyline_length(path.xy)


def _curvature(xy: np.ndarray) -> np.ndarray:
    """Turning angle per unit length at each waypoint; zero at the ends."""
    n = len(xy)
    kappa = np.zeros(n)
    if n < 3:
        return kappa
    d = np.diff(xy, axis=0)
    seg = np.hypot(d[:, 0], d[:, 1])
    head = np.arctan2(d[:, 1], d[:, 0])
    turn = np.abs(np.angle(np.exp(1j * (head[1:] - head[:-1]))))
    mean_len = (seg[1:] + seg[:-1]) / 2.0
    ok = (seg[1:] > 0) & (seg[:-1] > 0)
    kappa[1:-1] = np.where(ok, turn / np.where(mean_len > 0, mean_len, 1.0), 0.0)
    return kappa


def waypoint_speeds(
    path: Path2D | Path3D,
    passable_grid: OccupancyGrid,
    geom: RobotGeometry = RobotGeometry(),
    speed: SpeedModel = SpeedModel(),
) -> np.ndarray:
    if isinstance(path, Path3D):
        xy, yaw = path.xyz[:, :2], path.yaw
    else:
        xy, yaw = path.xy, path.theta
    checker = FootprintChecker(passable_grid, geom)
    kappa = _curvature(xy)
    sharp = kappa > 1.0 / (2.0 * geom.turn_radius_min)
    v = np.empty(len(xy))
    for j, ((x, y), th) in enumerate(zip(xy.tolist(), yaw.tolist())):
        if checker.wheel_hit(x, y, th) is not None or checker.body_hit(x, y, th):
            v[j] = speed.v_over_passable
        elif sharp[j]:
            v[j] = speed.v_nominal * speed.v_turn_scale
        else:
            v[j] = speed.v_nominal
    return v


def simulate_traversal(
    path: Path2D | Path3D,
    passable_grid: OccupancyGrid,
    geom: RobotGeometry = RobotGeometry(),
    speed: SpeedModel = SpeedModel(),
) -> float:
    """Seconds to drive ``path``; each segment runs at its starting waypoint's speed."""
    pts = path.xyz if isinstance(path, Path3D) else path.xy
    if len(pts) < 2:
        return 0.0
    seg = np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))
    v = waypoint_speeds(path, passable_grid, geom, speed)
    return float(np.sum(seg / v[:-1]))
