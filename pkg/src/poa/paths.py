"""Waypoint containers for 2D and 3D paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Pose2D, Pose3D, normalize_angles


def headings_from_points(xy: np.ndarray) -> np.ndarray:
    """Central-difference headings, one-sided at the two ends."""
    xy = np.asarray(xy, dtype=float)
    n = len(xy)
    if n < 2:
        return np.zeros(n)
    d = np.empty_like(xy)
    d[1:-1] = xy[2:] - xy[:-2]
    d[0] = xy[1] - xy[0]
    d[-1] = xy[-1] - xy[-2]
    return normalize_angles(np.arctan2(d[:, 1], d[:, 0]))


def densify_points(xy: np.ndarray, step: float) -> np.ndarray:
    """Insert evenly spaced points so no segment exceeds ``step``."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if len(xy) < 2:
        return xy.copy()
    out = [xy[:1]]
    for p, q in zip(xy[:-1], xy[1:]):
        seg = math.hypot(q[0] - p[0], q[1] - p[1])
        if seg == 0.0:
            continue
        k = max(1, math.ceil(seg / step - 1e-9))
        t = np.arange(1, k + 1)[:, None] / k
        out.append(p + t * (q - p))
    return np.concatenate(out)


def polyline_length(pts: np.ndarray) -> float:
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 2:
        return 0.0
    return float(np.sum(np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))))


@dataclass(frozen=True, eq=False)
class Path2D:
    """Ordered 2D waypoints with headings; ``meta`` carries provenance."""

    xy: np.ndarray
    theta: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        xy = np.array(self.xy, dtype=float).reshape(-1, 2)
        th = normalize_angles(np.array(self.theta, dtype=float).reshape(-1))
        if len(th) != len(xy):
            raise ValueError("xy and theta differ in length")
        xy.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "theta", th)

    @classmethod
    def from_points(cls, xy, meta: dict | None = None) -> "Path2D":
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return cls(xy, headings_from_points(xy), dict(meta or {}))

    @classmethod
    def from_poses(cls, poses: Sequence[Pose2D], meta: dict | None = None) -> "Path2D":
        xy = np.array([(p.x, p.y) for p in poses], dtype=float).reshape(-1, 2)
        th = np.array([p.theta for p in poses], dtype=float)
        return cls(xy, th, dict(meta or {}))

    def __len__(self) -> int:
        return len(self.xy)

    def __getitem__(self, i: int) -> Pose2D:
        return Pose2D(self.xy[i, 0], self.xy[i, 1], self.theta[i])

    @property
    def waypoints(self) -> list[Pose2D]:
        return [self[i] for i in range(len(self))]

    @property
    def start(self) -> Pose2D:
        return self[0]

    @property
    def goal(self) -> Pose2D:
        return self[len(self) - 1]

    def length(self) -> float:
        return polyline_length(self.xy)

    def densified(self, step: float) -> "Path2D":
        return Path2D.from_points(densify_points(self.xy, step), self.meta)

    def with_meta(self, **kw) -> "Path2D":
        return Path2D(self.xy, self.theta, {**self.meta, **kw})


@dataclass(frozen=True, eq=False)
class Path3D:
    """3D waypoints; ``roll`` and ``pitch`` hold the per-waypoint attitude estimates."""

    xyz: np.ndarray
    yaw: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        xyz = np.array(self.xyz, dtype=float).reshape(-1, 3)
        arrs = [normalize_angles(np.array(getattr(self, k), dtype=float).reshape(-1)) for k in ("yaw", "roll", "pitch")]
        for a in arrs:
            if len(a) != len(xyz):
                raise ValueError("attitude arrays must match waypoint count")
        for name, a in zip(("yaw", "roll", "pitch"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        xyz.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)

    def __len__(self) -> int:
        return len(self.xyz)

    @property
    def waypoints(self) -> list[Pose3D]:
        return [
            Pose3D(x, y, z, yaw, pitch, roll)
            for (x, y, z), yaw, pitch, roll in zip(self.xyz.tolist(), self.yaw, self.pitch, self.roll)
        ]

    def length(self) -> float:
        return polyline_length(self.xyz)

    def to_2d(self) -> Path2D:
        return Path2D(self.xyz[:, :2], self.yaw, dict(self.meta))

    def to_csv(self) -> str:
        lines = ["x,y,z,yaw,roll,pitch"]
        for (x, y, z), yaw, roll, pitch in zip(self.xyz.tolist(), self.yaw, self.roll, self.pitch):
            lines.append(f"{x:.6f},{y:.6f},{z:.6f},{yaw:.6f},{roll:.6f},{pitch:.6f}")
        return "\n".join(lines) + "\n"


def path2d_to_csv(path: Path2D) -> str:
    lines = ["x,y,yaw"]
    for (x, y), th in zip(path.xy.tolist(), path.theta.tolist()):
        lines.append(f"{x:.6f},{y:.6f},{th:.6f}")
    return "\n".join(lines) + "\n"
