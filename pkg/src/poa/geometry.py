"""Shared domain types: poses, occupancy grids, labelled clouds, robot footprint.

Grids store cells as an ``int8`` array indexed ``[row, col]`` where row 0 is
the minimum-y edge.  Public helpers speak in ``(col, row)`` pairs, matching
the ``(x, y)`` ordering of world coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryMismatch, OutOfBounds, PoaError

FREE = 0
OCCUPIED = 1
UNKNOWN = -1

_GRID_CHARS = {FREE: ".", OCCUPIED: "#", UNKNOWN: "?"}
_GRID_VALUES = {".": FREE, "#": OCCUPIED, "?": UNKNOWN}

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap ``theta`` into (-pi, pi]."""
    a = math.remainder(theta, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


def normalize_angles(theta: np.ndarray) -> np.ndarray:
    a = np.remainder(np.asarray(theta, dtype=float) + math.pi, TWO_PI) - math.pi
    return np.where(a <= -math.pi, a + TWO_PI, a)


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def translated(self, dx: float, dy: float) -> "Pose2D":
        return Pose2D(self.x + dx, self.y + dy, self.theta)

    def rotated(self, dtheta: float) -> "Pose2D":
        return Pose2D(self.x, self.y, self.theta + dtheta)

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


@dataclass(frozen=True)
class Pose3D:
    x: float
    y: float
    z: float
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("yaw", "pitch", "roll"):
            object.__setattr__(self, name, normalize_angle(float(getattr(self, name))))


@dataclass(frozen=True)
class Ellipse2D:
    center: tuple[float, float]
    semi_major: float
    semi_minor: float
    orientation: float = 0.0

    def __post_init__(self):
        if not (self.semi_major >= self.semi_minor > 0):
            raise ValueError("ellipse requires semi_major >= semi_minor > 0")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "orientation", normalize_angle(self.orientation))

    def contains(self, x, y):
        """Implicit-equation membership test (vectorised)."""
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        u = (c * dx + s * dy) / self.semi_major
        v = (-s * dx + c * dy) / self.semi_minor
        return u * u + v * v <= 1.0

    def bounding_box(self) -> tuple[float, float, float, float]:
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        a, b = self.semi_major, self.semi_minor
        hx = math.sqrt((a * c) ** 2 + (b * s) ** 2)
        hy = math.sqrt((a * s) ** 2 + (b * c) ** 2)
        cx, cy = self.center
        return cx - hx, cy - hy, cx + hx, cy + hy


@dataclass(frozen=True)
class RobotGeometry:
    """Two-wheeled robot footprint.

    The wheel ellipses sit ``track_width / 2`` either side of the body centre;
    a passable obstacle must fit in the gap between them, so
    ``clearance_width < track_width - 2 * wheel_ellipse_b`` is enforced.
    """

    track_width: float = 0.60
    wheel_ellipse_a: float = 0.30
    wheel_ellipse_b: float = 0.12
    clearance_height: float = 0.28
    clearance_width: float = 0.26
    turn_radius_min: float = 0.4
    wheel_base_contact: float = 0.3

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"RobotGeometry.{name} must be > 0, got {value}")
        if self.wheel_ellipse_a < self.wheel_ellipse_b:
            raise ValueError("wheel_ellipse_a must be >= wheel_ellipse_b")
        if not self.clearance_width < self.track_width - 2.0 * self.wheel_ellipse_b:
            raise ValueError("clearance_width must fit strictly between the wheel ellipses")

    @property
    def half_width(self) -> float:
        return self.track_width / 2.0 + self.wheel_ellipse_b

    @property
    def body_gap(self) -> float:
        """Lateral free gap between the inner edges of the two wheel ellipses."""
        return self.track_width - 2.0 * self.wheel_ellipse_b


class Label(IntEnum):
    FREE_SPACE = 0
    PASSABLE = 1
    UNPASSABLE = 2


@dataclass(frozen=True)
class LabelledPoint:
    x: float
    y: float
    z: float
    label: Label
    instance_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "label", Label(self.label))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabelledPointCloud:
    """Unordered labelled points stored column-wise.

    ``instance_ids`` uses -1 for points that belong to no stone instance.
    """

    points: np.ndarray
    labels: np.ndarray
    instance_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        labels = np.array(self.labels, dtype=np.int8).reshape(-1)
        if len(labels) != len(pts):
            raise ValueError("points and labels differ in length")
        if labels.size and (labels.min() < 0 or labels.max() > 2):
            raise ValueError("labels must be 0 (free), 1 (passable) or 2 (unpassable)")
        ids = self.instance_ids
        ids = np.full(len(pts), -1, dtype=np.int64) if ids is None else np.array(ids, dtype=np.int64).reshape(-1)
        if len(ids) != len(pts):
            raise ValueError("instance_ids and points differ in length")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "instance_ids", _frozen(ids))

    @classmethod
    def empty(cls) -> "LabelledPointCloud":
        return cls(np.zeros((0, 3)), np.zeros(0, dtype=np.int8))

    @classmethod
    def from_points(cls, pts: Iterable[LabelledPoint]) -> "LabelledPointCloud":
        pts = list(pts)
        if not pts:
            return cls.empty()
        xyz = np.array([(p.x, p.y, p.z) for p in pts], dtype=float)
        labels = np.array([int(p.label) for p in pts], dtype=np.int8)
        ids = np.array([-1 if p.instance_id is None else p.instance_id for p in pts], dtype=np.int64)
        return cls(xyz, labels, ids)

    @classmethod
    def concatenate(cls, clouds: Sequence["LabelledPointCloud"]) -> "LabelledPointCloud":
        clouds = [c for c in clouds if len(c)]
        if not clouds:
            return cls.empty()
        return cls(
            np.concatenate([c.points for c in clouds]),
            np.concatenate([c.labels for c in clouds]),
            np.concatenate([c.instance_ids for c in clouds]),
        )

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        for (x, y, z), lab, iid in zip(self.points, self.labels, self.instance_ids):
            yield LabelledPoint(x, y, z, Label(int(lab)), None if iid < 0 else int(iid))

    def subset(self, mask) -> "LabelledPointCloud":
        return LabelledPointCloud(self.points[mask], self.labels[mask], self.instance_ids[mask])

    def with_labels(self, labels) -> "LabelledPointCloud":
        return LabelledPointCloud(self.points, labels, self.instance_ids)

    def of_label(self, label: Label) -> "LabelledPointCloud":
        return self.subset(self.labels == int(label))


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Fixed-resolution raster with cells in {FREE, OCCUPIED, UNKNOWN}.

    The array is read-only; every modifying helper returns a new grid, so a
    grid can be handed to concurrent readers without copying.
    """

    resolution: float
    origin_x: float
    origin_y: float
    cells: np.ndarray

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be > 0")
        cells = np.array(self.cells, dtype=np.int8)
        if cells.ndim != 2:
            raise ValueError("cells must be a 2D array indexed [row, col]")
        if not np.isin(cells, (FREE, OCCUPIED, UNKNOWN)).all():
            raise ValueError("cell values must be FREE, OCCUPIED or UNKNOWN")
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin_x", float(self.origin_x))
        object.__setattr__(self, "origin_y", float(self.origin_y))
        object.__setattr__(self, "cells", _frozen(cells))

    @classmethod
    def filled(cls, width: int, height: int, resolution: float, origin=(0.0, 0.0), value: int = UNKNOWN):
        return cls(resolution, origin[0], origin[1], np.full((height, width), value, dtype=np.int8))

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def origin(self) -> Pose2D:
        return Pose2D(self.origin_x, self.origin_y, 0.0)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width * self.resolution,
            self.origin_y + self.height * self.resolution,
        )

    @property
    def occupied(self) -> np.ndarray:
        return self.cells == OCCUPIED

    def same_geometry(self, other: "OccupancyGrid") -> bool:
        return (
            self.cells.shape == other.cells.shape
            and self.resolution == other.resolution
            and self.origin_x == other.origin_x
            and self.origin_y == other.origin_y
        )

    def require_same_geometry(self, other: "OccupancyGrid") -> None:
        if not self.same_geometry(other):
            raise GeometryMismatch("grids differ in shape, resolution or origin")

    def with_cells(self, cells: np.ndarray) -> "OccupancyGrid":
        return replace(self, cells=cells)

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def state(self, cell: tuple[int, int]) -> int:
        col, row = cell
        return int(self.cells[row, col])

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self.same_geometry(other) and np.array_equal(self.cells, other.cells)

    __hash__ = None


def world_to_cell(grid: OccupancyGrid, point) -> tuple[int, int]:
    """Map a world ``(x, y)`` to the ``(col, row)`` whose half-open extent holds it."""
    x, y = float(point[0]), float(point[1])
    col = math.floor((x - grid.origin_x) / grid.resolution)
    row = math.floor((y - grid.origin_y) / grid.resolution)
    if not grid.in_bounds(col, row):
        raise OutOfBounds(f"point ({x}, {y}) lies outside the grid")
    return col, row


def world_to_cells(grid: OccupancyGrid, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised ``world_to_cell``; returns ``(cols, rows, inside_mask)``."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    cols = np.floor((xy[:, 0] - grid.origin_x) / grid.resolution).astype(np.int64)
    rows = np.floor((xy[:, 1] - grid.origin_y) / grid.resolution).astype(np.int64)
    inside = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
    return cols, rows, inside


def cell_center(grid: OccupancyGrid, cell: tuple[int, int]) -> tuple[float, float]:
    col, row = cell
    return (
        grid.origin_x + (col + 0.5) * grid.resolution,
        grid.origin_y + (row + 0.5) * grid.resolution,
    )


def cell_bounds(grid: OccupancyGrid, cell: tuple[int, int]) -> tuple[float, float, float, float]:
    col, row = cell
    x0 = grid.origin_x + col * grid.resolution
    y0 = grid.origin_y + row * grid.resolution
    return x0, y0, x0 + grid.resolution, y0 + grid.resolution


def _ellipse_rect_overlap(e: Ellipse2D, x0, y0, x1, y1) -> np.ndarray:
    """Exact overlap test between an ellipse and axis-aligned rectangles.

    The rectangles are mapped into the ellipse's unit-circle frame, where they
    become parallelograms; overlap holds iff the origin lies inside the
    parallelogram or its closest boundary point is within distance 1.
    """
    x0, y0, x1, y1 = (np.asarray(v, dtype=float) for v in (x0, y0, x1, y1))
    c, s = math.cos(e.orientation), math.sin(e.orientation)
    cx, cy = e.center
    # corners in CCW order: (x0,y0) (x1,y0) (x1,y1) (x0,y1)
    xs = np.stack([x0, x1, x1, x0], axis=-1) - cx
    ys = np.stack([y0, y0, y1, y1], axis=-1) - cy
    u = (c * xs + s * ys) / e.semi_major
    v = (-s * xs + c * ys) / e.semi_minor
    pu, pv = u, v
    qu, qv = np.roll(u, -1, axis=-1), np.roll(v, -1, axis=-1)
    du, dv = qu - pu, qv - pv
    inside = np.all(du * (-pv) - dv * (-pu) >= 0.0, axis=-1)
    seg2 = du * du + dv * dv
    t = np.clip(-(pu * du + pv * dv) / np.where(seg2 > 0, seg2, 1.0), 0.0, 1.0)
    wx, wy = pu + t * du, pv + t * dv
    # tolerance keeps exact tangency counted as contact despite rounding
    near = np.min(wx * wx + wy * wy, axis=-1) <= 1.0 + 1e-9
    return inside | near


def ellipse_overlaps_cell(e: Ellipse2D, grid: OccupancyGrid, cell: tuple[int, int]) -> bool:
    col, row = cell
    if not grid.in_bounds(col, row):
        raise OutOfBounds(f"cell {cell} outside the grid")
    return bool(_ellipse_rect_overlap(e, *cell_bounds(grid, cell)))


def cells_overlapping_ellipse(grid: OccupancyGrid, e: Ellipse2D) -> tuple[np.ndarray, np.ndarray]:
    """All in-bounds ``(cols, rows)`` whose square footprint touches ``e``."""
    bx0, by0, bx1, by1 = e.bounding_box()
    res = grid.resolution
    c0 = max(math.floor((bx0 - grid.origin_x) / res), 0)
    c1 = min(math.floor((bx1 - grid.origin_x) / res), grid.width - 1)
    r0 = max(math.floor((by0 - grid.origin_y) / res), 0)
    r1 = min(math.floor((by1 - grid.origin_y) / res), grid.height - 1)
    if c0 > c1 or r0 > r1:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
    cols, rows = cols.ravel(), rows.ravel()
    x0 = grid.origin_x + cols * res
    y0 = grid.origin_y + rows * res
    hit = _ellipse_rect_overlap(e, x0, y0, x0 + res, y0 + res)
    return cols[hit], rows[hit]


def ellipse_hits_occupied(grid: OccupancyGrid, e: Ellipse2D) -> tuple[int, int] | None:
    """First occupied cell overlapped by ``e`` (row-major order) or None."""
    cols, rows = cells_overlapping_ellipse(grid, e)
    if cols.size == 0:
        return None
    occ = grid.cells[rows, cols] == OCCUPIED
    if not occ.any():
        return None
    k = int(np.argmax(occ))
    return int(cols[k]), int(rows[k])


# -- file formats ---------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def grid_to_text(grid: OccupancyGrid) -> str:
    lines = [
        f"POAGRID v1 {grid.width} {grid.height} {_fmt(grid.resolution)} "
        f"{_fmt(grid.origin_x)} {_fmt(grid.origin_y)}"
    ]
    for row in range(grid.height):
        lines.append("".join(_GRID_CHARS[int(v)] for v in grid.cells[row]))
    return "\n".join(lines) + "\n"


def grid_from_text(text: str) -> OccupancyGrid:
    lines = text.splitlines()
    if not lines:
        raise PoaError("empty grid file")
    head = lines[0].split()
    if len(head) != 7 or head[0] != "POAGRID" or head[1] != "v1":
        raise PoaError(f"bad grid header: {lines[0]!r}")
    width, height = int(head[2]), int(head[3])
    res, ox, oy = float(head[4]), float(head[5]), float(head[6])
    body = lines[1 : 1 + height]
    if len(body) != height:
        raise PoaError(f"expected {height} grid rows, found {len(body)}")
    cells = np.empty((height, width), dtype=np.int8)
    for r, line in enumerate(body):
        if len(line) != width:
            raise PoaError(f"grid row {r} has {len(line)} cells, expected {width}")
        try:
            cells[r] = [_GRID_VALUES[ch] for ch in line]
        except KeyError as exc:
            raise PoaError(f"grid row {r}: invalid cell character {exc.args[0]!r}") from None
    return OccupancyGrid(res, ox, oy, cells)


def write_grid(path: str | Path, grid: OccupancyGrid) -> None:
    Path(path).write_text(grid_to_text(grid), encoding="ascii")


def read_grid(path: str | Path) -> OccupancyGrid:
    return grid_from_text(Path(path).read_text(encoding="ascii"))


def write_cloud(path: str | Path, cloud: LabelledPointCloud) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"POACLOUD v1 {len(cloud)}\n")
        for (x, y, z), lab, iid in zip(cloud.points.tolist(), cloud.labels.tolist(), cloud.instance_ids.tolist()):
            if iid >= 0:
                fh.write(f"{x:.6f} {y:.6f} {z:.6f} {lab} {iid}\n")
            else:
                fh.write(f"{x:.6f} {y:.6f} {z:.6f} {lab}\n")


def read_cloud(path: str | Path) -> LabelledPointCloud:
    with open(path, encoding="ascii") as fh:
        head = fh.readline().split()
        if len(head) != 3 or head[0] != "POACLOUD" or head[1] != "v1":
            raise PoaError(f"bad cloud header in {path}")
        count = int(head[2])
        xyz = np.empty((count, 3))
        labels = np.empty(count, dtype=np.int8)
        ids = np.full(count, -1, dtype=np.int64)
        n = 0
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) not in (4, 5) or n >= count:
                raise PoaError(f"{path}:{lineno}: malformed point record")
            xyz[n] = float(parts[0]), float(parts[1]), float(parts[2])
            labels[n] = int(parts[3])
            if len(parts) == 5:
                ids[n] = int(parts[4])
            n += 1
    if n != count:
        raise PoaError(f"{path}: header announces {count} points, found {n}")
    return LabelledPointCloud(xyz, labels, ids)
