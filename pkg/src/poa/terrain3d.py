"""Lifting 2D plans onto a labelled point-cloud terrain.

A :class:`TerrainModel` keeps a cleaned, downsampled copy of the cloud, a
kd-tree over its ``(x, y)`` coordinates for vertical projection and a smooth
thin-plate surface fitted to free-space points only, which is what roll and
pitch are read from.  :func:`plan_3d` alternates 2D POA planning with an
attitude audit, blocking the cells around unstable waypoints until the audit
comes back clean.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.interpolate import RBFInterpolator
from scipy.spatial import cKDTree

from .errors import DegenerateSurface, EmptyCloud, NoFeasiblePath, NoNeighbour
from .geometry import (
    OCCUPIED,
    Label,
    LabelledPointCloud,
    OccupancyGrid,
    Pose2D,
    Pose3D,
    RobotGeometry,
    world_to_cell,
    world_to_cells,
)
from .paths import Path2D, Path3D
from .planners import RrtParams
from .poa2d import PoaParams, poa_plan

log = logging.getLogger(__name__)

SURFACE_DECIMATION = 0.25
SURFACE_MAX_CENTRES = 4000
SURFACE_SMOOTHING = 1e-3
MIN_SURFACE_POINTS = 10
OUTLIER_DENSITY_FLOOR = 1.5


@dataclass(frozen=True)
class StabilityLimits:
    gamma_max: float = 0.175
    phi_max: float = 0.175

    def __post_init__(self):
        if not (self.gamma_max > 0 and self.phi_max > 0):
            raise ValueError("stability limits must be positive")


# -- preprocessing -------------------------------------------------------------

def inflate_grid(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Mark every cell whose centre lies within ``radius`` of an occupied cell centre."""
    r = int(math.floor(radius / grid.resolution + 1e-9))
    if r <= 0:
        return grid
    k = np.arange(-r, r + 1)
    disk = (k[:, None] ** 2 + k[None, :] ** 2) * grid.resolution ** 2 <= radius ** 2 + 1e-12
    grown = ndimage.binary_dilation(grid.occupied, structure=disk)
    return grid.with_cells(np.where(grown, OCCUPIED, grid.cells).astype(np.int8))


def relabel_cloud(cloud: LabelledPointCloud, passable: OccupancyGrid, unpassable: OccupancyGrid) -> LabelledPointCloud:
    """Labels from the grids: unpassable cell wins, then passable, else free.

    Points outside the grid keep their original label.
    """
    cols, rows, inside = world_to_cells(unpassable, cloud.points[:, :2])
    labels = cloud.labels.copy()
    u = np.zeros(len(cloud), dtype=bool)
    p = np.zeros(len(cloud), dtype=bool)
    u[inside] = unpassable.cells[rows[inside], cols[inside]] == OCCUPIED
    p[inside] = passable.cells[rows[inside], cols[inside]] == OCCUPIED
    labels[inside] = Label.FREE_SPACE
    labels[p] = Label.PASSABLE
    labels[u] = Label.UNPASSABLE
    return cloud.with_labels(labels)


def remove_outliers(cloud: LabelledPointCloud, k: int = 8, stddev: float = 1.0) -> LabelledPointCloud:
    """Drop points whose mean distance to their ``k`` nearest neighbours is unusually large.

    Statistics are taken per label class: stones are sampled far more densely
    than bare ground, and a single global threshold would strip the ground.
    """
    keep = np.ones(len(cloud), dtype=bool)
    for label in np.unique(cloud.labels):
        sel = np.nonzero(cloud.labels == label)[0]
        if len(sel) <= k:
            continue
        pts = cloud.points[sel]
        dist, _ = cKDTree(pts).query(pts, k=k + 1)
        mean_d = dist[:, 1:].mean(axis=1)
        # on a near-uniform lattice the spread is tiny; a point about as dense
        # as the class median is never isolated, whatever the z-score says
        keep[sel] = (mean_d <= mean_d.mean() + stddev * mean_d.std()) | (mean_d <= OUTLIER_DENSITY_FLOOR * np.median(mean_d))
    return cloud.subset(keep)


def voxel_downsample(cloud: LabelledPointCloud, voxel: float) -> LabelledPointCloud:
    """One point per occupied voxel: the centroid, carrying the majority label.

    Label ties go to the more restrictive class.
    """
    if len(cloud) == 0:
        return cloud
    keys = np.floor(cloud.points / voxel).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    m = len(counts)
    sums = np.zeros((m, 3))
    np.add.at(sums, inverse, cloud.points)
    centroids = sums / counts[:, None]
    votes = np.zeros((m, 3), dtype=np.int64)
    np.add.at(votes, (inverse, cloud.labels.astype(np.int64)), 1)
    labels = (2 - np.argmax(votes[:, ::-1], axis=1)).astype(np.int8)
    # instance id of the first point in each voxel that carries the winning label
    ids = np.full(m, -1, dtype=np.int64)
    match = cloud.labels == labels[inverse]
    order = np.nonzero(match)[0][::-1]
    ids[inverse[order]] = cloud.instance_ids[order]
    return LabelledPointCloud(centroids, labels, ids)


def _decimate(points: np.ndarray, cell: float) -> np.ndarray:
    keys = np.floor(points[:, :2] / cell).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inverse, points)
    return sums / counts[:, None]


@dataclass(frozen=True, eq=False)
class TerrainModel:
    cloud: LabelledPointCloud
    index: cKDTree
    surface: RBFInterpolator
    voxel: float

    def height(self, x, y):
        """Free-space surface height; scalar in, scalar out."""
        xa, ya = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        z = self.surface(np.column_stack([xa.ravel(), ya.ravel()])).reshape(xa.shape)
        return float(z) if z.ndim == 0 else z

    def nearest(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Planar distance and index of the nearest cloud point for each query."""
        return self.index.query(np.asarray(xy, dtype=float).reshape(-1, 2))


def fit_surface(points: np.ndarray) -> RBFInterpolator:
    if len(points) < MIN_SURFACE_POINTS:
        raise DegenerateSurface(f"only {len(points)} free-space points")
    centres = _decimate(points, SURFACE_DECIMATION)
    if len(centres) > SURFACE_MAX_CENTRES:
        pick = np.linspace(0, len(centres) - 1, SURFACE_MAX_CENTRES).round().astype(int)
        centres = centres[pick]
    if len(centres) < MIN_SURFACE_POINTS:
        raise DegenerateSurface(f"only {len(centres)} surface centres after decimation")
    try:
        return RBFInterpolator(centres[:, :2], centres[:, 2], kernel="thin_plate_spline",
                               smoothing=SURFACE_SMOOTHING)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DegenerateSurface(str(exc)) from exc


def preprocess_cloud(
    cloud: LabelledPointCloud,
    passable_grid: OccupancyGrid,
    unpassable_grid: OccupancyGrid,
    inflate_radius: float | None = None,
    voxel: float = 0.1,
    outlier_k: int = 8,
    outlier_stddev: float = 1.0,
    geom: RobotGeometry = RobotGeometry(),
) -> TerrainModel:
    if len(cloud) == 0:
        raise EmptyCloud("terrain cloud has no points")
    passable_grid.require_same_geometry(unpassable_grid)
    radius = geom.half_width if inflate_radius is None else inflate_radius
    cloud = relabel_cloud(cloud, inflate_grid(passable_grid, radius), inflate_grid(unpassable_grid, radius))
    cloud = voxel_downsample(remove_outliers(cloud, outlier_k, outlier_stddev), voxel)
    if len(cloud) == 0:
        raise EmptyCloud("nothing left after outlier removal")
    free = cloud.points[cloud.labels == Label.FREE_SPACE]
    surface = fit_surface(free)
    log.debug("terrain model: %d points, %d free", len(cloud), len(free))
    return TerrainModel(cloud, cKDTree(cloud.points[:, :2]), surface, voxel)


# -- projection and attitude ---------------------------------------------------

def estimate_attitude(waypoint: Pose3D | Pose2D, model: TerrainModel,
                      geom: RobotGeometry = RobotGeometry()) -> tuple[float, float]:
    """``(roll, pitch)`` from surface heights under the wheels and fore/aft of the centre."""
    yaw = waypoint.yaw if isinstance(waypoint, Pose3D) else waypoint.theta
    roll, pitch = _attitudes(np.array([[waypoint.x, waypoint.y]]), np.array([yaw]), model, geom)
    return float(roll[0]), float(pitch[0])


def _attitudes(xy: np.ndarray, yaw: np.ndarray, model: TerrainModel, geom: RobotGeometry):
    c, s = np.cos(yaw), np.sin(yaw)
    half_t = geom.track_width / 2.0
    half_l = geom.wheel_base_contact / 2.0
    x, y = xy[:, 0], xy[:, 1]
    probes = np.concatenate([
        np.column_stack([x - s * half_t, y + c * half_t]),   # left wheel
        np.column_stack([x + s * half_t, y - c * half_t]),   # right wheel
        np.column_stack([x + c * half_l, y + s * half_l]),   # fore
        np.column_stack([x - c * half_l, y - s * half_l]),   # aft
    ])
    h = model.surface(probes).reshape(4, -1)
    roll = np.arctan2(h[0] - h[1], geom.track_width)
    pitch = np.arctan2(h[2] - h[3], geom.wheel_base_contact)
    return roll, pitch


def project_path(path: Path2D, model: TerrainModel, geom: RobotGeometry = RobotGeometry()) -> Path3D:
    """Drop each waypoint onto the nearest cloud point in the plane and estimate its attitude."""
    dist, idx = model.nearest(path.xy)
    far = np.nonzero(dist > 3.0 * model.voxel)[0]
    if len(far):
        i = int(far[0])
        raise NoNeighbour(f"waypoint {i} at {tuple(path.xy[i])} is {dist[i]:.3f} m from the cloud")
    z = model.cloud.points[idx, 2]
    roll, pitch = _attitudes(path.xy, path.theta, model, geom)
    return Path3D(np.column_stack([path.xy, z]), path.theta, roll, pitch, dict(path.meta))


def check_feasibility(path: Path3D, limits: StabilityLimits = StabilityLimits()) -> list[int]:
    bad = (np.abs(path.roll) > limits.gamma_max) | (np.abs(path.pitch) > limits.phi_max)
    return np.nonzero(bad)[0].tolist()


def block_unstable(grid: OccupancyGrid, unstable, keep=()) -> OccupancyGrid:
    """Occupy the cell of every unstable ``(x, y)`` waypoint and its eight neighbours.

    Neighbourhoods are clamped at the grid edge.  Cells listed in ``keep``
    (``(col, row)`` pairs) are never touched.
    """
    cells = grid.cells.copy()
    for p in unstable:
        col, row = world_to_cell(grid, (p[0], p[1]))
        cells[max(row - 1, 0):row + 2, max(col - 1, 0):col + 2] = OCCUPIED
    for col, row in keep:
        cells[row, col] = grid.cells[row, col]
    return grid.with_cells(cells)


def plan_3d(
    base: str,
    passable_grid: OccupancyGrid,
    unpassable_grid: OccupancyGrid,
    model: TerrainModel,
    start: Pose2D,
    goal: Pose2D,
    geom: RobotGeometry = RobotGeometry(),
    params: PoaParams | None = None,
    limits: StabilityLimits = StabilityLimits(),
    max_rounds: int = 25,
    rrt: RrtParams = RrtParams(),
) -> Path3D:
    """Replan in 2D until the lifted path has no unstable waypoint.

    Raises :class:`NoFeasiblePath` when the rounds run out or an endpoint is
    itself unstable; planner failures propagate as :class:`NoPath`.
    """
    keep = {world_to_cell(unpassable_grid, start.xy), world_to_cell(unpassable_grid, goal.xy)}
    grid = unpassable_grid
    blocked_total = 0
    for rnd in range(1, max_rounds + 1):
        path2d = poa_plan(base, passable_grid, grid, start, goal, geom, params, rrt)
        path3d = project_path(path2d, model, geom)
        bad = check_feasibility(path3d, limits)
        if not bad:
            return Path3D(path3d.xyz, path3d.yaw, path3d.roll, path3d.pitch,
                          {**path3d.meta, "rounds": rnd, "blocked_cells": blocked_total})
        if bad[0] == 0 or bad[-1] == len(path3d) - 1:
            raise NoFeasiblePath("an endpoint of the mission leg is itself unstable")
        before = int(grid.occupied.sum())
        grid = block_unstable(grid, path3d.xyz[bad, :2], keep)
        added = int(grid.occupied.sum()) - before
        blocked_total += added
        log.debug("3d round %d: %d unstable waypoints, %d cells blocked", rnd, len(bad), added)
        if added == 0:
            raise NoFeasiblePath("unstable waypoints lie only in protected endpoint cells")
    raise NoFeasiblePath(f"no stable path within {max_rounds} rounds")
