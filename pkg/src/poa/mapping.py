"""Passable / unpassable occupancy grids from labelled point clouds.

Each incoming cloud is projected onto the horizontal plane.  Per cell, the
measurement probability is ``0.5 + p * n_stone - p * n_environment`` (clamped
away from 0 and 1), its log-odds are added to the cell's running total, and
the logistic of that total is the occupancy probability.  The passable grid
counts passable points as stone evidence, the unpassable grid counts
unpassable points; free-space points are environment evidence for both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryMismatch
from .geometry import (
    FREE,
    OCCUPIED,
    UNKNOWN,
    Label,
    LabelledPointCloud,
    OccupancyGrid,
    world_to_cells,
)


@dataclass(frozen=True)
class MeasurementCounts:
    n_stone: int
    n_environment: int

    def __post_init__(self):
        if self.n_stone < 0 or self.n_environment < 0:
            raise ValueError("measurement counts must be non-negative")


@dataclass(frozen=True)
class MappingParams:
    p: float = 0.01
    occupied_threshold: float = 0.65
    p_clamp_epsilon: float = 0.001

    def __post_init__(self):
        if not 0 < self.p < 0.5:
            raise ValueError("p must lie in (0, 0.5)")
        if not 0.5 < self.occupied_threshold < 1:
            raise ValueError("occupied_threshold must lie in (0.5, 1)")
        if not 0 < self.p_clamp_epsilon < 0.5:
            raise ValueError("p_clamp_epsilon must lie in (0, 0.5)")


def measurement_probability(counts: MeasurementCounts, params: MappingParams = MappingParams()) -> float:
    raw = 0.5 + params.p * counts.n_stone - params.p * counts.n_environment
    eps = params.p_clamp_epsilon
    return min(max(raw, eps), 1.0 - eps)


def _measurement_probabilities(n_stone: np.ndarray, n_env: np.ndarray, params: MappingParams) -> np.ndarray:
    raw = 0.5 + params.p * n_stone - params.p * n_env
    eps = params.p_clamp_epsilon
    return np.clip(raw, eps, 1.0 - eps)


def final_probability(log_odd):
    """Logistic of the accumulated log-odds; accepts scalars or arrays."""
    if np.ndim(log_odd) == 0:
        l = float(log_odd)
        if l >= 0:
            return 1.0 / (1.0 + math.exp(-l))
        e = math.exp(l)
        return e / (1.0 + e)
    l = np.asarray(log_odd, dtype=float)
    out = np.empty_like(l)
    pos = l >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-l[pos]))
    e = np.exp(l[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True, eq=False)
class LogOddsGrid:
    """Log-odds accumulator sharing an :class:`OccupancyGrid`'s geometry.

    Sums are kept with Neumaier compensation so that the result does not
    depend on the order in which measurements arrive.
    """

    resolution: float
    origin_x: float
    origin_y: float
    total: np.ndarray
    compensation: np.ndarray = field(default=None)
    observed: np.ndarray = field(default=None)

    def __post_init__(self):
        total = np.array(self.total, dtype=float)
        comp = np.zeros_like(total) if self.compensation is None else np.array(self.compensation, dtype=float)
        seen = np.zeros(total.shape, dtype=bool) if self.observed is None else np.array(self.observed, dtype=bool)
        for a in (total, comp, seen):
            a.setflags(write=False)
        object.__setattr__(self, "total", total)
        object.__setattr__(self, "compensation", comp)
        object.__setattr__(self, "observed", seen)

    @classmethod
    def like(cls, grid: OccupancyGrid) -> "LogOddsGrid":
        return cls(grid.resolution, grid.origin_x, grid.origin_y, np.zeros(grid.cells.shape))

    @property
    def values(self) -> np.ndarray:
        return self.total + self.compensation

    @property
    def width(self) -> int:
        return self.total.shape[1]

    @property
    def height(self) -> int:
        return self.total.shape[0]

    def geometry(self) -> OccupancyGrid:
        return OccupancyGrid(self.resolution, self.origin_x, self.origin_y, np.full(self.total.shape, UNKNOWN, np.int8))

    def value(self, cell: tuple[int, int]) -> float:
        col, row = cell
        return float(self.total[row, col] + self.compensation[row, col])

    def _added(self, rows, cols, increments) -> "LogOddsGrid":
        total = self.total.copy()
        comp = self.compensation.copy()
        seen = self.observed.copy()
        s = total[rows, cols]
        t = s + increments
        big = np.abs(s) >= np.abs(increments)
        comp[rows, cols] += np.where(big, (s - t) + increments, (increments - t) + s)
        total[rows, cols] = t
        seen[rows, cols] = True
        return LogOddsGrid(self.resolution, self.origin_x, self.origin_y, total, comp, seen)


def update_log_odds(grid: LogOddsGrid, cell: tuple[int, int], p_current: float) -> LogOddsGrid:
    if not 0.0 < p_current < 1.0:
        raise ValueError("p_current must lie strictly between 0 and 1")
    col, row = cell
    inc = math.log(p_current / (1.0 - p_current))
    return grid._added(np.array([row]), np.array([col]), np.array([inc]))


def _cell_counts(grid: LogOddsGrid, cloud: LabelledPointCloud) -> dict[int, np.ndarray]:
    geom = grid.geometry()
    cols, rows, inside = world_to_cells(geom, cloud.points[:, :2])
    if not inside.all():
        raise GeometryMismatch(f"{int((~inside).sum())} cloud points fall outside the grid extent")
    flat = rows * grid.width + cols
    n = grid.width * grid.height
    return {
        lab: np.bincount(flat[cloud.labels == lab], minlength=n).reshape(grid.total.shape)
        for lab in (Label.FREE_SPACE, Label.PASSABLE, Label.UNPASSABLE)
    }


def _fuse(grid: LogOddsGrid, n_stone: np.ndarray, n_env: np.ndarray, params: MappingParams) -> LogOddsGrid:
    touched = (n_stone + n_env) > 0
    if not touched.any():
        return grid
    rows, cols = np.nonzero(touched)
    p_cur = _measurement_probabilities(n_stone[rows, cols], n_env[rows, cols], params)
    return grid._added(rows, cols, np.log(p_cur / (1.0 - p_cur)))


@dataclass(frozen=True, eq=False)
class MappingState:
    passable: LogOddsGrid
    unpassable: LogOddsGrid
    accumulated: LabelledPointCloud
    params: MappingParams = MappingParams()

    @classmethod
    def empty(cls, template: OccupancyGrid, params: MappingParams = MappingParams()) -> "MappingState":
        return cls(LogOddsGrid.like(template), LogOddsGrid.like(template), LabelledPointCloud.empty(), params)


def ingest_cloud(state: MappingState, cloud: LabelledPointCloud) -> MappingState:
    if len(cloud) == 0:
        return state
    counts = _cell_counts(state.passable, cloud)
    free = counts[Label.FREE_SPACE]
    passable = _fuse(state.passable, counts[Label.PASSABLE], free, state.params)
    unpassable = _fuse(state.unpassable, counts[Label.UNPASSABLE], free, state.params)
    accumulated = LabelledPointCloud.concatenate([state.accumulated, cloud])
    return MappingState(passable, unpassable, accumulated, state.params)


def binarize(grid: LogOddsGrid, params: MappingParams = MappingParams()) -> OccupancyGrid:
    prob = final_probability(grid.values)
    cells = np.full(grid.total.shape, UNKNOWN, dtype=np.int8)
    cells[grid.observed] = FREE
    cells[grid.observed & (prob > params.occupied_threshold)] = OCCUPIED
    return OccupancyGrid(grid.resolution, grid.origin_x, grid.origin_y, cells)


def mask_passable(slam_grid: OccupancyGrid, passable_grid: OccupancyGrid) -> OccupancyGrid:
    """Clear SLAM-occupied cells that the passable grid explains as passable stones."""
    slam_grid.require_same_geometry(passable_grid)
    cells = slam_grid.cells.copy()
    cells[passable_grid.cells == OCCUPIED] = FREE
    return slam_grid.with_cells(cells)


def filter_cloud_by_mask(cloud: LabelledPointCloud, passable_grid: OccupancyGrid) -> LabelledPointCloud:
    """Drop passable-labelled points that do not project onto an occupied passable cell."""
    if len(cloud) == 0:
        return cloud
    cols, rows, inside = world_to_cells(passable_grid, cloud.points[:, :2])
    on_stone = np.zeros(len(cloud), dtype=bool)
    on_stone[inside] = passable_grid.cells[rows[inside], cols[inside]] == OCCUPIED
    keep = (cloud.labels != Label.PASSABLE) | on_stone
    return cloud.subset(keep)


def build_grids(
    cloud: LabelledPointCloud,
    template: OccupancyGrid,
    params: MappingParams = MappingParams(),
    frames: int = 1,
) -> tuple[OccupancyGrid, OccupancyGrid, MappingState]:
    """Ingest ``cloud`` split into ``frames`` messages and binarise both grids."""
    state = MappingState.empty(template, params)
    for idx in np.array_split(np.arange(len(cloud)), max(frames, 1)):
        state = ingest_cloud(state, cloud.subset(idx))
    return binarize(state.passable, params), binarize(state.unpassable, params), state
