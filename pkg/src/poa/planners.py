"""Baseline global planners on an occupancy grid: A*, RRT* and GVD.

Occupied cells are obstacles; free and unknown cells are traversable.  The
robot is treated as a point by all three planners.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidEndpoint, NoPath, OutOfBounds
from .geometry import OccupancyGrid, Pose2D, RobotGeometry, cell_center, world_to_cell
from .paths import Path2D, densify_points

SQRT2 = math.sqrt(2.0)
_MOVES = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


@dataclass(frozen=True)
class RrtParams:
    max_iterations: int = 1500
    step_size: float = 1.0
    goal_bias: float = 0.05
    rewire_radius: float = 1.6
    rng_seed: int = 0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def _endpoint_cell(grid: OccupancyGrid, pose: Pose2D, blocked: np.ndarray, what: str) -> tuple[int, int]:
    try:
        col, row = world_to_cell(grid, pose.xy)
    except OutOfBounds as exc:
        raise InvalidEndpoint(f"{what} {pose.xy} is outside the grid") from exc
    if blocked[row, col]:
        raise InvalidEndpoint(f"{what} {pose.xy} lies in an occupied cell")
    return col, row


def octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return (dx + dy) + (SQRT2 - 2.0) * min(dx, dy)


def astar_cells(
    blocked: np.ndarray, start: tuple[int, int], goal: tuple[int, int], corner_cut: bool = False
) -> list[tuple[int, int]] | None:
    """8-connected A* over ``(col, row)`` cells with unit straight cost.

    Unless ``corner_cut`` is set, diagonal moves need both adjacent orthogonal
    cells open, so a path never squeezes through a corner contact.
    """
    h, w = blocked.shape
    g = {start: 0.0}
    parent = {start: None}
    tie = itertools.count()
    frontier = [(octile(start, goal), next(tie), start)]
    closed = set()
    while frontier:
        _, _, cur = heapq.heappop(frontier)
        if cur in closed:
            continue
        if cur == goal:
            out = []
            while cur is not None:
                out.append(cur)
                cur = parent[cur]
            return out[::-1]
        closed.add(cur)
        c, r = cur
        gc = g[cur]
        for dc, dr in _MOVES:
            nc, nr = c + dc, r + dr
            if not (0 <= nc < w and 0 <= nr < h) or blocked[nr, nc]:
                continue
            if dc and dr and not corner_cut and (blocked[r, nc] or blocked[nr, c]):
                continue
            nxt = (nc, nr)
            if nxt in closed:
                continue
            cand = gc + (SQRT2 if dc and dr else 1.0)
            if cand < g.get(nxt, math.inf):
                g[nxt] = cand
                parent[nxt] = cur
                heapq.heappush(frontier, (cand + octile(nxt, goal), next(tie), nxt))
    return None


def _cells_to_path(grid: OccupancyGrid, cells, meta: dict) -> Path2D:
    xy = np.array([cell_center(grid, c) for c in cells])
    return Path2D.from_points(densify_points(xy, grid.resolution), meta)


def plan_astar(grid: OccupancyGrid, start: Pose2D, goal: Pose2D) -> Path2D:
    blocked = grid.occupied
    s = _endpoint_cell(grid, start, blocked, "start")
    t = _endpoint_cell(grid, goal, blocked, "goal")
    cells = astar_cells(blocked, s, t)
    if cells is None:
        raise NoPath("A*: goal unreachable")
    return _cells_to_path(grid, cells, {"planner": "astar"})


# -- collision helpers --------------------------------------------------------

class SegmentChecker:
    """Point-robot segment test against occupied cells at a fixed sampling step."""

    def __init__(self, grid: OccupancyGrid, step: float | None = None):
        self.res = grid.resolution
        self.ox, self.oy = grid.origin_x, grid.origin_y
        self.w, self.h = grid.width, grid.height
        self.blocked = grid.occupied.ravel().tolist()
        self.step = step if step is not None else grid.resolution / 2.0

    def point_free(self, x: float, y: float) -> bool:
        c = math.floor((x - self.ox) / self.res)
        r = math.floor((y - self.oy) / self.res)
        return 0 <= c < self.w and 0 <= r < self.h and not self.blocked[r * self.w + c]

    def segment_free(self, x0: float, y0: float, x1: float, y1: float) -> bool:
        dx, dy = x1 - x0, y1 - y0
        n = max(1, math.ceil(math.hypot(dx, dy) / self.step))
        res, ox, oy, w, h, blocked = self.res, self.ox, self.oy, self.w, self.h, self.blocked
        for k in range(n + 1):
            t = k / n
            c = math.floor((x0 + t * dx - ox) / res)
            r = math.floor((y0 + t * dy - oy) / res)
            if not (0 <= c < w and 0 <= r < h) or blocked[r * w + c]:
                return False
        return True

    def polyline_free(self, xy: np.ndarray) -> bool:
        pts = xy.tolist()
        return all(self.segment_free(*p, *q) for p, q in zip(pts[:-1], pts[1:])) if len(pts) > 1 else (
            len(pts) == 0 or self.point_free(*pts[0])
        )


# -- RRT* ------------------------------------------------------------------------

def plan_rrt_star(grid: OccupancyGrid, start: Pose2D, goal: Pose2D, params: RrtParams = RrtParams()) -> Path2D:
    """RRT* with fixed-radius parent selection and rewiring.

    The goal node, once connected, takes part in rewiring like any other
    node, so its cost never increases as iterations proceed.
    """
    blocked = grid.occupied
    _endpoint_cell(grid, start, blocked, "start")
    _endpoint_cell(grid, goal, blocked, "goal")
    checker = SegmentChecker(grid)
    rng = np.random.default_rng(params.rng_seed)
    x0, y0, x1, y1 = grid.extent

    cap = params.max_iterations + 2
    X = np.empty(cap)
    Y = np.empty(cap)
    cost = np.empty(cap)
    parent = [-1] * cap
    children: list[list[int]] = [[] for _ in range(cap)]
    X[0], Y[0], cost[0] = start.x, start.y, 0.0
    n = 1
    goal_idx = -1
    gx, gy = goal.x, goal.y
    step, r2 = params.step_size, params.rewire_radius ** 2
    history = []

    def reparent(k: int, new_parent: int, new_cost: float) -> None:
        old = parent[k]
        if old >= 0:
            children[old].remove(k)
        parent[k] = new_parent
        children[new_parent].append(k)
        delta = new_cost - cost[k]
        stack = [k]
        while stack:
            j = stack.pop()
            cost[j] += delta
            stack.extend(children[j])

    draws = rng.random((params.max_iterations, 3))
    for it in range(params.max_iterations):
        u, a, b = draws[it]
        if u < params.goal_bias:
            qx, qy = gx, gy
        else:
            qx, qy = x0 + a * (x1 - x0), y0 + b * (y1 - y0)
        dx = X[:n] - qx
        dy = Y[:n] - qy
        d2 = dx * dx + dy * dy
        near = int(np.argmin(d2))
        nx, ny = X[near], Y[near]
        dist = math.sqrt(d2[near])
        if dist == 0.0:
            continue
        if dist > step:
            qx, qy = nx + (qx - nx) * step / dist, ny + (qy - ny) * step / dist
        if not checker.segment_free(nx, ny, qx, qy):
            continue
        dx = X[:n] - qx
        dy = Y[:n] - qy
        d2 = dx * dx + dy * dy
        nbrs = np.nonzero(d2 <= r2)[0]
        dists = np.sqrt(d2[nbrs])
        through = cost[nbrs] + dists
        best_parent, best_cost = near, cost[near] + math.hypot(qx - nx, qy - ny)
        for j in np.argsort(through, kind="stable"):
            k = int(nbrs[j])
            if through[j] >= best_cost:
                break
            if checker.segment_free(X[k], Y[k], qx, qy):
                best_parent, best_cost = k, float(through[j])
                break
        new = n
        X[new], Y[new], cost[new] = qx, qy, best_cost
        parent[new] = best_parent
        children[best_parent].append(new)
        n += 1
        for j in range(len(nbrs)):
            k = int(nbrs[j])
            if k == best_parent:
                continue
            cand = best_cost + float(dists[j])
            if cand < cost[k] - 1e-12 and checker.segment_free(qx, qy, X[k], Y[k]):
                reparent(k, new, cand)
        dg = math.hypot(gx - qx, gy - qy)
        if dg <= step and (goal_idx < 0 or cost[new] + dg < cost[goal_idx] - 1e-12):
            if checker.segment_free(qx, qy, gx, gy):
                if goal_idx < 0:
                    goal_idx = n
                    X[n], Y[n], cost[n] = gx, gy, cost[new] + dg
                    parent[n] = new
                    children[new].append(n)
                    n += 1
                else:
                    reparent(goal_idx, new, cost[new] + dg)
        if goal_idx >= 0:
            history.append(float(cost[goal_idx]))
    if goal_idx < 0:
        raise NoPath(f"RRT*: no connection within {params.max_iterations} iterations")
    chain = []
    k = goal_idx
    while k >= 0:
        chain.append((X[k], Y[k]))
        k = parent[k]
    xy = np.array(chain[::-1])
    return Path2D.from_points(
        densify_points(xy, grid.resolution),
        {"planner": "rrt_star", "seed": params.rng_seed, "cost_history": history},
    )


# -- GVD -------------------------------------------------------------------------

@dataclass(frozen=True)
class VoronoiField:
    """Brushfire products over a grid padded by a one-cell obstacle border."""

    distance: np.ndarray  # metres from cell centre to nearest obstacle cell centre
    clearance: np.ndarray  # metres from cell centre to nearest obstacle cell edge
    site: np.ndarray  # flat index of the nearest obstacle cell (border ring lies outside 0..w*h)
    gvd: np.ndarray  # bool, Voronoi cells passing the clearance filter
    raw_gvd: np.ndarray  # bool, Voronoi cells before the clearance filter


def voronoi_field(grid: OccupancyGrid, min_clearance: float) -> VoronoiField:
    """Brushfire distance field and Voronoi cells of ``grid``.

    Every obstacle cell (and every cell of a virtual border ring) is a site.
    A free cell is on the diagram when a 4-neighbour's nearest site is not
    adjacent to its own nearest site and is no more than one cell farther
    away than its own, i.e. the cell is equidistant to two distinct sites.
    """
    occ = np.pad(grid.occupied, 1, constant_values=True)
    dist, (ir, ic) = ndimage.distance_transform_edt(~occ, return_indices=True)
    free = ~occ
    res = grid.resolution
    raw = np.zeros_like(free)
    h, w = occ.shape
    rows, cols = np.mgrid[0:h, 0:w]
    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        src_r = slice(max(dr, 0), h + min(dr, 0))
        dst_r = slice(max(-dr, 0), h + min(-dr, 0))
        src_c = slice(max(dc, 0), w + min(dc, 0))
        dst_c = slice(max(-dc, 0), w + min(-dc, 0))
        # neighbour at (r + dr, c + dc) seen from cell (r, c)
        nb_ir = ir.copy()
        nb_ic = ic.copy()
        nb_free = np.zeros_like(free)
        nb_ir[dst_r, dst_c] = ir[src_r, src_c]
        nb_ic[dst_r, dst_c] = ic[src_r, src_c]
        nb_free[dst_r, dst_c] = free[src_r, src_c]
        distinct = np.maximum(np.abs(nb_ir - ir), np.abs(nb_ic - ic)) > 1
        other = np.hypot(rows - nb_ir, cols - nb_ic)
        raw |= free & nb_free & distinct & (other <= dist + 1.0)
    site = (ir - 1) * grid.width + (ic - 1)
    dist = dist[1:-1, 1:-1] * res
    clearance = dist - res / 2.0
    raw = raw[1:-1, 1:-1]
    return VoronoiField(dist, clearance, site[1:-1, 1:-1], raw & (clearance >= min_clearance), raw)


def _connectors(grid, checker, pose, gvd_cells, comp_of):
    """GVD cells reachable from ``pose`` by a straight free segment, nearest first."""
    centres = np.array([cell_center(grid, (c, r)) for r, c in gvd_cells])
    d = np.hypot(centres[:, 0] - pose.x, centres[:, 1] - pose.y)
    for k in np.argsort(d, kind="stable"):
        r, c = gvd_cells[k]
        if checker.segment_free(pose.x, pose.y, *centres[k]):
            yield (c, r), comp_of[r, c]


def plan_gvd(
    grid: OccupancyGrid,
    start: Pose2D,
    goal: Pose2D,
    geom: RobotGeometry = RobotGeometry(),
    min_clearance: float | None = None,
) -> Path2D:
    """Shortest route along the clearance-filtered generalized Voronoi diagram.

    Start and goal join the diagram through the nearest diagram cells they can
    see in a straight line; those must belong to one connected component.
    """
    blocked = grid.occupied
    _endpoint_cell(grid, start, blocked, "start")
    _endpoint_cell(grid, goal, blocked, "goal")
    clearance = geom.half_width if min_clearance is None else min_clearance
    vf = voronoi_field(grid, clearance)
    if not vf.gvd.any():
        raise NoPath("GVD: clearance filter leaves an empty diagram")
    comp_of, _ = ndimage.label(vf.gvd, structure=np.ones((3, 3), dtype=int))
    gvd_cells = [tuple(rc) for rc in np.argwhere(vf.gvd)]
    checker = SegmentChecker(grid)

    goal_links: dict[int, tuple[int, int]] = {}
    for cell, comp in _connectors(grid, checker, goal, gvd_cells, comp_of):
        goal_links.setdefault(comp, cell)
    if not goal_links:
        raise NoPath("GVD: goal cannot see the diagram")
    s_cell = t_cell = None
    for cell, comp in _connectors(grid, checker, start, gvd_cells, comp_of):
        if comp in goal_links:
            s_cell, t_cell = cell, goal_links[comp]
            break
    if s_cell is None:
        raise NoPath("GVD: start and goal attach to disconnected diagram components")
    route = astar_cells(~vf.gvd, s_cell, t_cell, corner_cut=True)
    if route is None:  # pragma: no cover - same component guarantees a route
        raise NoPath("GVD: diagram search failed")
    xy = np.array([start.xy] + [cell_center(grid, c) for c in route] + [goal.xy])
    return Path2D.from_points(
        densify_points(xy, grid.resolution),
        {"planner": "gvd", "gvd_cells": len(route), "attach": [list(s_cell), list(t_cell)]},
    )


def merged_grid(passable: OccupancyGrid, unpassable: OccupancyGrid) -> OccupancyGrid:
    """Union of both obstacle classes, as a passability-unaware planner sees the map."""
    passable.require_same_geometry(unpassable)
    cells = unpassable.cells.copy()
    cells[passable.cells == 1] = 1
    return unpassable.with_cells(cells)


def plan_base(planner: str, grid: OccupancyGrid, start: Pose2D, goal: Pose2D, geom: RobotGeometry = RobotGeometry(),
              rrt: RrtParams = RrtParams()) -> Path2D:
    if planner == "astar":
        return plan_astar(grid, start, goal)
    if planner == "rrt_star":
        return plan_rrt_star(grid, start, goal, rrt)
    if planner == "gvd":
        return plan_gvd(grid, start, goal, geom)
    raise ValueError(f"unknown planner {planner!r}")
