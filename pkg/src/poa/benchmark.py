"""Planner comparison over seeded scenario ensembles.

Plain planners see the merged passable-plus-unpassable grid; ``<planner>+poa``
variants plan on the unpassable grid and repair around passable stones.
RRT*-based variants run ``spec.rrt_runs`` times per leg and keep the
shortest result.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NoPath
from .geometry import RobotGeometry
from .paths import Path2D
from .planners import merged_grid, plan_base
from .poa2d import poa_plan
from .scenario import ScenarioSpec, World, generate_world
from .simulation import path_length, simulate_traversal

log = logging.getLogger(__name__)

PLANNERS = ("gvd", "astar", "rrt_star", "gvd+poa", "astar+poa", "rrt_star+poa")
CSV_HEADER = ["setup", "planner", "seed", "leg", "distance_m", "time_s", "status"]


@dataclass(frozen=True)
class LegResult:
    leg: str
    distance: float
    time: float
    ok: bool
    residual: int = 0
    path: Path2D | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class MissionResult:
    setup: str
    planner: str
    seed: int
    legs: tuple[LegResult, ...]

    @property
    def success(self) -> bool:
        return all(leg.ok for leg in self.legs)

    @property
    def distance(self) -> float:
        return sum(leg.distance for leg in self.legs) if self.success else math.nan

    @property
    def time(self) -> float:
        return sum(leg.time for leg in self.legs) if self.success else math.nan

    @property
    def residual_collisions(self) -> int:
        return sum(leg.residual for leg in self.legs)


def _split(planner: str) -> tuple[str, bool]:
    base, _, suffix = planner.partition("+")
    if base not in ("gvd", "astar", "rrt_star") or suffix not in ("", "poa"):
        raise ValueError(f"unknown planner {planner!r}")
    return base, suffix == "poa"


def plan_leg(world: World, planner: str, start, goal, leg_index: int = 0,
             geom: RobotGeometry = RobotGeometry()) -> Path2D:
    """Plan one mission leg; raises :class:`NoPath` on failure."""
    spec = world.spec
    base, poa = _split(planner)
    runs = spec.rrt_runs if base == "rrt_star" else 1
    best: Path2D | None = None
    failure: NoPath | None = None
    for run in range(runs):
        rrt = replace(spec.rrt, rng_seed=int(np.random.SeedSequence(
            [spec.rng_seed, leg_index, run, spec.rrt.rng_seed]).generate_state(1)[0]))
        try:
            if poa:
                path = poa_plan(base, world.passable, world.unpassable, start, goal, geom,
                                spec.poa_params(base), rrt)
            else:
                path = plan_base(base, merged_grid(world.passable, world.unpassable), start, goal, geom, rrt)
        except NoPath as exc:
            failure = exc
            continue
        if best is None or path.length() < best.length():
            best = path
    if best is None:
        raise failure or NoPath(planner)
    return best


def run_mission(world: World, planner: str, geom: RobotGeometry = RobotGeometry()) -> MissionResult:
    spec = world.spec
    legs = []
    for k, (name, start, goal) in enumerate(spec.legs()):
        try:
            path = plan_leg(world, planner, start, goal, k, geom)
        except NoPath as exc:
            log.info("%s %s seed=%d leg %s failed: %s", spec.name, planner, spec.rng_seed, name, exc)
            legs.append(LegResult(name, math.nan, math.nan, False))
            if spec.mission_mode == "chain":
                break
            continue
        legs.append(LegResult(
            name,
            path_length(path),
            simulate_traversal(path, world.passable, geom, spec.speed),
            True,
            len(path.meta.get("residual_collisions", [])),
            path,
        ))
    return MissionResult(spec.name, planner, spec.rng_seed, tuple(legs))


def _job(args) -> list[MissionResult]:
    spec, planners = args
    world = generate_world(spec)
    out = []
    for planner in planners:
        res = run_mission(world, planner)
        out.append(replace(res, legs=tuple(replace(l, path=None) for l in res.legs)))
    return out


@dataclass
class BenchmarkTable:
    results: list[MissionResult]

    def rows(self) -> list[list[str]]:
        rows = []
        for r in self.results:
            for leg in r.legs:
                rows.append([
                    r.setup, r.planner, str(r.seed), leg.leg,
                    "" if not leg.ok else f"{leg.distance:.4f}",
                    "" if not leg.ok else f"{leg.time:.3f}",
                    "ok" if leg.ok else "FAILURE",
                ])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(self.rows())
        return buf.getvalue()

    def summary(self) -> list[dict]:
        """One entry per (setup, planner): distances and times over successful missions."""
        groups: dict[tuple[str, str], list[MissionResult]] = {}
        for r in self.results:
            groups.setdefault((r.setup, r.planner), []).append(r)
        out = []
        for (setup, planner), rs in groups.items():
            ok = [r for r in rs if r.success]
            dist = [r.distance for r in ok]
            out.append({
                "setup": setup,
                "planner": planner,
                "runs": len(rs),
                "mean_distance": float(np.mean(dist)) if ok else math.nan,
                "min_distance": float(np.min(dist)) if ok else math.nan,
                "mean_time": float(np.mean([r.time for r in ok])) if ok else math.nan,
                "failure_rate": 1.0 - len(ok) / len(rs),
            })
        return out

    def render(self) -> str:
        """Aligned text table, one row per (setup, planner)."""
        head = ["setup", "planner", "runs", "mean dist (m)", "min dist (m)", "mean time (s)", "failure"]
        body = []
        for s in self.summary():
            if s["failure_rate"] == 1.0:
                dist = mind = time = "FAILURE"
            else:
                dist, mind, time = f"{s['mean_distance']:.2f}", f"{s['min_distance']:.2f}", f"{s['mean_time']:.0f}"
            body.append([s["setup"], s["planner"], str(s["runs"]), dist, mind, time, f"{s['failure_rate']:.0%}"])
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
        line = lambda r: " | ".join(c.ljust(w) for c, w in zip(r, widths))
        sep = "-+-".join("-" * w for w in widths)
        return "\n".join([line(head), sep] + [line(r) for r in body]) + "\n"


def run_benchmark(
    specs: list[ScenarioSpec],
    planners: list[str] | tuple[str, ...] = PLANNERS,
    repeats: int = 1,
    base_seed: int | None = None,
    workers: int = 1,
) -> BenchmarkTable:
    """Run every planner on ``repeats`` seeds of every spec.

    Seeds are ``base_seed + k`` (``spec.rng_seed + k`` when ``base_seed`` is
    None).  Results come back sorted by (setup order, seed, planner order)
    whatever the worker count.
    """
    for p in planners:
        _split(p)
    jobs = []
    for spec in specs:
        first = spec.rng_seed if base_seed is None else base_seed
        for k in range(repeats):
            jobs.append((spec.with_seed(first + k), tuple(planners)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_job, jobs))
    else:
        chunks = [_job(j) for j in jobs]
    return BenchmarkTable([r for chunk in chunks for r in chunk])
