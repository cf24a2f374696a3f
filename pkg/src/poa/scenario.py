"""Seeded benchmark worlds: stones on flat or bumpy terrain, rendered as labelled clouds.

Random streams are split by purpose so the unpassable layout depends only on
``(rng_seed, n_unpassable)`` and passable placements are nested: the first
``n`` stones of a denser world are exactly the stones of a sparser one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import PlacementFailure, SpecParseError
from .geometry import FREE, OCCUPIED, Label, LabelledPointCloud, OccupancyGrid, Pose2D
from .mapping import MappingParams
from .planners import RrtParams
from .poa2d import PoaParams
from .simulation import SpeedModel

_STREAM_UNPASSABLE = 1
_STREAM_PASSABLE = 2
_STREAM_TERRAIN = 3

PASSABLE_POINTS = 80
UNPASSABLE_DENSITY = 1200.0  # points per square metre of footprint
FOOTPRINT_SHRINK = 0.98


@dataclass(frozen=True)
class Bump:
    x: float
    y: float
    amplitude: float
    width: float


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "custom"
    extent: tuple[float, float] = (15.0, 15.0)
    grid_resolution: float = 0.5
    rng_seed: int = 1
    n_passable: int = 0
    n_unpassable: int = 0
    passable_width: tuple[float, float] = (0.12, 0.26)
    passable_height: tuple[float, float] = (0.08, 0.28)
    unpassable_cells: tuple[int, int] = (2, 3)
    unpassable_height: tuple[float, float] = (0.35, 0.8)
    terrain: str = "flat"
    terrain_bumps: int = 6
    terrain_amplitude: tuple[float, float] = (-1.0, 1.0)
    terrain_width: tuple[float, float] = (3.0, 5.0)
    terrain_spacing: float = 0.1
    extra_bumps: tuple[Bump, ...] = ()
    keepout: float = 1.0
    start: Pose2D = Pose2D(0.75, 0.75, 0.0)
    missions: tuple[tuple[str, float, float], ...] = (("A", 0.75, 14.25), ("B", 14.25, 14.25))
    mission_mode: str = "chain"
    rrt: RrtParams = RrtParams()
    rrt_runs: int = 10
    poa: PoaParams = PoaParams()
    poa_astar: PoaParams = PoaParams(n_skip=5, n_clear=20)
    mapping: MappingParams = MappingParams()
    speed: SpeedModel = SpeedModel()

    def __post_init__(self):
        if self.grid_resolution <= 0 or min(self.extent) <= 0:
            raise ValueError("extent and grid_resolution must be positive")
        if self.n_passable < 0 or self.n_unpassable < 0:
            raise ValueError("stone counts must be non-negative")
        if self.passable_width[1] > 0.26 or self.passable_height[1] > 0.28:
            raise ValueError("passable stones must fit the 0.26 m x 0.28 m clearance box")
        if self.unpassable_cells[0] * self.grid_resolution <= 0.26:
            raise ValueError("unpassable stones must be wider than the clearance box")
        if self.terrain not in ("flat", "heightfield"):
            raise ValueError("terrain must be 'flat' or 'heightfield'")
        if self.mission_mode not in ("chain", "star"):
            raise ValueError("mission_mode must be 'chain' or 'star'")

    @property
    def grid_shape(self) -> tuple[int, int]:
        """``(width, height)`` in cells."""
        return (
            int(round(self.extent[0] / self.grid_resolution)),
            int(round(self.extent[1] / self.grid_resolution)),
        )

    def poa_params(self, planner: str) -> PoaParams:
        return self.poa_astar if planner == "astar" else self.poa

    def legs(self) -> list[tuple[str, Pose2D, Pose2D]]:
        """``(leg name, start, goal)`` per mission leg."""
        out = []
        prev_name, prev = "start", self.start
        for name, x, y in self.missions:
            goal = Pose2D(x, y, 0.0)
            out.append((f"{prev_name}-{name}", prev, goal))
            if self.mission_mode == "chain":
                prev_name, prev = name, goal
        return out

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return replace(self, rng_seed=int(seed))


# -- stones and terrain -------------------------------------------------------

@dataclass(frozen=True)
class Stone:
    instance_id: int
    label: Label
    cx: float
    cy: float
    semi_a: float
    semi_b: float
    angle: float
    height: float
    cells: tuple[tuple[int, int], ...]

    @property
    def width(self) -> float:
        return 2.0 * min(self.semi_a, self.semi_b)

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        dx, dy = x - self.cx, y - self.cy
        u = (c * dx + s * dy) / self.semi_a
        v = (-s * dx + c * dy) / self.semi_b
        return u * u + v * v <= 1.0


@dataclass(frozen=True)
class Terrain:
    bumps: tuple[Bump, ...] = ()
    clip: tuple[float, float] = (-1.0, 1.0)

    def height(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.zeros(np.broadcast(x, y).shape)
        for b in self.bumps:
            z = z + b.amplitude * np.exp(-((x - b.x) ** 2 + (y - b.y) ** 2) / (2.0 * b.width ** 2))
        return np.clip(z, *self.clip)


@dataclass(frozen=True, eq=False)
class World:
    spec: ScenarioSpec
    cloud: LabelledPointCloud
    passable: OccupancyGrid
    unpassable: OccupancyGrid
    stones: tuple[Stone, ...]
    terrain: Terrain

    def __iter__(self):
        return iter((self.cloud, self.passable, self.unpassable))


def _sunflower(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n`` near-uniform points in the unit disk as (radius, angle)."""
    k = np.arange(n) + 0.5
    return np.sqrt(k / n), k * math.pi * (3.0 - math.sqrt(5.0))


def _near_endpoint(spec: ScenarioSpec, x0: float, y0: float, x1: float, y1: float) -> bool:
    pts = [spec.start.xy] + [(x, y) for _, x, y in spec.missions]
    for px, py in pts:
        dx = max(x0 - px, 0.0, px - x1)
        dy = max(y0 - py, 0.0, py - y1)
        if math.hypot(dx, dy) < spec.keepout:
            return True
    return False


def _place_unpassable(spec: ScenarioSpec) -> list[Stone]:
    rng = np.random.default_rng([spec.rng_seed, _STREAM_UNPASSABLE])
    w, h = spec.grid_shape
    res = spec.grid_resolution
    taken = np.zeros((h, w), dtype=bool)
    stones = []
    lo, hi = spec.unpassable_cells
    for k in range(spec.n_unpassable):
        for _ in range(2000):
            cw, ch = (int(v) for v in rng.integers(lo, hi + 1, size=2))
            c0 = int(rng.integers(0, w - cw + 1))
            r0 = int(rng.integers(0, h - ch + 1))
            height = float(rng.uniform(*spec.unpassable_height))
            if taken[r0 : r0 + ch, c0 : c0 + cw].any():
                continue
            x0, y0 = c0 * res, r0 * res
            if _near_endpoint(spec, x0, y0, x0 + cw * res, y0 + ch * res):
                continue
            break
        else:
            raise PlacementFailure(f"could not place unpassable stone {k}")
        taken[r0 : r0 + ch, c0 : c0 + cw] = True
        cells = tuple((c, r) for r in range(r0, r0 + ch) for c in range(c0, c0 + cw))
        stones.append(
            Stone(k, Label.UNPASSABLE, (c0 + cw / 2.0) * res, (r0 + ch / 2.0) * res,
                  cw * res / 2.0, ch * res / 2.0, 0.0, height, cells)
        )
    return stones


def _place_passable(spec: ScenarioSpec, blocked: np.ndarray, first_id: int) -> list[Stone]:
    rng = np.random.default_rng([spec.rng_seed, _STREAM_PASSABLE])
    w, h = spec.grid_shape
    res = spec.grid_resolution
    taken = blocked.copy()
    stones = []
    for k in range(spec.n_passable):
        for _ in range(5000):
            c, r = int(rng.integers(0, w)), int(rng.integers(0, h))
            sa = float(rng.uniform(*spec.passable_width)) / 2.0
            sb = float(rng.uniform(*spec.passable_width)) / 2.0
            angle = float(rng.uniform(-math.pi, math.pi))
            height = float(rng.uniform(*spec.passable_height))
            jx, jy = rng.uniform(-1.0, 1.0, size=2)
            if taken[r, c]:
                continue
            if _near_endpoint(spec, c * res, r * res, (c + 1) * res, (r + 1) * res):
                continue
            break
        else:
            raise PlacementFailure(f"could not place passable stone {k}")
        taken[r, c] = True
        sa, sb = max(sa, sb), min(sa, sb)
        slack = max(res / 2.0 - sa - 0.01, 0.0)
        cx, cy = (c + 0.5) * res + jx * slack, (r + 0.5) * res + jy * slack
        stones.append(Stone(first_id + k, Label.PASSABLE, cx, cy, sa, sb, angle, height, ((c, r),)))
    return stones


def _terrain(spec: ScenarioSpec) -> Terrain:
    bumps = list(spec.extra_bumps)
    if spec.terrain == "heightfield":
        rng = np.random.default_rng([spec.rng_seed, _STREAM_TERRAIN])
        ex, ey = spec.extent
        for _ in range(spec.terrain_bumps):
            x, y = rng.uniform(0, ex), rng.uniform(0, ey)
            amp = rng.uniform(*spec.terrain_amplitude)
            width = rng.uniform(*spec.terrain_width)
            bumps.append(Bump(float(x), float(y), float(amp), float(width)))
    return Terrain(tuple(bumps), clip=(min(spec.terrain_amplitude), max(spec.terrain_amplitude)))


def _render_stone(stone: Stone, terrain: Terrain) -> np.ndarray:
    if stone.label == Label.PASSABLE:
        n = PASSABLE_POINTS
    else:
        n = max(50, int(math.ceil(math.pi * stone.semi_a * stone.semi_b * UNPASSABLE_DENSITY)))
    rad, ang = _sunflower(n)
    rad = rad * FOOTPRINT_SHRINK
    u, v = rad * np.cos(ang), rad * np.sin(ang)
    c, s = math.cos(stone.angle), math.sin(stone.angle)
    x = stone.cx + c * u * stone.semi_a - s * v * stone.semi_b
    y = stone.cy + s * u * stone.semi_a + c * v * stone.semi_b
    base = float(terrain.height(stone.cx, stone.cy))
    z = base + stone.height * np.sqrt(np.clip(1.0 - rad * rad, 0.0, 1.0))
    return np.column_stack([x, y, z])


def generate_world(spec: ScenarioSpec) -> World:
    """Render ``spec`` into a labelled cloud plus ground-truth passable/unpassable grids."""
    w, h = spec.grid_shape
    res = spec.grid_resolution
    unpassable = _place_unpassable(spec)
    blocked = np.zeros((h, w), dtype=bool)
    for st in unpassable:
        for c, r in st.cells:
            blocked[r, c] = True
    passable = _place_passable(spec, blocked, first_id=len(unpassable))
    terrain = _terrain(spec)
    stones = tuple(unpassable + passable)

    step = spec.terrain_spacing
    gx = np.arange(step / 2.0, spec.extent[0], step)
    gy = np.arange(step / 2.0, spec.extent[1], step)
    fx, fy = (a.ravel() for a in np.meshgrid(gx, gy))
    under = np.zeros(fx.shape, dtype=bool)
    for st in stones:
        box = (np.abs(fx - st.cx) <= max(st.semi_a, st.semi_b)) & (np.abs(fy - st.cy) <= max(st.semi_a, st.semi_b))
        idx = np.nonzero(box)[0]
        under[idx[st.contains(fx[idx], fy[idx])]] = True
    fx, fy = fx[~under], fy[~under]
    parts = [np.column_stack([fx, fy, terrain.height(fx, fy)])]
    labels = [np.zeros(len(fx), dtype=np.int8)]
    ids = [np.full(len(fx), -1, dtype=np.int64)]
    for st in stones:
        pts = _render_stone(st, terrain)
        parts.append(pts)
        labels.append(np.full(len(pts), int(st.label), dtype=np.int8))
        ids.append(np.full(len(pts), st.instance_id, dtype=np.int64))
    cloud = LabelledPointCloud(np.concatenate(parts), np.concatenate(labels), np.concatenate(ids))

    p_cells = np.full((h, w), FREE, dtype=np.int8)
    for st in passable:
        for c, r in st.cells:
            p_cells[r, c] = OCCUPIED
    u_cells = np.where(blocked, OCCUPIED, FREE).astype(np.int8)
    return World(
        spec,
        cloud,
        OccupancyGrid(res, 0.0, 0.0, p_cells),
        OccupancyGrid(res, 0.0, 0.0, u_cells),
        stones,
        terrain,
    )


# -- builtin setups -----------------------------------------------------------

SETUP_3D_GOALS = (("A", 1.75, 12.25), ("B", 8.25, 7.25), ("C", 12.25, 11.25), ("D", 10.75, 1.75))


def builtin_setups(seed: int = 1) -> list[ScenarioSpec]:
    """Setups 1-3 (flat, 104/159/206 passable stones) and the bumpy 3D variant of Setup 3."""
    flat = [
        ScenarioSpec(name=f"setup{k}", rng_seed=seed, n_passable=n, n_unpassable=22)
        for k, n in ((1, 104), (2, 159), (3, 206))
    ]
    setup3d = replace(
        flat[2],
        name="setup3d",
        terrain="heightfield",
        missions=SETUP_3D_GOALS,
        mission_mode="star",
    )
    return flat + [setup3d]


def builtin(name: str, seed: int = 1) -> ScenarioSpec:
    for spec in builtin_setups(seed):
        if spec.name == name:
            return spec
    raise KeyError(f"no builtin setup named {name!r}")


# -- key = value text format --------------------------------------------------

_NESTED = {"rrt": RrtParams, "poa": PoaParams, "poa_astar": PoaParams, "mapping": MappingParams, "speed": SpeedModel}
_PAIRS = {
    "extent", "passable_width", "passable_height", "unpassable_cells", "unpassable_height",
    "terrain_amplitude", "terrain_width",
}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def spec_to_text(spec: ScenarioSpec) -> str:
    lines = []
    for f in fields(ScenarioSpec):
        v = getattr(spec, f.name)
        if f.name in _NESTED:
            for sub in fields(type(v)):
                lines.append(f"{f.name}.{sub.name} = {_fmt(getattr(v, sub.name))}")
        elif f.name == "start":
            lines.append(f"start = {_fmt(v.x)} {_fmt(v.y)} {_fmt(v.theta)}")
        elif f.name == "missions":
            for name, x, y in v:
                lines.append(f"mission.{name} = {_fmt(x)} {_fmt(y)}")
        elif f.name == "extra_bumps":
            for k, b in enumerate(v):
                lines.append(f"bump.{k} = {_fmt(b.x)} {_fmt(b.y)} {_fmt(b.amplitude)} {_fmt(b.width)}")
        elif f.name in _PAIRS:
            lines.append(f"{f.name} = {_fmt(v[0])} {_fmt(v[1])}")
        else:
            lines.append(f"{f.name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def _coerce(kind, raw: str):
    if kind in (float, "float"):
        return float(raw)
    if kind in (int, "int"):
        return int(raw)
    if kind in (bool, "bool"):
        if raw.lower() not in ("true", "false"):
            raise ValueError(f"expected true/false, got {raw!r}")
        return raw.lower() == "true"
    return raw


def spec_from_text(text: str, base: ScenarioSpec | None = None) -> ScenarioSpec:
    """Parse ``key = value`` lines on top of ``base`` (defaults when omitted).

    ``#`` starts a comment.  Unknown keys and malformed values raise
    :class:`SpecParseError` carrying the line number.
    """
    base = base or ScenarioSpec()
    top = {f.name: f.type for f in fields(ScenarioSpec)}
    values: dict = {}
    nested: dict[str, dict] = {}
    missions: list | None = None
    bumps: list | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecParseError("expected 'key = value'", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        parts = raw.split()
        try:
            if "." in key:
                head, sub = key.split(".", 1)
                if head == "mission":
                    missions = missions if missions is not None else []
                    x, y = (float(p) for p in parts)
                    missions.append((sub, x, y))
                elif head == "bump":
                    bumps = bumps if bumps is not None else []
                    bumps.append(Bump(*(float(p) for p in parts)))
                elif head in _NESTED:
                    sub_types = {f.name: f.type for f in fields(_NESTED[head])}
                    if sub not in sub_types:
                        raise SpecParseError(f"unknown key {key!r}", lineno, key)
                    nested.setdefault(head, {})[sub] = _coerce(sub_types[sub], raw)
                else:
                    raise SpecParseError(f"unknown key {key!r}", lineno, key)
            elif key == "start":
                x, y, th = (float(p) for p in parts)
                values["start"] = Pose2D(x, y, th)
            elif key in _PAIRS:
                cast = int if key == "unpassable_cells" else float
                a, b = (cast(p) for p in parts)
                values[key] = (a, b)
            elif key in top and key not in _NESTED and key not in ("missions", "extra_bumps"):
                kind = top[key]
                values[key] = raw if kind in (str, "str") else _coerce(kind, raw)
            else:
                raise SpecParseError(f"unknown key {key!r}", lineno, key)
        except SpecParseError:
            raise
        except (TypeError, ValueError) as exc:
            raise SpecParseError(f"bad value for {key!r}: {exc}", lineno, key) from None
    for head, kw in nested.items():
        try:
            values[head] = replace(getattr(base, head), **kw)
        except ValueError as exc:
            raise SpecParseError(f"invalid {head} parameters: {exc}", key=head) from None
    if missions is not None:
        values["missions"] = tuple(missions)
    if bumps is not None:
        values["extra_bumps"] = tuple(bumps)
    try:
        return replace(base, **values)
    except ValueError as exc:
        raise SpecParseError(str(exc)) from None


def load_spec(path: str | Path) -> ScenarioSpec:
    text = Path(path).read_text(encoding="utf-8")
    return spec_from_text(text)


def save_spec(path: str | Path, spec: ScenarioSpec) -> None:
    Path(path).write_text(spec_to_text(spec), encoding="utf-8")
