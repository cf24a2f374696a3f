"""Command-line front end: ``poa generate``, ``poa plan`` and ``poa bench``.

Exit codes: 0 success, 2 no path (or no stable 3D path), 64 usage error,
74 I/O error.  ``POA_LOG`` (error, warn, info, debug) sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .benchmark import PLANNERS, plan_leg, run_benchmark
from .errors import NoPath, PoaError, SpecParseError
from .geometry import RobotGeometry, read_cloud, read_grid, write_cloud, write_grid
from .paths import path2d_to_csv
from .scenario import Terrain, World, builtin, builtin_setups, generate_world, load_spec, save_spec, spec_from_text
from .simulation import path_length, simulate_traversal
from .svg import render_svg
from .terrain3d import StabilityLimits, plan_3d, preprocess_cloud

log = logging.getLogger("poa")

EXIT_OK = 0
EXIT_NO_PATH = 2
EXIT_USAGE = 64
EXIT_IO = 74

CLOUD_FILE = "cloud.poacloud"
PASSABLE_FILE = "passable.poagrid"
UNPASSABLE_FILE = "unpassable.poagrid"
SPEC_FILE = "scenario.spec"

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _setup_logging() -> None:
    level = os.environ.get("POA_LOG", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _resolve_spec(source: str, seed: int | None, params: str | None):
    """A builtin setup name or a spec file, with optional seed and parameter overrides."""
    try:
        spec = builtin(source) if not Path(source).is_file() else load_spec(source)
    except KeyError:
        names = ", ".join(s.name for s in builtin_setups())
        raise UsageError(f"{source!r} is neither a spec file nor a builtin setup ({names})") from None
    if params:
        spec = spec_from_text(Path(params).read_text(encoding="utf-8"), base=spec)
    if seed is not None:
        spec = spec.with_seed(seed)
    return spec


def _prepare_out(out: Path, names, force: bool) -> None:
    existing = [n for n in names if (out / n).exists()]
    if existing and not force:
        raise UsageError(f"{out / existing[0]} exists; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)


def cmd_generate(args) -> int:
    spec = _resolve_spec(args.spec, args.seed, args.params)
    out = Path(args.out or spec.name)
    _prepare_out(out, (CLOUD_FILE, PASSABLE_FILE, UNPASSABLE_FILE, SPEC_FILE), args.force)
    world = generate_world(spec)
    write_cloud(out / CLOUD_FILE, world.cloud)
    write_grid(out / PASSABLE_FILE, world.passable)
    write_grid(out / UNPASSABLE_FILE, world.unpassable)
    save_spec(out / SPEC_FILE, spec)
    w, h = spec.grid_shape
    print(f"{spec.name}: {len(world.cloud)} points, grid {w}x{h} cells -> {out}")
    return EXIT_OK


def _load_world(source: str, seed: int | None, params: str | None) -> World:
    src = Path(source)
    if src.is_dir():
        spec = load_spec(src / SPEC_FILE)
        if params:
            spec = spec_from_text(Path(params).read_text(encoding="utf-8"), base=spec)
        return World(spec, read_cloud(src / CLOUD_FILE), read_grid(src / PASSABLE_FILE),
                     read_grid(src / UNPASSABLE_FILE), (), Terrain())
    return generate_world(_resolve_spec(source, seed, params))


def cmd_plan(args) -> int:
    if args.three_d and not args.poa:
        raise UsageError("--3d needs --poa")
    world = _load_world(args.world, args.seed, args.params)
    spec = world.spec
    base = args.planner
    name = f"{base}+poa" if args.poa else base
    out = Path(args.out or f"{spec.name}_{name.replace('+', '_')}{'_3d' if args.three_d else ''}")
    legs = spec.legs()
    files = [f"path_{leg}.csv" for leg, _, _ in legs] + ["provenance.json", "plot.svg"]
    _prepare_out(out, files, args.force)
    geom = RobotGeometry()
    model = preprocess_cloud(world.cloud, world.passable, world.unpassable, geom=geom) if args.three_d else None

    record = {"world": args.world, "setup": spec.name, "seed": spec.rng_seed, "planner": name,
              "three_d": bool(args.three_d), "legs": []}
    drawn, splices, failed = [], [], False
    for k, (leg, start, goal) in enumerate(legs):
        entry = {"leg": leg}
        try:
            if args.three_d:
                path = plan_3d(base, world.passable, world.unpassable, model, start, goal, geom,
                               spec.poa_params(base), StabilityLimits(), rrt=spec.rrt)
                csv_text, xy = path.to_csv(), path.xyz
                entry.update(max_abs_roll=float(np.abs(path.roll).max()),
                             max_abs_pitch=float(np.abs(path.pitch).max()))
            else:
                path = plan_leg(world, name, start, goal, k, geom)
                csv_text, xy = path2d_to_csv(path), path.xy
            entry.update(status="ok", distance_m=path_length(path),
                         time_s=simulate_traversal(path, world.passable, geom, spec.speed), meta=path.meta)
            (out / f"path_{leg}.csv").write_text(csv_text, encoding="utf-8")
            drawn.append((leg, xy))
            splices += [tuple(s["at"]) for s in path.meta.get("splices", [])]
            print(f"{leg}: {entry['distance_m']:.2f} m, {entry['time_s']:.0f} s")
        except NoPath as exc:
            entry.update(status="FAILURE", reason=str(exc))
            failed = True
            print(f"{leg}: FAILURE ({exc})")
            if spec.mission_mode == "chain":
                record["legs"].append(entry)
                break
        record["legs"].append(entry)
    (out / "provenance.json").write_text(json.dumps(record, indent=2, default=_jsonable) + "\n", encoding="utf-8")
    markers = [("start", spec.start.x, spec.start.y)] + [(n, x, y) for n, x, y in spec.missions]
    svg = render_svg(world.passable, world.unpassable, drawn, markers, splices, title=f"{spec.name} {name}")
    (out / "plot.svg").write_text(svg, encoding="utf-8")
    return EXIT_NO_PATH if failed else EXIT_OK


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def cmd_bench(args) -> int:
    specs = [_resolve_spec(s, None, args.params) for s in (args.specs or ["setup1", "setup2", "setup3"])]
    planners = [p.strip() for p in args.planner.split(",")] if args.planner else list(PLANNERS)
    bad = [p for p in planners if p not in PLANNERS]
    if bad:
        raise UsageError(f"unknown planner {bad[0]!r}; choose from {', '.join(PLANNERS)}")
    if args.repeats < 1:
        raise UsageError("--repeats must be at least 1")
    table = run_benchmark(specs, planners, args.repeats, base_seed=args.seed, workers=args.workers)
    text = table.render()
    print(text, end="")
    if args.out:
        out = Path(args.out)
        _prepare_out(out, ("results.csv", "summary.txt"), args.force)
        (out / "results.csv").write_text(table.to_csv(), encoding="utf-8")
        (out / "summary.txt").write_text(text, encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="poa", description="Passable-obstacle-aware planning toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--params", help="key = value file applied on top of the scenario")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--force", action="store_true", help="overwrite existing output files")

    g = sub.add_parser("generate", help="render a scenario to a cloud, two grids and a spec copy")
    g.add_argument("spec", help="builtin setup name or scenario file")
    common(g)
    g.set_defaults(func=cmd_generate)

    pl = sub.add_parser("plan", help="plan every mission leg and write CSV, provenance and SVG")
    pl.add_argument("world", help="world directory from 'generate', builtin name or scenario file")
    pl.add_argument("planner", nargs="?", choices=("astar", "rrt_star", "gvd"))
    pl.add_argument("--planner", dest="planner_opt", choices=("astar", "rrt_star", "gvd"))
    pl.add_argument("--poa", action="store_true", help="repair the plan around passable stones")
    pl.add_argument("--3d", dest="three_d", action="store_true", help="lift to terrain and gate on roll/pitch")
    common(pl)
    pl.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="compare planners over seeded scenario ensembles")
    b.add_argument("specs", nargs="*", help="builtin names or scenario files (default: setup1-3)")
    b.add_argument("--planner", "--planners", dest="planner", help="comma-separated planner list")
    b.add_argument("--repeats", type=int, default=1, help="seeds per scenario")
    b.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "plan":
        if args.planner and args.planner_opt and args.planner != args.planner_opt:
            parser.error("conflicting planner arguments")
        args.planner = args.planner or args.planner_opt
        if not args.planner:
            parser.error("plan needs a planner")
    try:
        return args.func(args)
    except (UsageError, SpecParseError, ValueError) as exc:
        print(f"poa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoPath as exc:
        print(f"poa: no path: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    except OSError as exc:
        print(f"poa: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PoaError as exc:
        print(f"poa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
