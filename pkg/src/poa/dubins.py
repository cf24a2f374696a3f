"""Shortest forward-only curvature-bounded paths between oriented poses.

Closed-form solutions for the six Dubins words, evaluated in the frame where
the start sits at the origin and the goal lies on the +x axis, with all
distances scaled by the turning radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose2D, normalize_angle

WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
TWO_PI = 2.0 * math.pi
_SNAP = 1e-10


def _mod2pi(a: float) -> float:
    a = math.fmod(a, TWO_PI)
    if a < 0:
        a += TWO_PI
    # values a hair below 2*pi are rounding noise around a zero-length arc
    if a > TWO_PI - _SNAP:
        a = 0.0
    return a


def _lsl(a, b, d, sa, sb, ca, cb, cab):
    p2 = 2 + d * d - 2 * cab + 2 * d * (sa - sb)
    if p2 < 0:
        return None
    tmp = math.atan2(cb - ca, d + sa - sb)
    return _mod2pi(-a + tmp), math.sqrt(p2), _mod2pi(b - tmp)


def _rsr(a, b, d, sa, sb, ca, cb, cab):
    p2 = 2 + d * d - 2 * cab + 2 * d * (sb - sa)
    if p2 < 0:
        return None
    tmp = math.atan2(ca - cb, d - sa + sb)
    return _mod2pi(a - tmp), math.sqrt(p2), _mod2pi(-b + tmp)


def _lsr(a, b, d, sa, sb, ca, cb, cab):
    p2 = -2 + d * d + 2 * cab + 2 * d * (sa + sb)
    if p2 < 0:
        return None
    p = math.sqrt(p2)
    tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
    return _mod2pi(-a + tmp), p, _mod2pi(-_mod2pi(b) + tmp)


def _rsl(a, b, d, sa, sb, ca, cb, cab):
    p2 = -2 + d * d + 2 * cab - 2 * d * (sa + sb)
    if p2 < 0:
        return None
    p = math.sqrt(p2)
    tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
    return _mod2pi(a - tmp), p, _mod2pi(b - tmp)


def _rlr(a, b, d, sa, sb, ca, cb, cab):
    tmp = (6.0 - d * d + 2 * cab + 2 * d * (sa - sb)) / 8.0
    if abs(tmp) > 1:
        return None
    p = _mod2pi(TWO_PI - math.acos(tmp))
    t = _mod2pi(a - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
    return t, p, _mod2pi(a - b - t + p)


def _lrl(a, b, d, sa, sb, ca, cb, cab):
    tmp = (6.0 - d * d + 2 * cab + 2 * d * (sb - sa)) / 8.0
    if abs(tmp) > 1:
        return None
    p = _mod2pi(TWO_PI - math.acos(tmp))
    t = _mod2pi(-a - math.atan2(ca - cb, d + sa - sb) + p / 2.0)
    return t, p, _mod2pi(b - a - t + p)


_SOLVERS = {"LSL": _lsl, "RSR": _rsr, "LSR": _lsr, "RSL": _rsl, "RLR": _rlr, "LRL": _lrl}


def _advance(x: float, y: float, th: float, kind: str, s: float, r: float) -> tuple[float, float, float]:
    """Move ``s`` metres along one segment of type ``kind`` from ``(x, y, th)``."""
    if kind == "S":
        return x + s * math.cos(th), y + s * math.sin(th), th
    phi = s / r
    if kind == "L":
        return (
            x + r * (math.sin(th + phi) - math.sin(th)),
            y - r * (math.cos(th + phi) - math.cos(th)),
            th + phi,
        )
    return (
        x - r * (math.sin(th - phi) - math.sin(th)),
        y + r * (math.cos(th - phi) - math.cos(th)),
        th - phi,
    )


@dataclass(frozen=True)
class DubinsPath:
    word: str
    segment_lengths: tuple[float, float, float]
    turn_radius: float
    start: Pose2D

    def __post_init__(self):
        if self.word not in WORDS:
            raise ValueError(f"unknown Dubins word {self.word!r}")
        if any(s < 0 for s in self.segment_lengths):
            raise ValueError("segment lengths must be non-negative")

    @property
    def length(self) -> float:
        return sum(self.segment_lengths)

    def pose_at(self, s: float) -> Pose2D:
        """Pose after travelling arc length ``s`` (clamped to the path)."""
        s = min(max(s, 0.0), self.length)
        x, y, th = self.start.x, self.start.y, self.start.theta
        for kind, seg in zip(self.word, self.segment_lengths):
            step = min(s, seg)
            x, y, th = _advance(x, y, th, kind, step, self.turn_radius)
            s -= step
            if s <= 0:
                break
        return Pose2D(x, y, th)

    def endpoint(self) -> Pose2D:
        x, y, th = self.start.x, self.start.y, self.start.theta
        for kind, seg in zip(self.word, self.segment_lengths):
            x, y, th = _advance(x, y, th, kind, seg, self.turn_radius)
        return Pose2D(x, y, th)


def dubins_words(start: Pose2D, goal: Pose2D, turn_radius: float) -> dict[str, DubinsPath]:
    """Every word that admits a solution, keyed by word."""
    if not turn_radius > 0:
        raise ValueError("turn_radius must be > 0")
    dx, dy = goal.x - start.x, goal.y - start.y
    d = math.hypot(dx, dy) / turn_radius
    phi = math.atan2(dy, dx) if d > 0 else 0.0
    a = _mod2pi(start.theta - phi)
    b = _mod2pi(goal.theta - phi)
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    cab = math.cos(a - b)
    out = {}
    for word in WORDS:
        sol = _SOLVERS[word](a, b, d, sa, sb, ca, cb, cab)
        if sol is None:
            continue
        out[word] = DubinsPath(word, tuple(v * turn_radius for v in sol), turn_radius, start)
    return out


def dubins_shortest(start: Pose2D, goal: Pose2D, turn_radius: float) -> DubinsPath:
    """Minimum-length Dubins path; ties resolve in the order of ``WORDS``.

    Coincident poses give a zero-length LSL path.
    """
    if not turn_radius > 0:
        raise ValueError("turn_radius must be > 0")
    if start.x == goal.x and start.y == goal.y and start.theta == goal.theta:
        return DubinsPath("LSL", (0.0, 0.0, 0.0), turn_radius, start)
    cands = dubins_words(start, goal, turn_radius)
    best = min(p.length for p in cands.values())
    tol = 1e-10 * max(1.0, best)
    for word in WORDS:
        if word in cands and cands[word].length <= best + tol:
            return cands[word]
    raise AssertionError("no Dubins word admitted a solution")  # pragma: no cover


def sample_dubins(path: DubinsPath, step: float) -> list[Pose2D]:
    """Poses at uniform arc-length spacing of at most ``step``, both ends included."""
    if not step > 0:
        raise ValueError("step must be > 0")
    total = path.length
    if total <= 0:
        return [path.start]
    n = max(1, math.ceil(total / step - 1e-9))
    poses = [path.pose_at(total * k / n) for k in range(n)]
    poses.append(path.endpoint())
    return poses


def heading_between(p: tuple[float, float], q: tuple[float, float]) -> float:
    return normalize_angle(math.atan2(q[1] - p[1], q[0] - p[0]))
