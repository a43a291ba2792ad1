"""Differential-drive kinematics, figure-8 course and path-following metrics.

World frame: x/y in meters, heading in radians wrapped to (-pi, pi].
Positive angular velocity rotates heading toward +y; rendered from above
with +y drawn to the right of +x (canvas orientation), the turn-left
posture (w < 0) steers left on screen.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.remainder(a, math.tau)
    if a <= -math.pi:
        a += math.tau
    return a


@dataclass(frozen=True)
class Pose:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        if not all(map(math.isfinite, (self.x, self.y, self.heading))):
            raise InputError("pose components must be finite")
        object.__setattr__(self, "heading", wrap_angle(self.heading))


def integrate_unicycle(pose: Pose, v: float, w: float, dt: float) -> Pose:
    """Exact constant-twist update: straight line or circular arc of radius v/w."""
    if dt <= 0:
        raise InputError("dt must be positive")
    h = pose.heading
    if abs(w) < 1e-9:
        return Pose(pose.x + v * dt * math.cos(h),
                    pose.y + v * dt * math.sin(h),
                    h + w * dt)
    r = v / w
    h2 = h + w * dt
    return Pose(pose.x + r * (math.sin(h2) - math.sin(h)),
                pose.y - r * (math.cos(h2) - math.cos(h)),
                h2)


@dataclass(frozen=True)
class StraightSegment:
    start: tuple[float, float]
    heading: float
    length: float

    def point_at(self, s: float):
        return (self.start[0] + s * math.cos(self.heading),
                self.start[1] + s * math.sin(self.heading))

    def to_dict(self):
        return {"type": "straight", "start": list(self.start),
                "heading": self.heading, "length": self.length}


@dataclass(frozen=True)
class ArcSegment:
    center: tuple[float, float]
    radius: float
    phi0: float
    sweep: float  # signed: + is counter-clockwise in the x-y plane

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    def point_at(self, s: float):
        phi = self.phi0 + math.copysign(s / self.radius, self.sweep)
        return (self.center[0] + self.radius * math.cos(phi),
                self.center[1] + self.radius * math.sin(phi))

    def to_dict(self):
        return {"type": "arc", "center": list(self.center), "radius": self.radius,
                "phi0": self.phi0, "sweep": self.sweep}


def _segment_from_dict(d: dict):
    if d["type"] == "straight":
        return StraightSegment(tuple(d["start"]), d["heading"], d["length"])
    if d["type"] == "arc":
        return ArcSegment(tuple(d["center"]), d["radius"], d["phi0"], d["sweep"])
    raise InputError(f"unknown segment type {d['type']!r}")


@dataclass
class PathSpec:
    """A course: analytic segments plus a dense waypoint polyline.

    ``waypoints`` is an (N, 2) array with spacing at most ``spacing`` (1 cm
    by default); ``cum_s`` the cumulative arc length per waypoint.
    """

    segments: list
    waypoints: np.ndarray
    spacing: float = 0.01
    closed: bool = True
    cum_s: np.ndarray = field(default=None)

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        if self.waypoints.ndim != 2 or self.waypoints.shape[0] < 2:
            raise InputError("path needs at least 2 waypoints")
        if self.cum_s is None:
            steps = np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)
            self.cum_s = np.concatenate([[0.0], np.cumsum(steps)])

    @property
    def total_length(self) -> float:
        return float(self.cum_s[-1])

    @property
    def start(self):
        return self.waypoints[0]

    @classmethod
    def from_waypoints(cls, waypoints, closed: bool = False,
                       spacing: float | None = None) -> "PathSpec":
        wp = np.asarray(waypoints, dtype=float)
        if spacing is None:
            spacing = float(np.linalg.norm(np.diff(wp, axis=0), axis=1).max())
        return cls(segments=[], waypoints=wp, spacing=spacing, closed=closed)

    def to_json_dict(self) -> dict:
        return {"segments": [s.to_dict() for s in self.segments],
                "spacing": self.spacing, "closed": self.closed,
                "waypoints": [[float(x), float(y)] for x, y in self.waypoints]}

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f)

    @classmethod
    def from_json_dict(cls, d: dict) -> "PathSpec":
        return cls(segments=[_segment_from_dict(s) for s in d.get("segments", [])],
                   waypoints=np.asarray(d["waypoints"], dtype=float),
                   spacing=float(d.get("spacing", 0.01)),
                   closed=bool(d.get("closed", True)))

    @classmethod
    def load(cls, path) -> "PathSpec":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def _sample_segments(segments, spacing: float) -> np.ndarray:
    pts = []
    for k, seg in enumerate(segments):
        n = max(1, int(math.ceil(seg.length / spacing)))
        ss = np.linspace(0.0, seg.length, n + 1)
        if k > 0:
            ss = ss[1:]  # junction point already emitted by the previous segment
        pts.extend(seg.point_at(float(s)) for s in ss)
    return np.asarray(pts)


def build_figure8(straight_len: float = 4.0, radius: float = 1.0,
                  spacing: float = 0.01) -> PathSpec:
    """Closed figure-8: three straight lines and four half-circles.

    Two stadium-shaped lobes tangent at the crossing point. Tangent
    continuity with half-circle caps forces the middle straight to equal
    the two outer ones combined, so the outer straights are 3/4 of
    ``straight_len`` and the middle one 3/2 of it; the total straight
    length is 3 * straight_len and the total course length
    3 * straight_len + 4 * pi * radius. Starts at the origin heading +y.
    """
    if straight_len <= 0 or radius <= 0:
        raise ConfigurationError("straight_len and radius must be positive")
    a = 0.75 * straight_len   # outer straights
    b = 1.5 * straight_len    # middle straight
    r = radius
    up, down = math.pi / 2, -math.pi / 2
    segments = [
        StraightSegment((0.0, 0.0), up, a),
        ArcSegment((r, a), r, math.pi, -math.pi),          # top cap, clockwise
        StraightSegment((2 * r, a), down, b),
        ArcSegment((3 * r, a - b), r, math.pi, math.pi),   # bottom cap, ccw
        StraightSegment((4 * r, a - b), up, a),
        ArcSegment((3 * r, 0.0), r, 0.0, math.pi),         # inner cap, ccw
        ArcSegment((r, 0.0), r, 0.0, -math.pi),            # inner cap, clockwise
    ]
    wp = _sample_segments(segments, spacing)
    if np.linalg.norm(wp[0] - wp[-1]) > 1e-9:
        raise ConfigurationError("figure-8 construction failed to close")
    wp[-1] = wp[0]
    return PathSpec(segments=segments, waypoints=wp, spacing=spacing, closed=True)


class PathMatcher:
    """Nearest-waypoint lookup restricted to a monotone progress window.

    Keeps cross-error well defined at the figure-8 crossing: the search
    never jumps to the other lobe because the window only advances along
    the path.
    """

    def __init__(self, path: PathSpec, back_window: float = 0.5,
                 fwd_window: float = 2.0):
        if path.waypoints.shape[0] < 2:
            raise InputError("path needs at least 2 waypoints")
        self.path = path
        self._back_n = max(1, int(back_window / max(path.spacing, 1e-9)))
        self._fwd_n = max(2, int(fwd_window / max(path.spacing, 1e-9)))
        self.cursor = 0

    def match(self, x: float, y: float):
        """Return ``(progress_s, distance, index)`` for the query point.

        ``distance`` is the point-to-line distance to the chord through the
        two nearest waypoints in the window; ``None`` when the chord is
        degenerate (the sample should be skipped).
        """
        wp = self.path.waypoints
        lo = max(0, self.cursor - self._back_n)
        hi = min(len(wp), self.cursor + self._fwd_n + 1)
        window = wp[lo:hi]
        d2 = (window[:, 0] - x) ** 2 + (window[:, 1] - y) ** 2
        i = lo + int(np.argmin(d2))
        self.cursor = max(self.cursor, i)

        # second-nearest neighbor forms the local chord
        cands = [j for j in (i - 1, i + 1) if 0 <= j < len(wp)]
        j = min(cands, key=lambda j: (wp[j, 0] - x) ** 2 + (wp[j, 1] - y) ** 2)
        p, q = wp[i], wp[j]
        chord = q - p
        norm = math.hypot(chord[0], chord[1])
        if norm < 1e-12:
            warnings.warn("degenerate chord in path matching; sample skipped")
            return float(self.path.cum_s[i]), None, i
        # line a x + b y + c = 0 through p and q
        a_, b_ = -chord[1] / norm, chord[0] / norm
        c_ = -(a_ * p[0] + b_ * p[1])
        dist = abs(a_ * x + b_ * y + c_)
        return float(self.path.cum_s[i]), dist, i


def cross_error(trace, path: PathSpec) -> float:
    """Mean distance from the trace to the local chord of the path."""
    if path.waypoints.shape[0] < 2:
        raise InputError("path needs at least 2 waypoints")
    matcher = PathMatcher(path)
    dists = []
    for x, y in zip(trace.x, trace.y):
        _, d, _ = matcher.match(float(x), float(y))
        if d is not None:
            dists.append(d)
    if not dists:
        raise InputError("no valid samples for cross error")
    return float(np.mean(dists))


def avg_accel(trace) -> float:
    """Mean absolute command acceleration, linear and angular averaged.

    Sum of absolute velocity increments over twice the duration, i.e. the
    time integral of (|v_dot| + |w_dot|) / 2 divided by the duration, which
    keeps the metric independent of the sample rate.
    """
    if len(trace.t) < 2:
        raise InputError("need at least 2 samples")
    duration = float(trace.t[-1] - trace.t[0])
    if duration <= 0:
        raise InputError("trace duration must be positive")
    tv_v = float(np.sum(np.abs(np.diff(trace.v))))
    tv_w = float(np.sum(np.abs(np.diff(trace.w))))
    return (tv_v + tv_w) / (2.0 * duration)


def completion_time(trace, path: PathSpec, start_disk: float = 0.2,
                    coverage: float = 0.95) -> float | None:
    """Course time: from leaving the start disk to re-entering it after
    covering at least ``coverage`` of the path length.

    Returns ``None`` when the course was not completed.
    """
    start = path.start
    d0 = math.hypot(trace.x[0] - start[0], trace.y[0] - start[1])
    if d0 > start_disk:
        raise InputError("trace does not begin at the path start")
    matcher = PathMatcher(path)
    needed = coverage * path.total_length
    t_leave = None
    for i in range(len(trace.t)):
        x, y, t = float(trace.x[i]), float(trace.y[i]), float(trace.t[i])
        progress, _, _ = matcher.match(x, y)
        d_start = math.hypot(x - start[0], y - start[1])
        if t_leave is None:
            if d_start > start_disk:
                t_leave = t
            continue
        if progress >= needed and d_start <= start_disk:
            return t - t_leave
    return None


@dataclass
class RunTrace:
    """Closed-loop run record: uniform time series of pose and command."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    v: np.ndarray
    w: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t", "x", "y", "heading", "v", "w"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(np.diff(self.t) <= 0):
            raise InputError("trace timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def save_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for i in range(len(self.t)):
                f.write(json.dumps({
                    "t": round(float(self.t[i]), 9),
                    "x": float(self.x[i]), "y": float(self.y[i]),
                    "heading": float(self.heading[i]),
                    "v": float(self.v[i]), "w": float(self.w[i]),
                }) + "\n")

    @classmethod
    def load_jsonl(cls, path) -> "RunTrace":
        rows = []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        if not rows:
            raise InputError(f"empty trace file {path}")
        return cls(t=[r["t"] for r in rows], x=[r["x"] for r in rows],
                   y=[r["y"] for r in rows], heading=[r["heading"] for r in rows],
                   v=[r["v"] for r in rows], w=[r["w"] for r in rows])
