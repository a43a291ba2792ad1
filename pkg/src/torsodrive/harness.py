"""Closed-loop harness: virtual driver -> synthetic frames -> pipeline -> vehicle.

Stands in for a human rider so scenarios and sweeps run scripted and
deterministic: a lookahead steering law picks an intended posture, a
synthetic-user model turns it into raw sensor frames, and the regular
pipeline drives the simulated vehicle around the course.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .calibration import CalibrationProfile
from .coupling import (CouplingParams, ForceProfile, average_angular_accel,
                       simulate)
from .errors import AbortRun, ConfigurationError, InputError, PendulumFell
from .mapping import (Gate, MappingParams, PipelineSession, command,
                      forward_max_angle, magnitude)
from .sensing import (CATEGORY_ORDER, CircuitParams, PostureCategory,
                      SensorFrame, classify_posture, from_conductance)
from .vehicle import (PathMatcher, PathSpec, Pose, RunTrace, avg_accel,
                      build_figure8, completion_time, cross_error,
                      integrate_unicycle, wrap_angle)


@dataclass
class DriverParams:
    """Steering stand-in constants (lookahead pursuit on the waypoint list)."""

    lookahead: float = 1.0
    recovery_radius: float = 1.5
    cruise_intensity: float = 0.6
    err_saturation: float = 0.6    # rad of heading error for full lateral bias
    spin_margin: float = 0.1       # keep bias saturation inside the turn regions

    def __post_init__(self):
        if self.lookahead <= 0 or self.recovery_radius <= 0:
            raise ConfigurationError("lookahead and recovery radius must be positive")
        if not (0 < self.cruise_intensity <= 1):
            raise ConfigurationError("cruise intensity must be in (0, 1]")


@dataclass
class NoiseParams:
    sigma_lambda: float = 0.0      # relative, on conductance
    sigma_theta_deg: float = 0.0   # absolute, on bending angle


@dataclass(frozen=True)
class Intent:
    """Driver intention: posture category, effort level, lateral bias."""

    category: PostureCategory
    intensity: float
    bias: float
    delta_target: float | None = None


def _bias_to_delta(bias: float, profile: CalibrationProfile,
                   spin_margin: float) -> float:
    """Map lateral bias in [-1, 1] onto the COP axis.

    Zero bias sits on the forward reference. Nonzero bias spans the active
    turn bands starting at the plateau edges (where the angular weight is
    still zero, so the command stays continuous); full bias saturates just
    short of the spin boundaries.
    """
    b1, b2, b3, b4 = profile.beta
    if bias == 0.0:
        return profile.delta_ref[2]
    d_left = b1 + spin_margin * (b2 - b1)
    d_right = b4 - spin_margin * (b4 - b3)
    if bias > 0:
        return b3 + bias * (d_right - b3)
    return b2 + bias * (b2 - d_left)


def delta_for_intent(intent: Intent, profile: CalibrationProfile,
                     spin_margin: float = 0.1) -> float:
    """COP target for an intent; explicit categories override the bias map."""
    if intent.delta_target is not None:
        return intent.delta_target
    delta = _bias_to_delta(intent.bias, profile, spin_margin)
    if classify_posture(delta, profile.beta) is intent.category:
        return delta
    # category-anchored request (e.g. spins): use its reference COP
    idx = CATEGORY_ORDER.index(intent.category)
    return profile.delta_ref[idx]


def virtual_driver(pose: Pose, path: PathSpec, matcher: PathMatcher,
                   params: DriverParams, profile: CalibrationProfile) -> Intent:
    """Lookahead steering: heading error to a point ahead on the path.

    Raises ``AbortRun`` when the vehicle is farther from the path than the
    recovery radius.
    """
    s_now, dist, _ = matcher.match(pose.x, pose.y)
    if dist is not None and dist > params.recovery_radius:
        raise AbortRun(f"off course by {dist:.2f} m at s={s_now:.2f}")
    s_look = s_now + params.lookahead
    if path.closed:
        s_look = s_look % path.cum_s[-1]
    else:
        s_look = min(s_look, path.cum_s[-1])
    idx = int(np.searchsorted(path.cum_s, s_look))
    idx = min(idx, len(path.waypoints) - 1)
    tx, ty = path.waypoints[idx]
    err = wrap_angle(math.atan2(ty - pose.y, tx - pose.x) - pose.heading)
    bias = max(-1.0, min(1.0, err / params.err_saturation))
    delta = _bias_to_delta(bias, profile, params.spin_margin)
    return Intent(category=classify_posture(delta, profile.beta),
                  intensity=params.cruise_intensity, bias=bias,
                  delta_target=delta)


@dataclass
class SyntheticUser:
    """Posture-to-sensor model standing in for a rider's body.

    ``alpha_true`` are the reciprocal sensor sensitivities calibration
    should recover; dwell patterns anchor full pressure on the sensor
    nearest the COP target and spill the remainder to one neighbor, so
    every sensor peaks at ``p_max`` during its dominant posture.
    """

    alpha_true: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)
    zero_offset_true: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0, 0.0)
    delta_targets: tuple[float, ...] = (-0.8, -0.4, 0.0, 0.4, 0.8)
    theta_fm_true: tuple[float, ...] = (25.0, 25.0, 25.0, 25.0, 25.0)
    p_max: float = 1.0
    noise: NoiseParams = field(default_factory=NoiseParams)
    positions: tuple[float, ...] = (-1.0, -0.5, 0.0, 0.5, 1.0)
    circuit: CircuitParams = field(default_factory=CircuitParams)

    @classmethod
    def ideal(cls, profile: CalibrationProfile,
              noise: NoiseParams | None = None) -> "SyntheticUser":
        return cls(alpha_true=profile.alpha,
                   zero_offset_true=profile.zero_offsets,
                   delta_targets=profile.delta_ref,
                   theta_fm_true=profile.theta_fm_per_posture,
                   p_max=profile.p_max,
                   noise=noise or NoiseParams(),
                   positions=profile.layout.positions)

    def pressure_pattern(self, delta: float) -> np.ndarray:
        """Calibrated-space pattern with COP exactly at ``delta``."""
        s = np.asarray(self.positions)
        delta = float(min(max(delta, s[0]), s[-1]))
        pattern = np.zeros(len(s))
        k = int(np.argmin(np.abs(s - delta)))
        pattern[k] = self.p_max
        if delta > s[k] and k + 1 < len(s):
            pattern[k + 1] = self.p_max * (delta - s[k]) / (s[k + 1] - delta)
        elif delta < s[k] and k - 1 >= 0:
            pattern[k - 1] = self.p_max * (s[k] - delta) / (delta - s[k - 1])
        return pattern

    def synthesize(self, intent: Intent, theta_fm_deg: float, t: float = 0.0,
                   rng: np.random.Generator | None = None,
                   theta_ft_deg: float = 3.0) -> SensorFrame:
        """Raw sensor frame realizing an intent under a bending budget."""
        if not (0.0 <= intent.intensity <= 1.0):
            raise InputError("intensity must be in [0, 1]")
        rng = rng or np.random.default_rng(0)
        if intent.intensity == 0.0:
            lam = np.asarray(self.zero_offset_true, dtype=float)
            theta_b = 0.0
        else:
            delta = delta_for_intent(intent, self._profile_view())
            amplitude = max(0.25, intent.intensity)
            pattern = self.pressure_pattern(delta) * amplitude
            lam = pattern / np.asarray(self.alpha_true) + np.asarray(self.zero_offset_true)
            theta_b = theta_ft_deg + intent.intensity * (theta_fm_deg - theta_ft_deg)
        if self.noise.sigma_lambda > 0:
            lam = lam * (1.0 + self.noise.sigma_lambda * rng.standard_normal(len(lam)))
        if self.noise.sigma_theta_deg > 0:
            theta_b = theta_b + self.noise.sigma_theta_deg * rng.standard_normal()
        raw = from_conductance(np.clip(lam, 0.0, None), self.circuit)
        return SensorFrame(t=t, raw=tuple(raw), theta_b_deg=float(theta_b))

    def _profile_view(self) -> CalibrationProfile:
        # minimal profile carrying the user's own posture geometry
        if not hasattr(self, "_pview"):
            from .calibration import midpoint_boundaries
            self._pview = CalibrationProfile(
                zero_offsets=(0.0,) * len(self.positions),
                alpha=(1.0,) * len(self.positions),
                p_max=self.p_max,
                beta=midpoint_boundaries(self.delta_targets),
                delta_ref=tuple(self.delta_targets),
                f1_coeffs=(0.0, 0.0, 1.0),
                theta_fm_per_posture=tuple(self.theta_fm_true),
            )
        return self._pview


def synthesize_frame(intent: Intent, user: SyntheticUser, theta_fm_deg: float,
                     t: float = 0.0, rng: np.random.Generator | None = None,
                     theta_ft_deg: float = 3.0) -> SensorFrame:
    return user.synthesize(intent, theta_fm_deg, t, rng, theta_ft_deg)


@dataclass
class ScenarioConfig:
    """Everything a closed-loop run needs; fixed seed means identical output."""

    scenario_id: str = "figure8-default"
    straight_len: float = 4.0
    radius: float = 1.0
    dt: float = 0.02
    duration_cap_s: float = 240.0
    seed: int = 0
    driver: DriverParams = field(default_factory=DriverParams)
    mapping: MappingParams = field(default_factory=MappingParams)
    profile: CalibrationProfile = field(default_factory=CalibrationProfile.default)
    noise: NoiseParams = field(default_factory=NoiseParams)

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")

    def params_hash(self) -> str:
        blob = json.dumps({
            "scenario_id": self.scenario_id, "straight_len": self.straight_len,
            "radius": self.radius, "dt": self.dt,
            "duration_cap_s": self.duration_cap_s, "seed": self.seed,
            "driver": asdict(self.driver), "mapping": self.mapping.to_dict(),
            "profile": self.profile.to_json_dict(), "noise": asdict(self.noise),
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def run_closed_loop(config: ScenarioConfig):
    """Drive the figure-8 with the virtual rider.

    Returns ``(trace, metrics, status)`` with status one of ``completed``,
    ``aborted`` or ``timeout``. The trace is persisted by the caller.
    """
    path = build_figure8(config.straight_len, config.radius)
    user = SyntheticUser.ideal(config.profile, noise=config.noise)
    session = PipelineSession(config.profile, config.mapping, user.circuit)
    matcher = PathMatcher(path)
    rng = np.random.default_rng(config.seed)

    sx, sy = path.start
    pose = Pose(sx, sy, math.pi / 2)
    rows = {k: [] for k in ("t", "x", "y", "heading", "v", "w")}
    start_disk = 0.2
    left_start = False
    safety_stops = 0
    status = "timeout"
    n_max = int(config.duration_cap_s / config.dt)
    t = 0.0
    for _ in range(n_max):
        try:
            intent = virtual_driver(pose, path, matcher, config.driver, config.profile)
        except AbortRun:
            status = "aborted"
            break
        budget = forward_max_angle(intent.delta_target, config.profile, config.mapping)
        frame = user.synthesize(intent, budget, t, rng,
                                theta_ft_deg=config.mapping.theta_ft)
        cmd = session.tick(frame)
        if cmd.gate is Gate.SAFETY_STOP:
            safety_stops += 1
        rows["t"].append(t)
        rows["x"].append(pose.x)
        rows["y"].append(pose.y)
        rows["heading"].append(pose.heading)
        rows["v"].append(cmd.v)
        rows["w"].append(cmd.w)
        pose = integrate_unicycle(pose, cmd.v, cmd.w, config.dt)
        t += config.dt

        d_start = math.hypot(pose.x - sx, pose.y - sy)
        if not left_start:
            left_start = d_start > start_disk
        elif (matcher.path.cum_s[matcher.cursor] >= 0.95 * path.total_length
              and d_start <= start_disk):
            # record the finishing pose so offline metrics see the arrival
            rows["t"].append(t)
            rows["x"].append(pose.x)
            rows["y"].append(pose.y)
            rows["heading"].append(pose.heading)
            rows["v"].append(cmd.v)
            rows["w"].append(cmd.w)
            status = "completed"
            break

    trace = RunTrace(meta={"scenario": config.scenario_id, "interface": "torso",
                           "params_hash": config.params_hash(), "status": status,
                           "seed": config.seed, "safety_stops": safety_stops},
                     **rows)
    metrics = {
        "scenario": config.scenario_id,
        "CT": completion_time(trace, path) if status == "completed" else None,
        "A_a": avg_accel(trace),
        "A_e": cross_error(trace, path),
        "status": status,
        "safety_stops": safety_stops,
    }
    return trace, metrics, status


def velocity_space_sweep(profile: CalibrationProfile, params: MappingParams,
                         n_delta: int = 60, n_theta: int = 60) -> np.ndarray:
    """Attainable normalized (v, w) pairs over the COP / bending-angle grid."""
    if n_delta < 10 or n_theta < 10:
        raise InputError("grid must be at least 10x10")
    s = profile.layout.positions
    pts = []
    for delta in np.linspace(s[0], s[-1], n_delta):
        theta_fm = forward_max_angle(float(delta), profile, params)
        for theta_b in np.linspace(params.theta_bm, theta_fm, n_theta):
            p, region = magnitude(float(theta_b), theta_fm, params)
            cmd = command(p, region, float(delta), profile, params)
            pts.append((cmd.v / params.v_max, cmd.w / params.w_max))
    return np.asarray(pts)


def stiffness_study(kappas, params: CouplingParams | None = None,
                    dt: float = 1e-3, profile: ForceProfile | None = None):
    """Run the staged-force scenario per stiffness and score vibration.

    Returns one row per kappa: dict with A_aa, rise time and overshoot of
    the first nonzero stage, and a status flag (``fell`` rows keep NaNs).
    """
    params = params or CouplingParams()
    rows = []
    for kappa in kappas:
        if kappa <= 0:
            raise InputError("kappa must be positive")
        p = CouplingParams(m=params.m, M=params.M, l=params.l, g=params.g,
                           h_max=params.h_max, kappa=float(kappa), k_c=params.k_c,
                           k_d=params.k_d, k_2=params.k_2, k_3=params.k_3)
        prof = profile or ForceProfile.staged_default(p)
        try:
            trace = simulate(prof, p, dt=dt)
        except PendulumFell:
            rows.append({"kappa": float(kappa), "A_aa": math.nan,
                         "rise_time": math.nan, "overshoot": math.nan,
                         "status": "fell"})
            continue
        rise, overshoot = _stage_response(trace, stage=1)
        rows.append({"kappa": float(kappa),
                     "A_aa": average_angular_accel(trace),
                     "rise_time": rise, "overshoot": overshoot,
                     "status": "ok"})
    return rows


def _stage_response(trace, stage: int = 1):
    """Rise time to 90% of stage-steady velocity, and relative overshoot."""
    idx = np.where(trace.stage_index == stage)[0]
    if len(idx) < 10:
        return math.nan, math.nan
    xd = trace.x_dot[idx]
    t = trace.t[idx]
    steady = float(xd[-max(1, len(xd) // 5):].mean())
    if abs(steady) < 1e-9:
        return math.nan, math.nan
    above = np.where(xd >= 0.9 * steady)[0]
    rise = float(t[above[0]] - t[0]) if len(above) else math.nan
    overshoot = max(0.0, (float(xd.max()) - steady) / abs(steady))
    return rise, overshoot


def divergence_probe(kappa: float, params: CouplingParams | None = None,
                     theta0: float = 0.05, horizon_s: float = 20.0,
                     dt: float = 1e-3) -> bool:
    """True when a zero-force run from a small lean diverges (under-stiff spring)."""
    from .coupling import CouplingState, step
    params = params or CouplingParams()
    p = CouplingParams(m=params.m, M=params.M, l=params.l, g=params.g,
                       h_max=params.h_max, kappa=float(kappa), k_c=params.k_c,
                       k_d=params.k_d, k_2=params.k_2, k_3=params.k_3)
    state = CouplingState(theta=theta0)
    try:
        for _ in range(int(horizon_s / dt)):
            state = step(state, 0.0, p, dt)
    except PendulumFell:
        return True
    return abs(state.theta) > abs(theta0)
