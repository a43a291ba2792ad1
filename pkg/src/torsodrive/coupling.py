"""Cart / inverted-pendulum model of the rider-device coupling.

The rider's upper body is a pendulum on the device cart, coupled through a
spring-damper at the support pad. Used to pick the compliant-segment
stiffness: simulate a staged push profile, score vibration by the mean
absolute angular acceleration, and find the minimum stiffness that holds
the upper body up.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError, PendulumFell


@dataclass
class CouplingParams:
    """Model constants. ``kappa`` is the spring stiffness in N/m."""

    m: float = 32.7        # upper-body (pendulum) mass, kg
    M: float = 75.0        # cart mass (device + lower body), kg
    l: float = 0.25        # pendulum length, m
    g: float = 10.0        # gravity, m/s^2
    h_max: float = 33.65   # maximum rider push force, N
    kappa: float = 2000.0  # spring coefficient, N/m
    k_c: float = 30.0      # damper coefficient, N*s/m
    k_d: float = 1.0       # cart friction coefficient
    k_2: float = 0.02      # force -> velocity reference gain
    k_3: float = 100.0     # velocity tracking gain

    def __post_init__(self):
        if min(self.m, self.M, self.l, self.g, self.kappa) <= 0:
            raise ConfigurationError("masses, length, g and kappa must be positive")
        if self.k_c < 0 or self.k_d < 0:
            raise ConfigurationError("damping coefficients must be >= 0")


@dataclass
class CouplingState:
    x: float = 0.0
    x_dot: float = 0.0
    theta: float = 0.0
    theta_dot: float = 0.0
    t: float = 0.0


def derivatives(state: CouplingState, h: float, u: float,
                params: CouplingParams):
    """Accelerations (x_ddot, theta_ddot) for rider torque h*l and drive force u.

    Lagrangian model with the torso leaning onto the support pad in the
    drive direction (pendulum mass at x + l*sin(theta)):

        T = (m+M)/2 x_dot^2 + m l^2/2 theta_dot^2 + m l theta_dot x_dot cos(theta)
        V = m g l cos(theta) + kappa (l sin(theta))^2 / 2
        Q_x = u - k_d x_dot
        Q_theta = h l - k_c l^2 cos(theta) theta_dot

    This orientation makes cart acceleration pitch the torso back off the
    pad, which is what keeps the force-tracking loop stable. Valid for
    |theta| < pi/2; beyond that the model aborts with ``PendulumFell``.
    """
    th = state.theta
    if abs(th) >= math.pi / 2:
        raise PendulumFell(state.t, th)
    p = params
    sin_t = math.sin(th)
    cos_t = math.cos(th)
    denom = p.M + p.m * sin_t * sin_t
    x_dd = (-p.m * p.g * sin_t * cos_t
            + p.kappa * p.l * sin_t * cos_t * cos_t
            + p.m * p.l * state.theta_dot ** 2 * sin_t
            + p.k_c * p.l * cos_t * cos_t * state.theta_dot
            - h * cos_t + u - p.k_d * state.x_dot) / denom
    th_dd = ((-x_dd * cos_t + p.g * sin_t) / p.l
             - (p.kappa * sin_t * cos_t + p.k_c * cos_t * state.theta_dot) / p.m
             + h / (p.m * p.l))
    return x_dd, th_dd


def contact_force(state: CouplingState, params: CouplingParams) -> float:
    """Spring + damper force at the support pad, clamped at zero.

    The torso can push on the pad but the pad cannot pull, so negative
    sums read as contact loss.
    """
    f = (params.kappa * params.l * math.sin(state.theta)
         + params.k_c * params.l * math.cos(state.theta) * state.theta_dot)
    return max(f, 0.0)


def controllers(f_c: float, x_dot: float, params: CouplingParams):
    """Proportional high/low-level controllers: (v_ref, u)."""
    v_ref = params.k_2 * f_c
    u = params.k_3 * (v_ref - x_dot)
    return v_ref, u


def energy(state: CouplingState, params: CouplingParams) -> float:
    """Total mechanical energy (kinetic + gravity + spring potential)."""
    p = params
    sin_t = math.sin(state.theta)
    cos_t = math.cos(state.theta)
    kinetic = (0.5 * (p.m + p.M) * state.x_dot ** 2
               + 0.5 * p.m * p.l ** 2 * state.theta_dot ** 2
               + p.m * p.l * state.theta_dot * state.x_dot * cos_t)
    potential = p.m * p.g * p.l * cos_t + 0.5 * p.kappa * (p.l * sin_t) ** 2
    return kinetic + potential


def step(state: CouplingState, h: float, params: CouplingParams,
         dt: float, u: float | None = None) -> CouplingState:
    """One RK4 step with the drive force held over the step (zero-order hold).

    ``u`` defaults to the controller output evaluated at the step start.
    """
    if not (0.0 < dt <= 0.01):
        raise InputError("dt must be in (0, 0.01] s")
    if u is None:
        _, u = controllers(contact_force(state, params), state.x_dot, params)

    def f(x, xd, th, thd):
        s = CouplingState(x, xd, th, thd, state.t)
        xdd, thdd = derivatives(s, h, u, params)
        return xd, xdd, thd, thdd

    y = (state.x, state.x_dot, state.theta, state.theta_dot)
    k1 = f(*y)
    k2 = f(*(y[i] + 0.5 * dt * k1[i] for i in range(4)))
    k3 = f(*(y[i] + 0.5 * dt * k2[i] for i in range(4)))
    k4 = f(*(y[i] + dt * k3[i] for i in range(4)))
    out = tuple(y[i] + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
                for i in range(4))
    return CouplingState(out[0], out[1], out[2], out[3], state.t + dt)


@dataclass
class ForceProfile:
    """Staged rider-push schedule: ordered (force N, duration s) pairs."""

    stages: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.stages:
            raise ConfigurationError("force profile needs at least one stage")
        for force, duration in self.stages:
            if duration <= 0:
                raise ConfigurationError("stage durations must be positive")
            if force < 0:
                raise ConfigurationError("stage forces must be >= 0")

    def validate_against(self, params: CouplingParams):
        for force, _ in self.stages:
            if force > params.h_max:
                raise ConfigurationError(
                    f"stage force {force} exceeds h_max={params.h_max}")

    @property
    def duration(self) -> float:
        return sum(d for _, d in self.stages)

    @classmethod
    def staged_default(cls, params: CouplingParams, stage_s: float = 10.0,
                       levels: int = 5) -> "ForceProfile":
        """0 up to h_max and back down in h_max/levels increments.

        Peak not repeated: 2*levels + 1 stages (110 s at the defaults).
        """
        steps = list(range(levels + 1)) + list(range(levels - 1, -1, -1))
        return cls(tuple((k * params.h_max / levels, stage_s) for k in steps))


@dataclass
class CouplingTrace:
    """Per-step record of a coupling simulation (values at step starts)."""

    t: np.ndarray
    x: np.ndarray
    x_dot: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    theta_ddot: np.ndarray
    f_c: np.ndarray
    v_ref: np.ndarray
    u: np.ndarray
    h: np.ndarray
    stage_index: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.t)

    def save_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for i in range(len(self.t)):
                f.write(json.dumps({
                    "t": round(float(self.t[i]), 9),
                    "x": float(self.x[i]), "x_dot": float(self.x_dot[i]),
                    "theta": float(self.theta[i]), "theta_dot": float(self.theta_dot[i]),
                    "F_c": float(self.f_c[i]), "v_ref": float(self.v_ref[i]),
                    "u": float(self.u[i]), "h": float(self.h[i]),
                }) + "\n")


def simulate(profile: ForceProfile, params: CouplingParams,
             dt: float = 1e-3) -> CouplingTrace:
    """Fixed-step run of the staged-force scenario; deterministic.

    The drive force is re-evaluated once per step (zero-order hold) and the
    recorded angular acceleration is the derivative evaluation at the step
    start, not a finite difference.
    """
    profile.validate_against(params)
    counts = [max(1, int(round(d / dt))) for _, d in profile.stages]
    n_total = sum(counts)
    cols = {name: np.empty(n_total) for name in
            ("t", "x", "x_dot", "theta", "theta_dot", "theta_ddot",
             "f_c", "v_ref", "u", "h")}
    stage_idx = np.empty(n_total, dtype=int)

    state = CouplingState()
    i = 0
    for si, ((force, _), n_steps) in enumerate(zip(profile.stages, counts)):
        for _ in range(n_steps):
            f_c = contact_force(state, params)
            v_ref, u = controllers(f_c, state.x_dot, params)
            _, th_dd = derivatives(state, force, u, params)
            cols["t"][i] = state.t
            cols["x"][i] = state.x
            cols["x_dot"][i] = state.x_dot
            cols["theta"][i] = state.theta
            cols["theta_dot"][i] = state.theta_dot
            cols["theta_ddot"][i] = th_dd
            cols["f_c"][i] = f_c
            cols["v_ref"][i] = v_ref
            cols["u"][i] = u
            cols["h"][i] = force
            stage_idx[i] = si
            i += 1
            state = step(state, force, params, dt, u=u)
    return CouplingTrace(stage_index=stage_idx, **cols)


def average_angular_accel(trace: CouplingTrace) -> float:
    """Mean absolute angular acceleration over the trace (vibration proxy)."""
    if len(trace) == 0:
        raise InputError("empty trace")
    return float(np.mean(np.abs(trace.theta_ddot)))


def min_stiffness(params: CouplingParams) -> float:
    """Minimum spring stiffness that statically supports the upper body.

    Torque balance about the hip as theta -> 0: kappa * l >= m * g, so
    kappa_min = m * g / l.
    """
    return params.m * params.g / params.l


def _returns_upright(kappa: float, params: CouplingParams, theta0: float,
                     horizon_s: float, dt: float) -> bool:
    """Does the coupled system pull a small initial lean back toward upright?

    Near the support threshold the divergence is slow, so compare the lean
    at the horizon against the lean at half the horizon (after the fast
    transient has died) instead of against the initial value.
    """
    p = CouplingParams(m=params.m, M=params.M, l=params.l, g=params.g,
                       h_max=params.h_max, kappa=kappa, k_c=params.k_c,
                       k_d=params.k_d, k_2=params.k_2, k_3=params.k_3)
    state = CouplingState(theta=theta0)
    n = int(round(horizon_s / dt))
    theta_mid = theta0
    try:
        for i in range(n):
            state = step(state, 0.0, p, dt)
            if i == n // 2:
                theta_mid = state.theta
    except PendulumFell:
        return False
    return abs(state.theta) < abs(theta_mid)


def min_stiffness_bisection(params: CouplingParams, lo: float = 900.0,
                            hi: float = 2000.0, rel_tol: float = 0.005,
                            theta0: float = 0.01, horizon_s: float = 40.0,
                            dt: float = 0.002) -> float:
    """Simulation oracle for :func:`min_stiffness`.

    Bisect the stiffness between a diverging and a recovering run of the
    zero-force scenario started from a small lean.
    """
    if _returns_upright(lo, params, theta0, horizon_s, dt):
        raise InputError(f"lower bracket {lo} already supports the body")
    if not _returns_upright(hi, params, theta0, horizon_s, dt):
        raise InputError(f"upper bracket {hi} does not support the body")
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _returns_upright(mid, params, theta0, horizon_s, dt):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SupportGeometry:
    """Two-bar support linkage: upper bar r1, lower bar r2, rest angle between."""

    r1: float = 0.35
    r2: float = 0.25
    alpha_rest: float = math.radians(150.0)

    def __post_init__(self):
        if self.r1 <= 0 or self.r2 <= 0:
            raise ConfigurationError("bar lengths must be positive")
        if not (0 < self.alpha_rest < math.pi):
            raise ConfigurationError("rest angle must be in (0, pi)")


def support_kinematics(theta_b: float, geom: SupportGeometry = SupportGeometry()):
    """Contact distance r3 and torso angle theta for a bar bending angle.

    Law of cosines across the linkage triangle; the torso angle is the
    change of the hip-corner angle from the rest configuration. Angles in
    radians.
    """
    ang = geom.alpha_rest + theta_b
    if not (0 < ang < math.pi):
        raise InputError("alpha_rest + theta_b outside (0, pi)")
    r1, r2 = geom.r1, geom.r2
    r3 = math.sqrt(r1 * r1 + r2 * r2 - 2 * r1 * r2 * math.cos(ang))
    r3_rest = math.sqrt(r1 * r1 + r2 * r2 - 2 * r1 * r2 * math.cos(geom.alpha_rest))
    theta = (math.asin(r1 * math.sin(geom.alpha_rest) / r3_rest)
             + math.asin(-r1 * math.sin(ang) / r3))
    return r3, theta


def support_force_curve(theta_b_grid, geom: SupportGeometry = SupportGeometry(), *,
                        upper_body_mass_kg: float | None = None,
                        total_mass_kg: float | None = None,
                        g: float = 10.0) -> np.ndarray:
    """Quasi-static support force F_d = m g sin(theta) over a bend-angle range.

    Upper-body mass defaults to 54.5% of ``total_mass_kg`` when only the
    total is given, and to the model default (32.7 kg) when neither is.
    Returns an (N, 2) array of (theta_b, F_d) rows; angles in radians.
    """
    if upper_body_mass_kg is None:
        upper_body_mass_kg = 0.545 * total_mass_kg if total_mass_kg is not None else 32.7
    rows = []
    for tb in np.asarray(theta_b_grid, dtype=float):
        _, theta = support_kinematics(float(tb), geom)
        rows.append((float(tb), upper_body_mass_kg * g * math.sin(theta)))
    return np.asarray(rows)
