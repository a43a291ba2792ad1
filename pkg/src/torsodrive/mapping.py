"""Two-layer mapping from pointer space (P, delta) to robot motion (v, w).

Bending angle sets the speed magnitude through a parabolic ramp between a
dead zone and a posture-dependent maximum; COP sets the linear/angular
weight split through sinusoid blends between the posture boundaries. A
first-order derivative filter smooths the final command.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from enum import Enum

import numpy as np

from .calibration import CalibrationProfile, apply_profile, eval_f1
from .errors import ConfigurationError, InputError
from .sensing import CircuitParams, SensorFrame, classify_posture, compute_cop


@dataclass
class MappingParams:
    """Thresholds (degrees), weights and limits of the velocity mapping.

    ``rho`` is the share of the half-parabola used for the ramp (shape
    ratio), ``w_v_back`` the fixed backward linear weight, ``k_v_d``/``k_w_d``
    the derivative smoothing coefficients.
    """

    theta_ft: float = 3.0
    theta_fm_default: float = 25.0
    theta_fst: float = 40.0
    theta_bt: float = -3.0
    theta_bm: float = -15.0
    theta_bst: float = -25.0
    rho: float = 0.75
    w_v_back: float = -0.8
    v_max: float = 1.0
    w_max: float = 1.0
    k_v_d: float = -0.9
    k_w_d: float = -0.9
    k_min_gain: float = 0.3
    k_max_gain: float = 1.5
    eps_contact: float = 0.02
    literal_eq12: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (self.theta_bst < self.theta_bm < self.theta_bt < 0
                < self.theta_ft < self.theta_fm_default < self.theta_fst):
            raise ConfigurationError("bending thresholds must be ordered "
                                     "bst < bm < bt < 0 < ft < fm < fst")
        if not (0 < self.rho < 2):
            raise ConfigurationError("rho must be in (0, 2)")
        if not (-1 <= self.w_v_back < 0):
            raise ConfigurationError("w_v_back must be in [-1, 0)")
        if self.v_max <= 0 or self.w_max <= 0:
            raise ConfigurationError("velocity limits must be positive")
        if not (-1 <= self.k_v_d <= 0 and -1 <= self.k_w_d <= 0):
            raise ConfigurationError("smoothing coefficients must be in [-1, 0]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MappingParams":
        return cls(**d)


class BendRegion(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    DEAD = "dead"
    SAFETY = "safety"


class Gate(Enum):
    NORMAL = "normal"
    SAFETY_STOP = "safety_stop"
    NO_CONTACT = "no_contact"


@dataclass(frozen=True)
class VelocityCommand:
    v: float
    w: float
    gate: Gate = Gate.NORMAL

    @classmethod
    def zero(cls, gate: Gate = Gate.NORMAL) -> "VelocityCommand":
        return cls(0.0, 0.0, gate)


def _ramp(theta_b: float, theta_t: float, theta_m: float, rho: float) -> float:
    """Parabolic speed ramp: 0 at the threshold, 1 at the maximum angle.

    The parabola's vertex sits a fraction ``rho`` past the [t, m] span so the
    low-speed end gets the shallow gradient.
    """
    p_m = (theta_m - theta_t) / rho
    theta_o = p_m + theta_t
    k_n = 1.0 / (p_m * p_m)
    k_amp = 1.0 / (rho * (2.0 - rho))
    return k_amp * (1.0 - k_n * (theta_b - theta_o) ** 2)


def magnitude(theta_b: float, theta_fm: float, params: MappingParams):
    """Velocity magnitude P in [0, 1] plus the bend region it came from.

    Dead zone between the backward and forward thresholds; parabolic ramp up
    to the maximum angle; saturation at 1 between maximum and the safety
    threshold; SAFETY (P = 0) at and beyond the safety thresholds.
    """
    if theta_fm <= params.theta_ft:
        raise ConfigurationError("theta_fm must exceed the forward threshold")
    if theta_fm > params.theta_fst:
        raise ConfigurationError("theta_fm must not exceed the safety threshold")
    if theta_b >= params.theta_fst or theta_b <= params.theta_bst:
        return 0.0, BendRegion.SAFETY
    if params.theta_bt <= theta_b <= params.theta_ft:
        return 0.0, BendRegion.DEAD
    if theta_b > params.theta_ft:
        if theta_b >= theta_fm:
            return 1.0, BendRegion.FORWARD
        p = _ramp(theta_b, params.theta_ft, theta_fm, params.rho)
        return min(max(p, 0.0), 1.0), BendRegion.FORWARD
    if theta_b <= params.theta_bm:
        return 1.0, BendRegion.BACKWARD
    p = _ramp(theta_b, params.theta_bt, params.theta_bm, params.rho)
    return min(max(p, 0.0), 1.0), BendRegion.BACKWARD


def forward_max_angle(delta: float, profile: CalibrationProfile,
                      params: MappingParams) -> float:
    """Posture-dependent forward bending budget in degrees.

    Quadratic gain over COP (clamped to [k_min_gain, k_max_gain]) times the
    default budget, kept strictly below the safety threshold.
    """
    k = eval_f1(delta, profile.f1_coeffs, params.k_min_gain, params.k_max_gain)
    return min(k * params.theta_fm_default, 0.999 * params.theta_fst)


def _h1(delta: float, bi: float, bj: float) -> float:
    return 0.5 * np.sin(np.pi / (bi - bj) * (delta - bj) + np.pi / 2.0)


def _h2(delta: float, bi: float, bj: float) -> float:
    return 0.5 * np.sin(np.pi / (bi - bj) * (delta - bi) + np.pi / 2.0)


def weights(delta: float, beta, literal_eq12: bool = False):
    """Linear/angular weight split (W_v in [0,1], W_w in [-1,1]) from COP.

    Sinusoid blends on the turn intervals, full-forward plateau between
    beta_2 and beta_3, spin saturation outside beta_1/beta_4. The blends are
    continuous everywhere and flat at the plateau junctions.
    ``literal_eq12`` switches the right-turn angular branch to the printed
    form, which jumps by 1 at beta_3.
    """
    b1, b2, b3, b4 = beta
    if not (b1 < b2 < b3 < b4):
        raise ConfigurationError("posture boundaries must be strictly increasing")
    if delta < b1:
        return 0.0, -1.0
    if delta < b2:
        return 0.5 + _h1(delta, b1, b2), -0.5 - _h2(delta, b1, b2)
    if delta < b3:
        return 1.0, 0.0
    if delta < b4:
        w_v = 0.5 - _h1(delta, b3, b4)
        if literal_eq12:
            return w_v, 0.5 + _h2(delta, b3, b4)
        return w_v, 0.5 - _h2(delta, b3, b4)
    return 0.0, 1.0


def command(p: float, region: BendRegion, delta: float | None,
            profile: CalibrationProfile, params: MappingParams) -> VelocityCommand:
    """Pre-smoothing velocity command from magnitude, bend region and COP."""
    if not (0.0 <= p <= 1.0):
        raise InputError("magnitude must be in [0, 1]")
    if region is BendRegion.SAFETY:
        return VelocityCommand.zero(Gate.SAFETY_STOP)
    if delta is None:
        return VelocityCommand.zero(Gate.NO_CONTACT)
    if region is BendRegion.DEAD:
        return VelocityCommand.zero()
    if region is BendRegion.BACKWARD:
        return VelocityCommand(params.v_max * p * params.w_v_back, 0.0)
    w_v, w_w = weights(delta, profile.beta, params.literal_eq12)
    return VelocityCommand(params.v_max * p * w_v, params.w_max * p * w_w)


def smooth(cmd: VelocityCommand, prev: VelocityCommand, dt: float,
           params: MappingParams) -> VelocityCommand:
    """Derivative smoothing: v' = v + k_d * (v - v'_prev); one-pole low-pass.

    With k_d = -0.9 each tick keeps 90% of the previous output. Non-normal
    gates bypass the filter (immediate zero).
    """
    if dt <= 0:
        raise InputError("dt must be positive")
    if cmd.gate is not Gate.NORMAL:
        return cmd
    v = (1.0 + params.k_v_d) * cmd.v - params.k_v_d * prev.v
    w = (1.0 + params.k_w_d) * cmd.w - params.k_w_d * prev.w
    return VelocityCommand(v, w)


def pipeline_tick(frame: SensorFrame, profile: CalibrationProfile,
                  params: MappingParams, prev_cmd: VelocityCommand,
                  circuit: CircuitParams = CircuitParams()):
    """One full sensing-to-command step.

    Returns ``(cmd, info)`` where ``info`` carries the intermediate pointer
    state for telemetry: lam, theta_b, cop, p, region, category.
    """
    lam, theta_b = apply_profile(frame, profile, circuit)

    # Safety gating first: an over-bend must stop the device even with no
    # pressure contact.
    if theta_b >= params.theta_fst or theta_b <= params.theta_bst:
        cmd = VelocityCommand.zero(Gate.SAFETY_STOP)
        return cmd, _TickInfo(lam, theta_b, None, 0.0, BendRegion.SAFETY, None)

    delta = compute_cop(lam, profile.layout, params.eps_contact)
    if delta is None:
        cmd = VelocityCommand.zero(Gate.NO_CONTACT)
        return cmd, _TickInfo(lam, theta_b, None, 0.0, BendRegion.DEAD, None)

    theta_fm = forward_max_angle(delta, profile, params)
    p, region = magnitude(theta_b, theta_fm, params)
    cmd = command(p, region, delta, profile, params)
    cmd = smooth(cmd, prev_cmd, 1.0, params)  # pole is dt-independent
    category = classify_posture(delta, profile.beta)
    return cmd, _TickInfo(lam, theta_b, delta, p, region, category)


@dataclass
class _TickInfo:
    lam: np.ndarray
    theta_b: float
    cop: float | None
    p: float
    region: BendRegion
    category: object | None


class PipelineSession:
    """Stateful wrapper holding the smoothing filter state across ticks.

    One session must not be ticked concurrently; independent sessions are
    fine.
    """

    def __init__(self, profile: CalibrationProfile, params: MappingParams,
                 circuit: CircuitParams = CircuitParams()):
        self.profile = profile
        self.params = params
        self.circuit = circuit
        self.prev_cmd = VelocityCommand.zero()
        self.last_info: _TickInfo | None = None

    def tick(self, frame: SensorFrame) -> VelocityCommand:
        cmd, info = pipeline_tick(frame, self.profile, self.params,
                                  self.prev_cmd, self.circuit)
        self.prev_cmd = cmd
        self.last_info = info
        return cmd

    def reset(self):
        self.prev_cmd = VelocityCommand.zero()
        self.last_info = None
