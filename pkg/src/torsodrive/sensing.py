"""Pressure-array and bending-angle sensing primitives.

Raw FSR readings are converted to normalized conductances, combined into a
center of pressure (COP) along the sensor arc, and classified into the five
drive postures. Per-user scaling lives in :mod:`torsodrive.calibration`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError, InputError

# Normalized conductance below which a sensor is treated as untouched.
EPS_CONTACT = 0.02


@dataclass(frozen=True)
class SensorLayout:
    """Geometry of the FSR strip along the waistline.

    ``positions`` are normalized sensor locations in [-1, 1], strictly
    increasing. The default is five evenly spread sensors (4 cm pads with
    4 mm gaps, ~21.6 cm of coverage).
    """

    positions: tuple[float, ...] = (-1.0, -0.5, 0.0, 0.5, 1.0)
    sensor_pitch_m: float = 0.044

    def __post_init__(self):
        if len(self.positions) < 2:
            raise ConfigurationError("layout needs at least 2 sensors")
        diffs = np.diff(self.positions)
        if not np.all(diffs > 0):
            raise ConfigurationError("sensor positions must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class CircuitParams:
    """Readout circuit: ADC full scale and conversion model.

    ``linear`` assumes a transimpedance-style readout where counts are
    proportional to conductance. ``divider`` models the FSR in a voltage
    divider against ``r_ref_ohm``; both return conductance normalized by
    1/r_ref so downstream thresholds are dimensionless.
    """

    full_scale: float = 4095.0
    r_ref_ohm: float = 10_000.0
    model: str = "linear"

    def __post_init__(self):
        if self.full_scale <= 0:
            raise ConfigurationError("full_scale must be positive")
        if self.model not in ("linear", "divider"):
            raise ConfigurationError(f"unknown circuit model {self.model!r}")


@dataclass
class SensorFrame:
    """One time-stamped sample: raw ADC counts per FSR plus bending angle."""

    t: float
    raw: tuple[float, ...]
    theta_b_deg: float
    label: str | None = field(default=None)

    def __post_init__(self):
        self.raw = tuple(float(r) for r in self.raw)
        if any(r < 0 or not np.isfinite(r) for r in self.raw):
            raise InputError("raw readings must be finite and >= 0")
        if not np.isfinite(self.theta_b_deg):
            raise InputError("theta_b_deg must be finite")

    def to_dict(self) -> dict:
        d = {"t": self.t, "raw": list(self.raw), "theta_b_deg": self.theta_b_deg}
        if self.label is not None:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SensorFrame":
        return cls(t=float(d["t"]), raw=tuple(d["raw"]),
                   theta_b_deg=float(d["theta_b_deg"]), label=d.get("label"))


def load_frames_jsonl(path) -> list[SensorFrame]:
    """Load a recorded sensor stream (one frame per line)."""
    frames = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                frames.append(SensorFrame.from_dict(json.loads(line)))
    return frames


def save_frames_jsonl(frames, path) -> None:
    with open(path, "w") as f:
        for fr in frames:
            f.write(json.dumps(fr.to_dict()) + "\n")


def to_conductance(raw, circuit: CircuitParams = CircuitParams()):
    """Convert raw ADC counts to normalized conductance (>= 0, monotone in raw).

    Accepts a scalar or array. Raises ``InputError`` outside the ADC range.
    """
    arr = np.asarray(raw, dtype=float)
    if np.any(arr < 0) or np.any(arr > circuit.full_scale):
        raise InputError("raw reading outside ADC range")
    if circuit.model == "linear":
        lam = arr / circuit.full_scale
    else:  # divider: G * r_ref = raw / (full_scale - raw)
        if np.any(arr >= circuit.full_scale):
            raise InputError("divider model undefined at full scale")
        lam = arr / (circuit.full_scale - arr)
    if np.isscalar(raw):
        return float(lam)
    return lam


def from_conductance(lam, circuit: CircuitParams = CircuitParams()):
    """Inverse of :func:`to_conductance`; used by the synthetic-frame generators."""
    arr = np.asarray(lam, dtype=float)
    if np.any(arr < 0):
        raise InputError("conductance must be >= 0")
    if circuit.model == "linear":
        raw = arr * circuit.full_scale
    else:
        raw = arr / (1.0 + arr) * circuit.full_scale
    raw = np.clip(raw, 0.0, circuit.full_scale)
    if np.isscalar(lam):
        return float(raw)
    return raw


def compute_cop(lam, layout: SensorLayout = SensorLayout(),
                eps_contact: float = EPS_CONTACT) -> float | None:
    """Center of pressure: conductance-weighted mean of sensor locations.

    Per-user weights are expected to be pre-applied to ``lam`` (see
    ``calibration.apply_profile``). Returns ``None`` when every sensor is
    below the contact threshold (the pipeline treats that as neutral/stop).
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (layout.n,):
        raise InputError(f"expected {layout.n} conductances, got {lam.shape}")
    if np.any(lam < 0):
        raise InputError("conductances must be >= 0")
    if np.max(lam) <= eps_contact:
        return None
    s = np.asarray(layout.positions)
    return float(np.dot(lam, s) / np.sum(lam))


class PostureCategory(Enum):
    """Five drive postures along the COP axis (low delta to high delta)."""

    SPIN_CCW = "spin_ccw"
    TURN_LEFT = "turn_left"
    BEND_FORWARD = "bend_forward"
    TURN_RIGHT = "turn_right"
    SPIN_CW = "spin_cw"


# COP-axis order used by calibration and the synthetic user.
CATEGORY_ORDER = (
    PostureCategory.SPIN_CCW,
    PostureCategory.TURN_LEFT,
    PostureCategory.BEND_FORWARD,
    PostureCategory.TURN_RIGHT,
    PostureCategory.SPIN_CW,
)


def classify_posture(delta: float, beta) -> PostureCategory:
    """Classify a COP value against the four boundaries (half-open intervals).

    delta < b1 -> SPIN_CCW, [b1, b2) -> TURN_LEFT, [b2, b3) -> BEND_FORWARD,
    [b3, b4) -> TURN_RIGHT, >= b4 -> SPIN_CW.
    """
    b1, b2, b3, b4 = beta
    if not (b1 < b2 < b3 < b4):
        raise ConfigurationError("posture boundaries must be strictly increasing")
    if delta < b1:
        return PostureCategory.SPIN_CCW
    if delta < b2:
        return PostureCategory.TURN_LEFT
    if delta < b3:
        return PostureCategory.BEND_FORWARD
    if delta < b4:
        return PostureCategory.TURN_RIGHT
    return PostureCategory.SPIN_CW
