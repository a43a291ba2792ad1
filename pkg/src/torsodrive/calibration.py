"""Per-user calibration: zero offsets, sensor weights, posture boundaries.

The posture recording protocol is a set of labeled dwells (the rider holds
each drive posture at full intended speed). From it we recover per-sensor
weights alpha_i (so every sensor saturates at the same normalized value
``p_max``), the reference COPs delta_1..delta_5, their midpoint boundaries
beta_1..beta_4, the per-posture bending budgets, and the quadratic gain
curve used to scale the forward bending budget with COP.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, ConfigurationError, InsufficientDataError
from .sensing import (
    CATEGORY_ORDER,
    EPS_CONTACT,
    CircuitParams,
    PostureCategory,
    SensorFrame,
    SensorLayout,
    to_conductance,
)

K_GAIN_MIN = 0.3
K_GAIN_MAX = 1.5


@dataclass(frozen=True)
class CalibrationProfile:
    """Immutable per-user calibration result."""

    zero_offsets: tuple[float, ...]
    alpha: tuple[float, ...]
    p_max: float
    beta: tuple[float, float, float, float]
    delta_ref: tuple[float, float, float, float, float]
    f1_coeffs: tuple[float, float, float]
    theta_fm_per_posture: tuple[float, float, float, float, float]
    theta_b_offset_deg: float = 0.0
    layout: SensorLayout = field(default_factory=SensorLayout)
    alpha_fallback: tuple[bool, ...] = ()

    def __post_init__(self):
        if len(self.zero_offsets) != self.layout.n or len(self.alpha) != self.layout.n:
            raise ConfigurationError("offsets/alpha length must match layout")
        if any(a <= 0 for a in self.alpha):
            raise ConfigurationError("alpha weights must be positive")
        if not all(b1 < b2 for b1, b2 in zip(self.beta, self.beta[1:])):
            raise ConfigurationError("beta boundaries must be strictly increasing")
        if not all(d1 < d2 for d1, d2 in zip(self.delta_ref, self.delta_ref[1:])):
            raise ConfigurationError("delta references must be strictly increasing")
        for d in self.delta_ref:
            if eval_f1(d, self.f1_coeffs) <= 0:
                raise ConfigurationError("gain curve must be positive at reference COPs")
        if not self.alpha_fallback:
            object.__setattr__(self, "alpha_fallback", (False,) * self.layout.n)

    @classmethod
    def default(cls, layout: SensorLayout | None = None,
                theta_fm_default: float = 25.0) -> "CalibrationProfile":
        """Uncalibrated profile: unit weights, evenly spread posture references."""
        layout = layout or SensorLayout()
        n = layout.n
        delta = (-0.8, -0.4, 0.0, 0.4, 0.8)
        return cls(
            zero_offsets=(0.0,) * n,
            alpha=(1.0,) * n,
            p_max=1.0,
            beta=midpoint_boundaries(delta),
            delta_ref=delta,
            f1_coeffs=(0.0, 0.0, 1.0),
            theta_fm_per_posture=(theta_fm_default,) * 5,
            layout=layout,
        )

    def to_json_dict(self) -> dict:
        return {
            "zero_offsets": list(self.zero_offsets),
            "alpha": list(self.alpha),
            "p_max": self.p_max,
            "beta": list(self.beta),
            "delta_ref": list(self.delta_ref),
            "f1_coeffs": list(self.f1_coeffs),
            "theta_fm_per_posture": list(self.theta_fm_per_posture),
            "theta_b_offset_deg": self.theta_b_offset_deg,
            "layout": {"positions": list(self.layout.positions),
                       "sensor_pitch_m": self.layout.sensor_pitch_m},
            "alpha_fallback": list(self.alpha_fallback),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CalibrationProfile":
        layout = SensorLayout(positions=tuple(d["layout"]["positions"]),
                              sensor_pitch_m=d["layout"].get("sensor_pitch_m", 0.044))
        return cls(
            zero_offsets=tuple(d["zero_offsets"]),
            alpha=tuple(d["alpha"]),
            p_max=float(d["p_max"]),
            beta=tuple(d["beta"]),
            delta_ref=tuple(d["delta_ref"]),
            f1_coeffs=tuple(d["f1_coeffs"]),
            theta_fm_per_posture=tuple(d["theta_fm_per_posture"]),
            theta_b_offset_deg=float(d.get("theta_b_offset_deg", 0.0)),
            layout=layout,
            alpha_fallback=tuple(d.get("alpha_fallback", ())),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "CalibrationProfile":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def midpoint_boundaries(delta_ref) -> tuple[float, float, float, float]:
    """Posture boundaries as consecutive midpoints of the reference COPs."""
    d = list(delta_ref)
    return tuple((d[i] + d[i + 1]) / 2.0 for i in range(4))


def eval_f1(delta: float, f1_coeffs, k_min: float = K_GAIN_MIN,
            k_max: float = K_GAIN_MAX) -> float:
    """Evaluate the quadratic bending-budget gain, clamped to [k_min, k_max].

    Coefficients are highest-degree first (numpy.polyval convention); the
    clamp keeps extrapolation far outside the calibrated COP range benign.
    """
    val = float(np.polyval(np.asarray(f1_coeffs, dtype=float), delta))
    return min(max(val, k_min), k_max)


def fit_f1(delta_ref, k_fm) -> tuple[float, float, float]:
    """Least-squares quadratic through the five (COP, gain) calibration points."""
    coeffs = np.polyfit(np.asarray(delta_ref, float), np.asarray(k_fm, float), 2)
    return tuple(float(c) for c in coeffs)


def apply_profile(frame: SensorFrame, profile: CalibrationProfile,
                  circuit: CircuitParams = CircuitParams()):
    """Convert a raw frame to calibrated conductances and a zeroed bending angle.

    Chain: ADC -> normalized conductance -> subtract per-sensor zero offset
    (clamped at 0) -> multiply by alpha. Returns ``(lam, theta_b_deg)``.
    """
    lam = to_conductance(np.asarray(frame.raw, dtype=float), circuit)
    lam = np.clip(lam - np.asarray(profile.zero_offsets), 0.0, None)
    lam = lam * np.asarray(profile.alpha)
    return lam, frame.theta_b_deg - profile.theta_b_offset_deg


def calibrate_neutral(frames, sample_rate: float = 50.0,
                      min_duration_s: float = 2.0,
                      circuit: CircuitParams = CircuitParams()):
    """Mean resting conductance per sensor plus the neutral bending angle.

    Returns ``(zero_offsets, theta_b_offset_deg)``. Requires at least
    ``min_duration_s`` worth of samples at the declared rate.
    """
    if len(frames) < int(min_duration_s * sample_rate):
        raise InsufficientDataError(
            f"neutral calibration needs >= {min_duration_s}s of samples "
            f"({int(min_duration_s * sample_rate)} at {sample_rate} Hz), got {len(frames)}")
    lam = np.array([to_conductance(np.asarray(f.raw, float), circuit) for f in frames])
    offsets = tuple(float(v) for v in lam.mean(axis=0))
    theta_off = float(np.mean([f.theta_b_deg for f in frames]))
    return offsets, theta_off


@dataclass
class PostureDwell:
    """One labeled hold of a drive posture during the calibration protocol."""

    category: PostureCategory
    frames: list[SensorFrame]


def calibrate_postures(dwells, theta_fm_default: float = 25.0, *,
                       layout: SensorLayout | None = None,
                       circuit: CircuitParams = CircuitParams(),
                       zero_offsets=None, theta_b_offset_deg: float = 0.0,
                       sample_rate: float = 50.0, min_dwell_s: float = 3.0,
                       p_max: float = 1.0, top_fraction: float = 0.1,
                       activation_eps: float = EPS_CONTACT,
                       literal_gain_eq: bool = False) -> CalibrationProfile:
    """Build a profile from labeled posture dwells.

    Sensor weights come from the top-decile mean of each sensor across the
    whole recording (alpha_i = p_max / mean); reference COPs from the
    alpha-scaled dwell means; boundaries as midpoints; bending budgets as the
    per-posture dwell mean of theta_b. ``literal_gain_eq`` stores the
    reciprocal gain (budget_default / budget_i) instead of the
    self-consistent budget_i / budget_default.
    """
    layout = layout or SensorLayout()
    n = layout.n
    zero = np.zeros(n) if zero_offsets is None else np.asarray(zero_offsets, float)

    by_cat: dict[PostureCategory, list[np.ndarray]] = {c: [] for c in CATEGORY_ORDER}
    thetas: dict[PostureCategory, list[float]] = {c: [] for c in CATEGORY_ORDER}
    min_samples = int(min_dwell_s * sample_rate)
    for dwell in dwells:
        if dwell.category not in by_cat:
            raise CalibrationError(f"unknown posture label {dwell.category!r}")
        if len(dwell.frames) < min_samples:
            raise CalibrationError(
                f"dwell for {dwell.category.value} too short: "
                f"{len(dwell.frames)} < {min_samples} samples")
        lam = np.array([np.clip(to_conductance(np.asarray(f.raw, float), circuit) - zero, 0, None)
                        for f in dwell.frames])
        by_cat[dwell.category].append(lam)
        thetas[dwell.category].extend(f.theta_b_deg - theta_b_offset_deg for f in dwell.frames)

    missing = [c.value for c in CATEGORY_ORDER if not by_cat[c]]
    if missing:
        raise CalibrationError(f"recording is missing postures: {missing}")

    all_lam = np.vstack([lam for group in by_cat.values() for lam in group])

    # Top-decile mean per sensor over the full recording.
    k = max(1, int(round(top_fraction * all_lam.shape[0])))
    lam_bar = np.sort(all_lam, axis=0)[-k:, :].mean(axis=0)

    alpha = np.ones(n)
    fallback = lam_bar < activation_eps
    active = ~fallback
    alpha[active] = p_max / lam_bar[active]

    s = np.asarray(layout.positions)
    delta_ref = []
    theta_fm = []
    for cat in CATEGORY_ORDER:
        lam_cat = np.vstack(by_cat[cat]) * alpha
        weights = lam_cat.sum(axis=1)
        ok = weights > activation_eps
        if not np.any(ok):
            raise CalibrationError(f"no sensor contact during {cat.value} dwell")
        cops = (lam_cat[ok] @ s) / weights[ok]
        delta_ref.append(float(cops.mean()))
        theta_fm.append(float(np.mean(thetas[cat])))

    if not all(a < b for a, b in zip(delta_ref, delta_ref[1:])):
        raise CalibrationError(f"posture COPs are not separable: {delta_ref}")

    if literal_gain_eq:
        k_fm = [theta_fm_default / t for t in theta_fm]
    else:
        k_fm = [t / theta_fm_default for t in theta_fm]

    return CalibrationProfile(
        zero_offsets=tuple(float(z) for z in zero),
        alpha=tuple(float(a) for a in alpha),
        p_max=p_max,
        beta=midpoint_boundaries(delta_ref),
        delta_ref=tuple(delta_ref),
        f1_coeffs=fit_f1(delta_ref, k_fm),
        theta_fm_per_posture=tuple(theta_fm),
        theta_b_offset_deg=theta_b_offset_deg,
        layout=layout,
        alpha_fallback=tuple(bool(b) for b in fallback),
    )


def split_labeled_dwells(frames) -> tuple[list[SensorFrame], list[PostureDwell]]:
    """Split a labeled recording into neutral frames and posture dwells.

    Consecutive frames with the same label form one dwell; ``neutral`` (or
    missing) labels collect into the neutral segment.
    """
    labels = {c.value: c for c in PostureCategory}
    neutral: list[SensorFrame] = []
    dwells: list[PostureDwell] = []
    current: PostureDwell | None = None
    for fr in frames:
        lab = fr.label or "neutral"
        if lab == "neutral":
            current = None
            neutral.append(fr)
            continue
        if lab not in labels:
            raise CalibrationError(f"unknown frame label {lab!r}")
        cat = labels[lab]
        if current is None or current.category is not cat:
            current = PostureDwell(category=cat, frames=[])
            dwells.append(current)
        current.frames.append(fr)
    return neutral, dwells


def calibrate_recording(frames, theta_fm_default: float = 25.0, *,
                        layout: SensorLayout | None = None,
                        circuit: CircuitParams = CircuitParams(),
                        sample_rate: float = 50.0) -> CalibrationProfile:
    """Full calibration from one labeled recording (neutral + posture dwells)."""
    neutral, dwells = split_labeled_dwells(frames)
    if neutral:
        zero, theta_off = calibrate_neutral(neutral, sample_rate=sample_rate, circuit=circuit)
    else:
        zero, theta_off = None, 0.0
    return calibrate_postures(dwells, theta_fm_default, layout=layout, circuit=circuit,
                              zero_offsets=zero, theta_b_offset_deg=theta_off,
                              sample_rate=sample_rate)
