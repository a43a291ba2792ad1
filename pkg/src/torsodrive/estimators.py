"""Scikit-learn style front door for the sensing/mapping pipeline.

``PostureCalibrator`` learns a per-user profile from a labeled recording
(``fit``), ``TorsoVelocityMapper`` turns conductance/bending samples into
velocity commands (``transform``/``predict``). Both follow the estimator
contract (``get_params``/``set_params``, fitted attributes with trailing
underscores) so they compose with sklearn pipelines and model selection.

Sample layout for both estimators: ``X`` is ``(n_samples, n_sensors + 1)``
with normalized conductances in the first ``n_sensors`` columns and the
bending angle in degrees last.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .calibration import CalibrationProfile, PostureDwell, calibrate_postures
from .errors import InputError
from .mapping import MappingParams, PipelineSession
from .sensing import CircuitParams, PostureCategory, SensorFrame, SensorLayout, from_conductance

_LABELS = {c.value: c for c in PostureCategory}


def _check_samples(X, n_sensors: int) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_min_features=2)
    if X.shape[1] != n_sensors + 1:
        raise InputError(
            f"expected {n_sensors} conductance columns plus a bending angle, "
            f"got {X.shape[1]} columns")
    if np.any(X[:, :-1] < 0):
        raise InputError("conductances must be >= 0")
    return X


class PostureCalibrator(BaseEstimator):
    """Learn a :class:`CalibrationProfile` from labeled posture samples.

    ``y`` carries one posture label per row (strings matching
    ``PostureCategory`` values, e.g. ``"turn_left"``). Consecutive equal
    labels form dwells; a ``"neutral"`` label marks resting samples used
    for zero offsets.
    """

    def __init__(self, theta_fm_default: float = 25.0, p_max: float = 1.0,
                 sample_rate: float = 50.0, min_dwell_s: float = 3.0,
                 layout: SensorLayout | None = None):
        self.theta_fm_default = theta_fm_default
        self.p_max = p_max
        self.sample_rate = sample_rate
        self.min_dwell_s = min_dwell_s
        self.layout = layout

    def fit(self, X, y):
        layout = self.layout or SensorLayout()
        X = _check_samples(X, layout.n)
        y = np.asarray(y)
        if len(y) != len(X):
            raise InputError("X and y must have the same length")

        neutral = X[y == "neutral"]
        zero = neutral[:, :-1].mean(axis=0) if len(neutral) else np.zeros(layout.n)
        theta_off = float(neutral[:, -1].mean()) if len(neutral) else 0.0

        dwells = []
        current_label = None
        circuit = CircuitParams()
        for row, label in zip(X, y):
            if label == "neutral":
                current_label = None
                continue
            if label not in _LABELS:
                raise InputError(f"unknown posture label {label!r}")
            if label != current_label:
                dwells.append(PostureDwell(category=_LABELS[label], frames=[]))
                current_label = label
            raw = from_conductance(row[:-1], circuit)
            dwells[-1].frames.append(
                SensorFrame(t=0.0, raw=tuple(raw), theta_b_deg=float(row[-1])))

        profile = calibrate_postures(
            dwells, self.theta_fm_default, layout=layout, circuit=circuit,
            zero_offsets=zero, theta_b_offset_deg=theta_off,
            sample_rate=self.sample_rate, min_dwell_s=self.min_dwell_s,
            p_max=self.p_max)
        self.profile_ = profile
        self.alpha_ = np.asarray(profile.alpha)
        self.beta_ = np.asarray(profile.beta)
        self.delta_ref_ = np.asarray(profile.delta_ref)
        self.f1_coeffs_ = np.asarray(profile.f1_coeffs)
        self.n_features_in_ = layout.n + 1
        return self

    def transform(self, X):
        """Pass-through; fitting is the point of this estimator."""
        check_is_fitted(self, "profile_")
        return X


class TorsoVelocityMapper(BaseEstimator, TransformerMixin):
    """Map conductance/bending samples to smoothed (v, w) commands.

    ``transform`` treats rows as one consecutive session sampled at
    ``1 / sample_rate`` and applies the command filter sequentially; call
    it per run, not on shuffled data. ``predict`` is an alias.
    """

    def __init__(self, profile: CalibrationProfile | None = None,
                 params: MappingParams | None = None,
                 sample_rate: float = 50.0):
        self.profile = profile
        self.params = params
        self.sample_rate = sample_rate

    def fit(self, X, y=None):
        profile = self.profile or CalibrationProfile.default()
        X = _check_samples(X, profile.layout.n)
        self.profile_ = profile
        self.params_ = self.params or MappingParams()
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "profile_")
        X = _check_samples(X, self.profile_.layout.n)
        circuit = CircuitParams()
        session = PipelineSession(self.profile_, self.params_, circuit)
        dt = 1.0 / self.sample_rate
        out = np.empty((len(X), 2))
        for i, row in enumerate(X):
            raw = from_conductance(row[:-1], circuit)
            frame = SensorFrame(t=i * dt, raw=tuple(raw), theta_b_deg=float(row[-1]))
            cmd = session.tick(frame)
            out[i, 0] = cmd.v
            out[i, 1] = cmd.w
        return out

    def predict(self, X):
        return self.transform(X)
