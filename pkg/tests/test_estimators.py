import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline

from torsodrive.calibration import CalibrationProfile
from torsodrive.errors import InputError
from torsodrive.estimators import PostureCalibrator, TorsoVelocityMapper
from torsodrive.harness import Intent, SyntheticUser
from torsodrive.mapping import MappingParams
from torsodrive.sensing import CATEGORY_ORDER, to_conductance

PROFILE = CalibrationProfile.default()


def labeled_recording(user: SyntheticUser, rate=50.0, dwell_s=3.2):
    """Conductance-space samples plus labels, sklearn-style."""
    rows, labels = [], []
    rng = np.random.default_rng(0)
    circuit = user.circuit
    for i in range(int(2.2 * rate)):
        frame = user.synthesize(Intent(CATEGORY_ORDER[2], 0.0, 0.0), 25.0, rng=rng)
        rows.append(list(to_conductance(np.asarray(frame.raw), circuit)) + [frame.theta_b_deg])
        labels.append("neutral")
    for idx, cat in enumerate(CATEGORY_ORDER):
        for i in range(int(dwell_s * rate)):
            frame = user.synthesize(
                Intent(cat, 1.0, 0.0, delta_target=user.delta_targets[idx]),
                user.theta_fm_true[idx], rng=rng)
            rows.append(list(to_conductance(np.asarray(frame.raw), circuit))
                        + [frame.theta_b_deg])
            labels.append(cat.value)
    return np.asarray(rows), np.asarray(labels)


class TestPostureCalibrator:
    def test_fit_recovers_user(self):
        user = SyntheticUser(theta_fm_true=(18.0, 22.0, 25.0, 22.0, 18.0))
        X, y = labeled_recording(user)
        cal = PostureCalibrator().fit(X, y)
        assert cal.delta_ref_ == pytest.approx(user.delta_targets, abs=1e-6)
        assert cal.profile_.theta_fm_per_posture == pytest.approx(
            user.theta_fm_true, abs=1e-9)
        assert cal.beta_ == pytest.approx(
            [(a + b) / 2 for a, b in zip(user.delta_targets, user.delta_targets[1:])])

    def test_sklearn_contract(self):
        cal = PostureCalibrator(theta_fm_default=30.0)
        params = cal.get_params()
        assert params["theta_fm_default"] == 30.0
        cloned = clone(cal)
        assert cloned.get_params()["theta_fm_default"] == 30.0
        cal.set_params(p_max=2.0)
        assert cal.p_max == 2.0

    def test_shape_validation(self):
        cal = PostureCalibrator()
        with pytest.raises(InputError):
            cal.fit(np.zeros((10, 3)), np.array(["neutral"] * 10))
        with pytest.raises(InputError):
            cal.fit(np.zeros((10, 6)), np.array(["neutral"] * 9))

    def test_unknown_label_rejected(self):
        cal = PostureCalibrator()
        X = np.zeros((10, 6))
        with pytest.raises(InputError):
            cal.fit(X, np.array(["wiggle"] * 10))


class TestTorsoVelocityMapper:
    def test_step_input_follows_filter(self):
        mapper = TorsoVelocityMapper(profile=PROFILE)
        n = 120
        X = np.zeros((n, 6))
        X[:, 2] = 0.8     # pressure on the center sensor
        X[:, 5] = 25.0    # full forward bend
        mapper.fit(X)
        out = mapper.transform(X)
        expected = 1.0 - 0.9 ** np.arange(1, n + 1)
        assert out[:, 0] == pytest.approx(expected, abs=1e-9)
        assert out[:, 1] == pytest.approx(np.zeros(n), abs=1e-12)

    def test_predict_alias(self):
        mapper = TorsoVelocityMapper(profile=PROFILE).fit(np.zeros((5, 6)))
        X = np.zeros((8, 6))
        assert np.array_equal(mapper.predict(X), mapper.transform(X))

    def test_neutral_input_is_zero(self):
        mapper = TorsoVelocityMapper(profile=PROFILE).fit(np.zeros((5, 6)))
        out = mapper.transform(np.zeros((50, 6)))
        assert np.all(out == 0.0)

    def test_commands_respect_limits(self):
        rng = np.random.default_rng(8)
        X = np.c_[rng.uniform(0, 1, (300, 5)), rng.uniform(-30, 45, 300)]
        params = MappingParams(v_max=0.8, w_max=1.2)
        mapper = TorsoVelocityMapper(profile=PROFILE, params=params).fit(X)
        out = mapper.transform(X)
        assert np.all(np.abs(out[:, 0]) <= 0.8 + 1e-12)
        assert np.all(np.abs(out[:, 1]) <= 1.2 + 1e-12)

    def test_pipeline_composition(self):
        pipe = Pipeline([("map", TorsoVelocityMapper(profile=PROFILE))])
        X = np.zeros((30, 6))
        X[:, 2] = 0.5
        X[:, 5] = 14.0
        out = pipe.fit_transform(X)
        assert out.shape == (30, 2)
        assert np.all(out[:, 0] >= 0)

    def test_calibrator_feeds_mapper(self):
        user = SyntheticUser()
        X, y = labeled_recording(user)
        cal = PostureCalibrator().fit(X, y)
        mapper = TorsoVelocityMapper(profile=cal.profile_).fit(X)
        fwd = np.zeros((100, 6))
        fwd[:, 2] = 0.9
        fwd[:, 5] = 25.0
        out = mapper.transform(fwd)
        assert out[-1, 0] > 0.9

    def test_negative_conductance_rejected(self):
        mapper = TorsoVelocityMapper(profile=PROFILE).fit(np.zeros((5, 6)))
        bad = np.zeros((3, 6))
        bad[0, 0] = -0.2
        with pytest.raises(InputError):
            mapper.transform(bad)
