import numpy as np
import pytest

from torsodrive.calibration import (CalibrationProfile, PostureDwell,
                                    calibrate_neutral, calibrate_postures,
                                    calibrate_recording, eval_f1, fit_f1,
                                    midpoint_boundaries)
from torsodrive.errors import (CalibrationError, ConfigurationError,
                               InsufficientDataError)
from torsodrive.harness import Intent, NoiseParams, SyntheticUser
from torsodrive.mapping import MappingParams, PipelineSession
from torsodrive.sensing import (CATEGORY_ORDER, CircuitParams, SensorFrame,
                                from_conductance)

RATE = 50.0


def constant_frames(lam, theta_b, seconds, circuit=CircuitParams(), rng=None, sigma=0.0):
    frames = []
    n = int(seconds * RATE)
    lam = np.asarray(lam, dtype=float)
    for i in range(n):
        noisy = lam if sigma == 0.0 else np.clip(lam + rng.normal(0, sigma, len(lam)), 0, None)
        frames.append(SensorFrame(t=i / RATE, raw=tuple(from_conductance(noisy, circuit)),
                                  theta_b_deg=theta_b + (rng.normal(0, sigma) if sigma else 0.0)))
    return frames


class TestNeutralCalibration:
    def test_constant_frames_recovered_exactly(self):
        frames = constant_frames([0.1, 0.2, 0.0, 0.05, 0.3], 4.0, 2.0)
        offsets, theta_off = calibrate_neutral(frames)
        assert offsets == pytest.approx([0.1, 0.2, 0.0, 0.05, 0.3], abs=1e-9)
        assert theta_off == pytest.approx(4.0, abs=1e-9)

    def test_noisy_offsets_within_statistical_bound(self):
        rng = np.random.default_rng(3)
        sigma = 0.02
        frames = constant_frames([0.3] * 5, 2.0, 4.0, rng=rng, sigma=sigma)
        offsets, theta_off = calibrate_neutral(frames)
        bound = 3 * sigma / np.sqrt(len(frames))
        assert np.all(np.abs(np.asarray(offsets) - 0.3) < bound + 1e-4)
        assert abs(theta_off - 2.0) < bound + 1e-4

    def test_insufficient_data_rejected(self):
        frames = constant_frames([0.1] * 5, 0.0, 1.0)
        with pytest.raises(InsufficientDataError):
            calibrate_neutral(frames)

    def test_neutral_maps_to_no_motion_after_calibration(self):
        lam0 = [0.08, 0.1, 0.12, 0.1, 0.09]
        frames = constant_frames(lam0, 1.0, 2.0)
        offsets, theta_off = calibrate_neutral(frames)
        profile = CalibrationProfile.default()
        profile = CalibrationProfile(
            zero_offsets=offsets, alpha=profile.alpha, p_max=profile.p_max,
            beta=profile.beta, delta_ref=profile.delta_ref,
            f1_coeffs=profile.f1_coeffs,
            theta_fm_per_posture=profile.theta_fm_per_posture,
            theta_b_offset_deg=theta_off)
        session = PipelineSession(profile, MappingParams())
        for frame in frames[:10]:
            cmd = session.tick(frame)
            assert cmd.v == 0.0 and cmd.w == 0.0


def make_dwells(user: SyntheticUser, seconds=3.2, reps=2, rng=None):
    """Calibration protocol: repeated dwells over the five postures."""
    rng = rng or np.random.default_rng(0)
    dwells = []
    order = list(CATEGORY_ORDER) + list(reversed(CATEGORY_ORDER))
    for _ in range(reps):
        for cat in order:
            idx = CATEGORY_ORDER.index(cat)
            frames = []
            for i in range(int(seconds * RATE)):
                intent = Intent(category=cat, intensity=1.0, bias=0.0,
                                delta_target=user.delta_targets[idx])
                frames.append(user.synthesize(intent, user.theta_fm_true[idx],
                                              t=i / RATE, rng=rng))
            dwells.append(PostureDwell(category=cat, frames=frames))
    return dwells


class TestPostureCalibration:
    def test_alpha_from_saturated_sensor(self):
        # a sensor whose top-decile mean reads 2.0 gets weight 0.5
        circuit = CircuitParams(model="divider")
        dwells = []
        for idx, cat in enumerate(CATEGORY_ORDER):
            lam = [0.01] * 5
            lam[idx] = 2.0
            dwells.append(PostureDwell(category=cat, frames=constant_frames(
                lam, 20.0, 3.2, circuit=circuit)))
        profile = calibrate_postures(dwells, layout=None, circuit=circuit, p_max=1.0)
        assert profile.alpha == pytest.approx((0.5,) * 5, rel=1e-6)

    def test_beta_are_consecutive_midpoints(self):
        assert midpoint_boundaries((-0.8, -0.4, 0.0, 0.4, 0.8)) == \
            pytest.approx((-0.6, -0.2, 0.2, 0.6))
        user = SyntheticUser()
        profile = calibrate_postures(make_dwells(user))
        assert profile.beta == pytest.approx(midpoint_boundaries(profile.delta_ref))

    def test_constant_gain_fits_constant_polynomial(self):
        user = SyntheticUser(theta_fm_true=(25.0,) * 5)
        profile = calibrate_postures(make_dwells(user), theta_fm_default=25.0)
        a2, a1, a0 = profile.f1_coeffs
        assert abs(a2) < 1e-9 and abs(a1) < 1e-9
        assert a0 == pytest.approx(1.0, abs=1e-9)

    def test_roundtrip_recovers_known_user(self):
        alpha_true = (0.5, 1.25, 1.0, 0.8, 2.0)
        delta_true = (-0.75, -0.35, 0.05, 0.45, 0.85)
        theta_true = (15.0, 20.0, 25.0, 21.0, 16.0)
        rng = np.random.default_rng(11)
        # divider readout: conductance above 1 must not clip at the ADC
        circuit = CircuitParams(model="divider")
        user = SyntheticUser(alpha_true=alpha_true, delta_targets=delta_true,
                             theta_fm_true=theta_true, circuit=circuit,
                             noise=NoiseParams(sigma_lambda=0.02, sigma_theta_deg=0.3))
        profile = calibrate_postures(make_dwells(user, reps=2, rng=rng),
                                     theta_fm_default=25.0, circuit=circuit)
        # alpha and reference COPs within the noise scale
        assert np.asarray(profile.alpha) == pytest.approx(alpha_true, rel=0.05)
        assert np.asarray(profile.delta_ref) == pytest.approx(delta_true, abs=0.02)
        assert np.asarray(profile.theta_fm_per_posture) == pytest.approx(theta_true, abs=0.2)
        # boundaries are exactly the midpoints of the recovered references
        assert profile.beta == pytest.approx(midpoint_boundaries(profile.delta_ref))
        # gain curve reproduces the calibration points within the LS residual
        k_true = np.asarray(profile.theta_fm_per_posture) / 25.0
        coeffs = np.polyfit(profile.delta_ref, k_true, 2)
        residual = np.max(np.abs(np.polyval(coeffs, profile.delta_ref) - k_true))
        for d, k in zip(profile.delta_ref, k_true):
            assert abs(eval_f1(d, profile.f1_coeffs) - k) <= residual + 1e-9

    def test_missing_posture_aborts(self):
        user = SyntheticUser()
        dwells = [d for d in make_dwells(user, reps=1)
                  if d.category is not CATEGORY_ORDER[0]]
        with pytest.raises(CalibrationError):
            calibrate_postures(dwells)

    def test_short_dwell_rejected(self):
        user = SyntheticUser()
        dwells = make_dwells(user, seconds=1.0, reps=1)
        with pytest.raises(CalibrationError):
            calibrate_postures(dwells)

    def test_silent_sensor_falls_back_to_unit_weight(self):
        # five postures but pressure never reaches the outermost sensor
        circuit = CircuitParams()
        patterns = [
            [0.0, 0.9, 0.1, 0.0, 0.0],
            [0.0, 0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.9, 0.1, 0.0],
            [0.0, 0.0, 0.4, 0.6, 0.0],
            [0.0, 0.0, 0.1, 0.9, 0.0],
        ]
        dwells = [PostureDwell(category=cat,
                               frames=constant_frames(lam, 20.0, 3.2, circuit=circuit))
                  for cat, lam in zip(CATEGORY_ORDER, patterns)]
        profile = calibrate_postures(dwells, circuit=circuit)
        assert profile.alpha_fallback == (True, False, False, False, True)
        assert profile.alpha[0] == 1.0 and profile.alpha[-1] == 1.0

    def test_literal_gain_equation_flag(self):
        user = SyntheticUser(theta_fm_true=(20.0, 22.0, 25.0, 22.0, 20.0))
        corrected = calibrate_postures(make_dwells(user), theta_fm_default=25.0)
        literal = calibrate_postures(make_dwells(user), theta_fm_default=25.0,
                                     literal_gain_eq=True)
        k_corr = eval_f1(corrected.delta_ref[0], corrected.f1_coeffs)
        k_lit = eval_f1(literal.delta_ref[0], literal.f1_coeffs)
        assert k_corr == pytest.approx(20.0 / 25.0, abs=0.02)
        assert k_lit == pytest.approx(25.0 / 20.0, abs=0.02)


class TestGainCurve:
    def test_constant_coeffs(self):
        for d in (-2.0, 0.0, 0.7, 5.0):
            assert eval_f1(d, (0.0, 0.0, 1.0)) == 1.0

    def test_clamped_outside_calibrated_range(self):
        coeffs = fit_f1((-0.8, -0.4, 0.0, 0.4, 0.8), (0.6, 0.8, 1.0, 0.8, 0.6))
        assert eval_f1(50.0, coeffs) in (0.3, 1.5)
        assert eval_f1(-50.0, coeffs) in (0.3, 1.5)

    def test_fit_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            d = np.sort(rng.uniform(-1, 1, 5))
            while np.any(np.diff(d) < 0.05):
                d = np.sort(rng.uniform(-1, 1, 5))
            k = rng.uniform(0.5, 1.4, 5)
            coeffs = np.asarray(fit_f1(d, k))
            # independent least-squares via the normal equations
            v = np.vander(d, 3)
            oracle = np.linalg.solve(v.T @ v, v.T @ k)
            assert coeffs == pytest.approx(oracle, rel=1e-6, abs=1e-9)


class TestProfileSerialization:
    def test_json_roundtrip_and_keys(self, tmp_path):
        profile = CalibrationProfile.default()
        d = profile.to_json_dict()
        assert {"zero_offsets", "alpha", "p_max", "beta", "delta_ref",
                "f1_coeffs", "theta_fm_per_posture", "layout"} <= set(d)
        path = tmp_path / "profile.json"
        profile.save(path)
        loaded = CalibrationProfile.load(path)
        assert loaded == profile

    def test_invariants_enforced(self):
        base = CalibrationProfile.default().to_json_dict()
        bad = dict(base)
        bad["alpha"] = [0.0, 1, 1, 1, 1]
        with pytest.raises(ConfigurationError):
            CalibrationProfile.from_json_dict(bad)
        bad = dict(base)
        bad["beta"] = [0.6, -0.2, 0.2, 0.6]
        with pytest.raises(ConfigurationError):
            CalibrationProfile.from_json_dict(bad)


class TestLabeledRecording:
    def test_full_recording_pipeline(self):
        rng = np.random.default_rng(2)
        user = SyntheticUser()
        frames = []
        for i in range(int(2.5 * RATE)):
            fr = user.synthesize(Intent(CATEGORY_ORDER[2], 0.0, 0.0), 25.0, t=i / RATE)
            fr.label = "neutral"
            frames.append(fr)
        t0 = len(frames) / RATE
        for idx, cat in enumerate(CATEGORY_ORDER):
            for i in range(int(3.2 * RATE)):
                fr = user.synthesize(
                    Intent(cat, 1.0, 0.0, delta_target=user.delta_targets[idx]),
                    user.theta_fm_true[idx], t=t0 + i / RATE, rng=rng)
                fr.label = cat.value
                frames.append(fr)
        profile = calibrate_recording(frames)
        assert np.asarray(profile.delta_ref) == pytest.approx(user.delta_targets, abs=1e-6)
