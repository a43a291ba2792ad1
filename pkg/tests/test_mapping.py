import numpy as np
import pytest

from torsodrive.calibration import CalibrationProfile
from torsodrive.errors import ConfigurationError, InputError
from torsodrive.mapping import (BendRegion, Gate, MappingParams,
                                PipelineSession, VelocityCommand, command,
                                forward_max_angle, magnitude, pipeline_tick,
                                smooth, weights)
from torsodrive.sensing import SensorFrame, from_conductance

PARAMS = MappingParams()
PROFILE = CalibrationProfile.default()
BETA = PROFILE.beta


def hand_ramp(theta_b, theta_t=3.0, theta_m=25.0, rho=0.75):
    """Independent evaluation of the parabolic ramp for the oracle values."""
    p_m = (theta_m - theta_t) / rho
    theta_o = p_m + theta_t
    return (1.0 / (rho * (2.0 - rho))) * (1.0 - (theta_b - theta_o) ** 2 / p_m ** 2)


class TestMagnitude:
    def test_zero_at_forward_threshold(self):
        p, region = magnitude(3.0, 25.0, PARAMS)
        assert p == pytest.approx(0.0, abs=1e-9)

    def test_unity_at_forward_maximum(self):
        p, region = magnitude(25.0, 25.0, PARAMS)
        assert region is BendRegion.FORWARD
        assert p == pytest.approx(1.0, abs=1e-9)

    def test_spot_value_14_degrees(self):
        assert hand_ramp(14.0) == pytest.approx(0.65, abs=1e-12)
        p, region = magnitude(14.0, 25.0, PARAMS)
        assert region is BendRegion.FORWARD
        assert p == pytest.approx(0.650, abs=1e-3)

    def test_strictly_increasing_on_ramp(self):
        grid = np.linspace(3.0, 25.0, 500)
        values = [magnitude(float(t), 25.0, PARAMS)[0] for t in grid]
        assert np.all(np.diff(values) > 0)
        oracle = [max(hand_ramp(float(t)), 0.0) for t in grid]
        assert values == pytest.approx(oracle, abs=1e-12)

    def test_dead_zone(self):
        for t in (-3.0, -1.0, 0.0, 2.0, 3.0):
            p, region = magnitude(t, 25.0, PARAMS)
            assert (p, region) == (0.0, BendRegion.DEAD)

    def test_backward_mirror(self):
        p, region = magnitude(-15.0, 25.0, PARAMS)
        assert (region, p) == (BendRegion.BACKWARD, pytest.approx(1.0, abs=1e-9))
        p, region = magnitude(-9.0, 25.0, PARAMS)
        assert region is BendRegion.BACKWARD
        assert 0.0 < p < 1.0
        grid = np.linspace(-3.0, -15.0, 200)
        values = [magnitude(float(t), 25.0, PARAMS)[0] for t in grid]
        assert np.all(np.diff(values) > 0)

    def test_safety_beyond_threshold(self):
        assert magnitude(45.0, 25.0, PARAMS) == (0.0, BendRegion.SAFETY)
        assert magnitude(40.0, 25.0, PARAMS) == (0.0, BendRegion.SAFETY)
        assert magnitude(-25.0, 25.0, PARAMS) == (0.0, BendRegion.SAFETY)

    def test_budget_validation(self):
        with pytest.raises(ConfigurationError):
            magnitude(10.0, 3.0, PARAMS)
        with pytest.raises(ConfigurationError):
            magnitude(10.0, 41.0, PARAMS)


class TestForwardMaxAngle:
    def test_unit_gain_gives_default(self):
        assert forward_max_angle(0.0, PROFILE, PARAMS) == pytest.approx(25.0)

    def test_clamped_gain(self):
        profile = CalibrationProfile(
            zero_offsets=(0.0,) * 5, alpha=(1.0,) * 5, p_max=1.0,
            beta=BETA, delta_ref=PROFILE.delta_ref,
            f1_coeffs=(0.0, 0.0, 9.0),  # clamps to 1.5
            theta_fm_per_posture=PROFILE.theta_fm_per_posture)
        assert forward_max_angle(0.0, profile, PARAMS) == pytest.approx(37.5)

    def test_posture_dependent_budget(self):
        # gains on an exact parabola: k(d) = 1 - 0.5 d^2
        gains = [1.0 - 0.5 * d ** 2 for d in PROFILE.delta_ref]
        coeffs = np.polyfit(PROFILE.delta_ref, gains, 2)
        profile = CalibrationProfile(
            zero_offsets=(0.0,) * 5, alpha=(1.0,) * 5, p_max=1.0,
            beta=BETA, delta_ref=PROFILE.delta_ref,
            f1_coeffs=tuple(coeffs),
            theta_fm_per_posture=(17.0, 23.0, 25.0, 23.0, 17.0))
        spin = forward_max_angle(PROFILE.delta_ref[0], profile, PARAMS)
        fwd = forward_max_angle(PROFILE.delta_ref[2], profile, PARAMS)
        assert spin < fwd
        assert fwd == pytest.approx(25.0, abs=1e-6)
        assert spin == pytest.approx(25.0 * (1.0 - 0.5 * 0.8 ** 2), abs=1e-6)

    def test_stays_below_safety_threshold(self):
        profile = CalibrationProfile(
            zero_offsets=(0.0,) * 5, alpha=(1.0,) * 5, p_max=1.0,
            beta=BETA, delta_ref=PROFILE.delta_ref, f1_coeffs=(0.0, 0.0, 1.5),
            theta_fm_per_posture=PROFILE.theta_fm_per_posture)
        params = MappingParams(theta_fm_default=30.0)
        assert forward_max_angle(0.0, profile, params) < params.theta_fst


class TestWeights:
    def test_plateau_endpoint(self):
        assert weights(BETA[1], BETA) == pytest.approx((1.0, 0.0))

    def test_turn_left_midpoint(self):
        mid = 0.5 * (BETA[0] + BETA[1])
        w_v, w_w = weights(mid, BETA)
        assert (w_v, w_w) == pytest.approx((0.5, -0.5), abs=1e-12)

    def test_spin_extremes(self):
        assert weights(BETA[0], BETA) == pytest.approx((0.0, -1.0), abs=1e-12)
        assert weights(BETA[3], BETA) == pytest.approx((0.0, 1.0))
        assert weights(-5.0, BETA) == (0.0, -1.0)
        assert weights(5.0, BETA) == (0.0, 1.0)

    def test_continuity_at_boundaries(self):
        eps = 1e-11
        for b in BETA:
            below = weights(b - eps, BETA)
            at = weights(b, BETA)
            assert abs(below[0] - at[0]) < 1e-9
            assert abs(below[1] - at[1]) < 1e-9

    def test_continuity_on_dense_grid(self):
        grid = np.linspace(BETA[0] - 0.2, BETA[3] + 0.2, 100_000)
        vals = np.array([weights(float(d), BETA) for d in grid])
        step = grid[1] - grid[0]
        # Lipschitz bound of the sinusoid blends
        lip = np.pi / min(np.diff(BETA)) * 1.0
        assert np.max(np.abs(np.diff(vals[:, 0]))) < lip * step * 2
        assert np.max(np.abs(np.diff(vals[:, 1]))) < lip * step * 2

    def test_smooth_at_plateau_junctions(self):
        # derivative vanishes where the blends meet the plateau
        h = 1e-6
        for b in (BETA[1], BETA[2]):
            for fn_idx in (0, 1):
                left = (weights(b - h, BETA)[fn_idx] - weights(b - 2 * h, BETA)[fn_idx]) / h
                right = (weights(b + 2 * h, BETA)[fn_idx] - weights(b + h, BETA)[fn_idx]) / h
                assert abs(left - right) < 1e-4

    def test_literal_branch_jumps_at_beta3(self):
        eps = 1e-11
        below = weights(BETA[2] - eps, BETA, literal_eq12=True)
        above = weights(BETA[2] + eps, BETA, literal_eq12=True)
        assert abs(above[1] - below[1]) == pytest.approx(1.0, abs=1e-6)

    def test_bad_boundaries(self):
        with pytest.raises(ConfigurationError):
            weights(0.0, (0.5, 0.2, 0.3, 0.6))


class TestCommand:
    def test_forward_plateau(self):
        cmd = command(1.0, BendRegion.FORWARD, BETA[1], PROFILE, PARAMS)
        assert (cmd.v, cmd.w) == pytest.approx((PARAMS.v_max, 0.0))
        assert cmd.gate is Gate.NORMAL

    def test_backward_fixed_weight(self):
        cmd = command(1.0, BendRegion.BACKWARD, 0.0, PROFILE, PARAMS)
        assert (cmd.v, cmd.w) == pytest.approx((-0.8, 0.0))

    def test_safety_gate(self):
        cmd = command(0.0, BendRegion.SAFETY, 0.0, PROFILE, PARAMS)
        assert (cmd.v, cmd.w, cmd.gate) == (0.0, 0.0, Gate.SAFETY_STOP)

    def test_no_contact_gate(self):
        cmd = command(0.5, BendRegion.FORWARD, None, PROFILE, PARAMS)
        assert (cmd.v, cmd.w, cmd.gate) == (0.0, 0.0, Gate.NO_CONTACT)

    def test_limits_hold_everywhere(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            p = rng.uniform(0, 1)
            delta = rng.uniform(-1.2, 1.2)
            region = BendRegion.FORWARD if rng.random() < 0.7 else BendRegion.BACKWARD
            cmd = command(p, region, delta, PROFILE, PARAMS)
            assert abs(cmd.v) <= PARAMS.v_max + 1e-12
            assert abs(cmd.w) <= PARAMS.w_max + 1e-12
            if region is BendRegion.BACKWARD:
                assert cmd.w == 0.0


class TestSmoothing:
    def test_step_response_first_tick(self):
        out = smooth(VelocityCommand(1.0, 0.0), VelocityCommand.zero(), 0.02, PARAMS)
        assert out.v == pytest.approx(0.1, abs=1e-15)

    def test_geometric_convergence(self):
        prev = VelocityCommand.zero()
        for n in range(1, 101):
            prev = smooth(VelocityCommand(1.0, -0.5), prev, 0.02, PARAMS)
            assert prev.v == pytest.approx(1.0 - 0.9 ** n, abs=1e-12)
            assert prev.w == pytest.approx(-0.5 * (1.0 - 0.9 ** n), abs=1e-12)

    def test_bounded_by_input(self):
        rng = np.random.default_rng(9)
        prev = VelocityCommand.zero()
        bound = 0.0
        for _ in range(1000):
            v = rng.uniform(-1, 1)
            bound = max(bound, abs(v))
            prev = smooth(VelocityCommand(v, 0.0), prev, 0.02, PARAMS)
            assert abs(prev.v) <= bound + 1e-12

    def test_gate_bypasses_filter(self):
        prev = VelocityCommand(0.9, 0.3)
        out = smooth(VelocityCommand.zero(Gate.SAFETY_STOP), prev, 0.02, PARAMS)
        assert (out.v, out.w) == (0.0, 0.0)

    def test_dt_validation(self):
        with pytest.raises(InputError):
            smooth(VelocityCommand.zero(), VelocityCommand.zero(), 0.0, PARAMS)


def make_frame(lam, theta_b, t=0.0):
    return SensorFrame(t=t, raw=tuple(from_conductance(np.asarray(lam, float))),
                       theta_b_deg=theta_b)


class TestPipeline:
    def test_neutral_frame_stops(self):
        session = PipelineSession(PROFILE, PARAMS)
        cmd = session.tick(make_frame([0.0] * 5, 0.0))
        assert (cmd.v, cmd.w) == (0.0, 0.0)
        assert cmd.gate is Gate.NO_CONTACT

    def test_full_forward_settles_to_v_max(self):
        session = PipelineSession(PROFILE, PARAMS)
        cmd = None
        for i in range(400):
            cmd = session.tick(make_frame([0, 0, 0.8, 0, 0], 25.0, t=i * 0.02))
        assert cmd.v == pytest.approx(PARAMS.v_max, abs=1e-3)
        assert cmd.w == pytest.approx(0.0, abs=1e-9)

    def test_left_turn_sign_convention(self):
        session = PipelineSession(PROFILE, PARAMS)
        delta2 = PROFILE.delta_ref[1]
        s = np.array(PROFILE.layout.positions)
        # place pressure between sensors 1 and 2 so the COP lands on delta_2
        t = (delta2 - s[1]) / (s[2] - s[1])
        lam = np.zeros(5)
        lam[1], lam[2] = (1 - t), t
        assert np.dot(lam, s) / lam.sum() == pytest.approx(delta2)
        cmd = None
        for i in range(100):
            cmd = session.tick(make_frame(lam, 14.0, t=i * 0.02))
        assert cmd.v > 0
        assert cmd.w < 0

    def test_safety_stop_overrides_everything(self):
        session = PipelineSession(PROFILE, PARAMS)
        session.tick(make_frame([0, 0, 0.8, 0, 0], 20.0))
        cmd = session.tick(make_frame([0, 0, 0.8, 0, 0], 45.0))
        assert (cmd.v, cmd.w, cmd.gate) == (0.0, 0.0, Gate.SAFETY_STOP)
        # safety applies even with no pressure contact
        cmd = session.tick(make_frame([0.0] * 5, 45.0))
        assert cmd.gate is Gate.SAFETY_STOP

    def test_command_scale_invariant_in_conductance(self):
        lam = np.array([0.0, 0.3, 0.5, 0.0, 0.0])
        outputs = []
        for scale in (1.0, 1.7):
            session = PipelineSession(PROFILE, PARAMS)
            for i in range(50):
                cmd = session.tick(make_frame(np.clip(lam * scale, 0, 1), 12.0, t=i * 0.02))
            outputs.append((cmd.v, cmd.w))
        assert outputs[0] == pytest.approx(outputs[1], rel=1e-12)

    def test_functional_core_matches_session(self):
        prev = VelocityCommand.zero()
        session = PipelineSession(PROFILE, PARAMS)
        for i in range(20):
            frame = make_frame([0, 0.2, 0.6, 0, 0], 10.0, t=i * 0.02)
            cmd_fn, _ = pipeline_tick(frame, PROFILE, PARAMS, prev)
            cmd_session = session.tick(frame)
            assert (cmd_fn.v, cmd_fn.w) == (cmd_session.v, cmd_session.w)
            prev = cmd_fn


class TestParamsValidation:
    def test_threshold_ordering_enforced(self):
        with pytest.raises(ConfigurationError):
            MappingParams(theta_ft=30.0)
        with pytest.raises(ConfigurationError):
            MappingParams(theta_bt=1.0)

    def test_rho_and_weights_ranges(self):
        with pytest.raises(ConfigurationError):
            MappingParams(rho=2.5)
        with pytest.raises(ConfigurationError):
            MappingParams(w_v_back=0.5)

    def test_dict_roundtrip(self):
        params = MappingParams(v_max=1.4, literal_eq12=True)
        assert MappingParams.from_dict(params.to_dict()) == params
