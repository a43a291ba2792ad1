import json

import numpy as np
import pytest

from torsodrive.errors import ConfigurationError, InputError
from torsodrive.sensing import (CATEGORY_ORDER, CircuitParams, PostureCategory,
                                SensorFrame, SensorLayout, classify_posture,
                                compute_cop, from_conductance,
                                load_frames_jsonl, save_frames_jsonl,
                                to_conductance)

BETA = (-0.6, -0.2, 0.2, 0.6)


class TestToConductance:
    def test_open_circuit_reads_zero(self):
        assert to_conductance(0.0) == 0.0

    def test_linear_midpoint(self):
        c = CircuitParams(full_scale=4096.0, model="linear")
        full = to_conductance(4096.0, c)
        assert to_conductance(2048.0, c) == pytest.approx(0.5 * full, rel=1e-12)

    def test_monotone_staircase(self):
        c = CircuitParams()
        sweep = np.linspace(0.0, c.full_scale, 257)
        lam = to_conductance(sweep, c)
        assert np.all(np.diff(lam) >= 0)
        assert np.all(lam >= 0)

    def test_divider_monotone(self):
        c = CircuitParams(model="divider")
        sweep = np.linspace(0.0, c.full_scale * 0.99, 100)
        lam = to_conductance(sweep, c)
        assert np.all(np.diff(lam) > 0)

    def test_out_of_range_raises(self):
        with pytest.raises(InputError):
            to_conductance(-1.0)
        with pytest.raises(InputError):
            to_conductance(5000.0)

    def test_roundtrip_with_inverse(self):
        c = CircuitParams()
        lam = np.array([0.0, 0.1, 0.5, 0.9])
        assert to_conductance(from_conductance(lam, c), c) == pytest.approx(lam)


class TestComputeCop:
    def test_symmetric_load_centers(self):
        assert compute_cop([1, 1, 1, 1, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_hand_evaluated_mixture(self):
        # (2*0 + 1*1) / (2 + 1)
        assert compute_cop([0, 0, 2, 0, 1]) == pytest.approx(1.0 / 3.0, rel=1e-12)

    def test_single_sensor_support(self):
        for k in (0.05, 1.0, 40.0):
            assert compute_cop([0, 0, 0, 0, k]) == pytest.approx(1.0)

    def test_no_contact_returns_none(self):
        assert compute_cop([0.0] * 5) is None
        assert compute_cop([0.019] * 5) is None

    def test_matches_weighted_mean_oracle(self):
        rng = np.random.default_rng(42)
        s = np.array(SensorLayout().positions)
        for _ in range(500):
            lam = rng.uniform(0.0, 2.0, size=5)
            lam[rng.integers(0, 5)] += 0.5  # guarantee contact
            expected = float(np.sum(lam * s) / np.sum(lam))
            got = compute_cop(lam)
            assert got == pytest.approx(expected, rel=1e-12)
            assert s[0] <= got <= s[-1]

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            lam = rng.uniform(0.05, 1.0, size=5)
            base = compute_cop(lam)
            for c in (0.5, 2.0, 10.0):
                assert compute_cop(c * lam) == pytest.approx(base, rel=1e-12)

    def test_negative_conductance_rejected(self):
        with pytest.raises(InputError):
            compute_cop([-0.1, 0, 0, 0, 1])


class TestClassifyPosture:
    def test_interval_midpoint_is_forward(self):
        assert classify_posture(0.0, BETA) is PostureCategory.BEND_FORWARD

    def test_half_open_boundaries(self):
        assert classify_posture(BETA[0], BETA) is PostureCategory.TURN_LEFT
        assert classify_posture(BETA[3], BETA) is PostureCategory.SPIN_CW

    def test_partitions_the_axis(self):
        deltas = np.linspace(-1.5, 1.5, 2001)
        cats = [classify_posture(float(d), BETA) for d in deltas]
        # total function, categories appear in axis order
        indices = [CATEGORY_ORDER.index(c) for c in cats]
        assert np.all(np.diff(indices) >= 0)
        assert set(cats) == set(CATEGORY_ORDER)

    def test_bad_boundaries_rejected(self):
        with pytest.raises(ConfigurationError):
            classify_posture(0.0, (0.2, 0.2, 0.4, 0.6))


class TestSensorPlumbing:
    def test_layout_invariants(self):
        with pytest.raises(ConfigurationError):
            SensorLayout(positions=(0.0,))
        with pytest.raises(ConfigurationError):
            SensorLayout(positions=(0.0, 0.0, 1.0))

    def test_frame_validation(self):
        with pytest.raises(InputError):
            SensorFrame(t=0.0, raw=(-1.0, 0, 0, 0, 0), theta_b_deg=0.0)
        with pytest.raises(InputError):
            SensorFrame(t=0.0, raw=(0,) * 5, theta_b_deg=float("nan"))

    def test_jsonl_roundtrip(self, tmp_path):
        frames = [SensorFrame(t=i * 0.02, raw=(i, 0, 1, 0, 2), theta_b_deg=1.5 * i,
                              label="turn_left" if i % 2 else None)
                  for i in range(5)]
        path = tmp_path / "frames.jsonl"
        save_frames_jsonl(frames, path)
        loaded = load_frames_jsonl(path)
        assert len(loaded) == 5
        for a, b in zip(frames, loaded):
            assert a.raw == b.raw
            assert a.theta_b_deg == b.theta_b_deg
            assert a.label == b.label
        with open(path) as f:
            row = json.loads(f.readline())
        assert set(row) >= {"t", "raw", "theta_b_deg"}
