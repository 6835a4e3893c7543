import math

import numpy as np
import pytest

from gridfreq import coi_frequency, compute_metrics


class TestCoiFrequency:
    def test_equal_weights_mean(self):
        assert coi_frequency([60.0, 59.6], [1.0, 1.0]) == pytest.approx(59.8)

    def test_weighted_mean(self):
        assert coi_frequency([60.0, 59.6], [1.0, 3.0]) == pytest.approx(59.7)

    def test_single_machine_identity(self):
        assert coi_frequency([59.87], [123.0]) == 59.87

    def test_errors(self):
        with pytest.raises(ValueError):
            coi_frequency([], [])
        with pytest.raises(ValueError):
            coi_frequency([60.0], [0.0])
        with pytest.raises(ValueError):
            coi_frequency([60.0, 59.9], [1.0])


def exponential_trace(dt=0.005, horizon=60.0):
    t = np.arange(0.0, horizon + dt / 2, dt)
    f = 60.0 - 0.5 * (1.0 - np.exp(-t / 5.0))
    return t, f


class TestComputeMetrics:
    def test_exponential_oracle(self):
        # analytic mean of 59.5 + 0.5 exp(-t/5) over [20, 52]:
        # 59.5 + 0.5 * (5/32) * (exp(-4) - exp(-52/5))
        t, f = exponential_trace()
        expected_settle = 59.5 + 0.5 * (5.0 / 32.0) * (math.exp(-4.0)
                                                       - math.exp(-10.4))
        m = compute_metrics(t, f, imbalance_mw=2750.0, contingency_time_s=0.0,
                            ufls_threshold_hz=59.3)
        assert m.settle_hz == pytest.approx(expected_settle, abs=1e-4)
        assert m.fr_mw_per_01hz == pytest.approx(
            275.0 / (60.0 - expected_settle), rel=1e-3)
        assert m.fr_mw_per_01hz == pytest.approx(551.6, abs=0.5)
        assert m.nadir_hz == pytest.approx(59.5, abs=1e-4)
        assert m.ufls_time_s is None

    def test_flat_trace_null_event(self):
        t = np.arange(0.0, 60.0, 0.005)
        f = np.full(t.size, 60.0)
        m = compute_metrics(t, f, imbalance_mw=0.0, contingency_time_s=1.0,
                            ufls_threshold_hz=59.3)
        assert m.nadir_hz == 60.0
        assert m.rocof_hz_per_s == 0.0
        assert m.fr_mw_per_01hz is None
        assert m.frn_mw_per_01hz is None

    def test_linear_decline_rocof(self):
        t = np.arange(0.0, 60.0, 0.005)
        f = np.where(t < 1.0, 60.0, 60.0 - 0.275 * (t - 1.0))
        m = compute_metrics(t, f, imbalance_mw=2750.0, contingency_time_s=1.0,
                            ufls_threshold_hz=59.3)
        assert m.rocof_hz_per_s == pytest.approx(-0.275, abs=1e-6)
        # nadir is the last (lowest) sample, never smoothed
        assert m.nadir_hz == f.min()
        assert m.ufls_time_s == pytest.approx(1.0 + 0.7 / 0.275, rel=1e-9)

    def test_frn_not_above_fr_when_nadir_below_settle(self):
        t, f = exponential_trace()
        m = compute_metrics(t, f, imbalance_mw=2750.0, contingency_time_s=0.0,
                            ufls_threshold_hz=59.3)
        assert m.nadir_hz <= m.settle_hz
        assert m.frn_mw_per_01hz <= m.fr_mw_per_01hz
        assert m.fr_mw_per_hz == pytest.approx(m.fr_mw_per_01hz * 10.0)

    def test_start_frequency_taken_at_contingency(self):
        t = np.arange(0.0, 60.0, 0.01)
        f = np.where(t < 2.0, 59.95, 59.95 - 0.2 * (1 - np.exp(-(t - 2.0))))
        m = compute_metrics(t, f, imbalance_mw=1000.0, contingency_time_s=2.0,
                            ufls_threshold_hz=59.0)
        assert m.start_hz == pytest.approx(59.95)

    def test_uncovered_settle_window_raises(self):
        t = np.arange(0.0, 10.0, 0.01)
        with pytest.raises(ValueError, match="settle window"):
            compute_metrics(t, np.full(t.size, 60.0), 100.0, 1.0, 59.3)

    def test_grid_refinement_stability(self):
        t1, f1 = exponential_trace(dt=0.01)
        t2, f2 = exponential_trace(dt=0.0025)
        m1 = compute_metrics(t1, f1, 2750.0, 0.0, 59.3)
        m2 = compute_metrics(t2, f2, 2750.0, 0.0, 59.3)
        assert m1.settle_hz == pytest.approx(m2.settle_hz, abs=1e-3)
        assert m1.nadir_time_s == pytest.approx(m2.nadir_time_s, abs=1e-3)
