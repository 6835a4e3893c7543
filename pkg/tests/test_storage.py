import numpy as np
import pytest

from gridfreq import (DroopControl, EnergyState, StepControl, StepState,
                      StorageUnit, droop_command, energy_update,
                      estimate_rocof, step_power_mw, step_update)


class TestRocofEstimator:
    def test_exact_line(self):
        t = np.arange(0, 0.5 + 1e-9, 0.005)
        f = 60.0 - 0.275 * t
        assert estimate_rocof(t, f) == pytest.approx(-0.275, rel=1e-12)

    def test_constant_is_zero(self):
        t = np.arange(0, 0.5, 0.005)
        assert estimate_rocof(t, np.full(t.size, 59.9)) == pytest.approx(0.0, abs=1e-15)

    def test_rejects_zero_mean_zigzag(self):
        t = np.arange(0, 0.5 + 1e-9, 0.005)
        zigzag = 1e-3 * np.where(np.arange(t.size) % 2 == 0, 1.0, -1.0)
        f = 60.0 - 0.275 * t + zigzag
        assert estimate_rocof(t, f) == pytest.approx(-0.275, abs=1e-6)

    def test_window_too_short(self):
        with pytest.raises(ValueError):
            estimate_rocof([0.0], [60.0])
        with pytest.raises(ValueError):
            estimate_rocof([1.0, 1.0], [60.0, 59.9])


class TestDroopCommand:
    unit = StorageUnit("es", 3100.0, 15500.0,
                       DroopControl(droop=0.03, deadband_hz=0.017, filter_s=0.1))

    def test_nominal_frequency_no_output(self):
        d_filt, p = droop_command(self.unit.control, 0.0, 60.0, self.unit)
        assert d_filt == 0.0
        assert p == 0.0

    def test_steady_state_gain(self):
        # settled filter at the deadbanded deviation of 59.7 Hz
        filt = -(0.3 - 0.017)
        d_filt, p = droop_command(self.unit.control, filt, 59.7, self.unit)
        assert d_filt == pytest.approx(0.0, abs=1e-12)
        assert p == pytest.approx(0.283 / (0.03 * 60.0) * 3100.0, rel=1e-12)
        assert p == pytest.approx(487.4, abs=0.02)

    def test_saturates_at_max(self):
        filt = -(5.0 - 0.017)  # settled at 55 Hz
        _, p = droop_command(self.unit.control, filt, 55.0, self.unit)
        assert p == 3100.0

    def test_discharge_only(self):
        _, p = droop_command(self.unit.control, 0.3, 60.3, self.unit)
        assert p == 0.0


class TestStepPower:
    def test_eq_magnitude(self):
        ctl = StepControl(threshold_hz=59.85, assumed_inertia_s=4.0,
                          assumed_load_mw=75000.0, ratio=0.85)
        assert step_power_mw(ctl, -0.275, 3100.0) == pytest.approx(2337.5)

    def test_zero_rocof(self):
        ctl = StepControl(threshold_hz=59.85, assumed_inertia_s=4.0,
                          assumed_load_mw=75000.0)
        assert step_power_mw(ctl, 0.0, 3100.0) == 0.0

    def test_clamped_to_converter_limit(self):
        ctl = StepControl(threshold_hz=59.85, assumed_inertia_s=4.0,
                          assumed_load_mw=75000.0, ratio=1.0)
        assert step_power_mw(ctl, -5.0, 3100.0) == 3100.0


def walk_step(ctl, f_of_t, dt=0.005, horizon=5.0, max_mw=3100.0):
    state = StepState()
    buf_t, buf_f = [], []
    t = 0.0
    activations = []
    while t <= horizon + 1e-9:
        f = f_of_t(t)
        buf_t.append(t)
        buf_f.append(f)
        state, fired = step_update(state, ctl, f, t, buf_t, buf_f, max_mw)
        if fired:
            activations.append(t)
        t = round(t + dt, 10)
    return state, activations


class TestStepUpdate:
    def test_latches_and_activates_after_delay(self):
        ctl = StepControl(threshold_hz=59.85, assumed_inertia_s=4.0,
                          assumed_load_mw=75000.0, delay_s=0.5, ratio=0.85)
        f = lambda t: 60.0 - 0.275 * t  # crosses 59.85 between samples
        state, activations = walk_step(ctl, f)
        assert state.triggered_time == pytest.approx(0.15 / 0.275, abs=0.006)
        assert activations == [pytest.approx(state.triggered_time + 0.5, abs=1e-9)]
        assert state.measured_rocof == pytest.approx(-0.275, rel=1e-9)
        assert state.p_step_mw == pytest.approx(2337.5, rel=1e-9)

    def test_never_triggers_above_threshold(self):
        ctl = StepControl(threshold_hz=59.85, assumed_inertia_s=4.0,
                          assumed_load_mw=75000.0)
        state, activations = walk_step(ctl, lambda t: 59.9)
        assert state.triggered_time is None and not activations


class TestEnergyUpdate:
    def test_battery_never_exhausts(self):
        unit = StorageUnit("b", 3100.0, 1e12,
                           DroopControl())
        es = EnergyState()
        for k in range(12000):
            delivered, es = energy_update(unit, es, 3100.0, 0.005, k * 0.005)
            assert delivered == 3100.0
        assert not es.exhausted

    @pytest.mark.parametrize("cmd,expect_s", [(3100.0, 5.0), (1550.0, 10.0)])
    def test_exhaustion_time(self, cmd, expect_s):
        unit = StorageUnit("sc", 3100.0, 15500.0, DroopControl())
        es = EnergyState()
        dt = 0.005
        t, k = 0.0, 0
        while not es.exhausted:
            t = k * dt
            delivered, es = energy_update(unit, es, cmd, dt, t)
            k += 1
        assert es.exhaust_time == pytest.approx(expect_s, abs=2 * dt)
        # after exhaustion output collapses and energy stays within the limit
        delivered, es = energy_update(unit, es, cmd, dt, t + dt)
        assert delivered == 0.0
        assert es.used_mws <= 15500.0 * (1 + 1e-9)

    def test_withdrawal_ramp_respects_limit(self):
        unit = StorageUnit("sc", 1000.0, 3000.0, DroopControl(),
                           withdrawal_ramp_s=1.0)
        es = EnergyState()
        dt = 0.01
        total = 0.0
        prev = None
        for k in range(1000):
            delivered, es = energy_update(unit, es, 1000.0, dt, k * dt)
            if prev is not None:
                total += 0.5 * (prev + delivered) * dt
            prev = delivered
        assert es.exhausted
        assert total <= 3000.0 * (1 + 1e-9)
