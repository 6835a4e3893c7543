"""Storage frequency support: droop control, step response, energy accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .governor import apply_deadband
from .model import DroopControl, StepControl, StorageUnit


def estimate_rocof(t_s, f_hz) -> float:
    """Least-squares slope of frequency vs time, Hz/s.

    Regression over the window rather than an endpoint difference so that
    zero-mean sample noise (integrator micro-oscillation in multimachine
    runs) cancels instead of leaking into the estimate.
    """
    t = np.asarray(t_s, dtype=float)
    f = np.asarray(f_hz, dtype=float)
    if t.size < 2:
        raise ValueError(f"rocof window too short: {t.size} sample(s), need at least 2")
    tc = t - t.mean()
    denom = float(np.dot(tc, tc))
    if denom == 0.0:
        raise ValueError("rocof window has zero time span")
    return float(np.dot(tc, f - f.mean()) / denom)


def droop_command(ctl: DroopControl, filter_state_hz: float, f_hz: float,
                  unit: StorageUnit, nominal_hz: float = 60.0,
                  branch: Optional[int] = None) -> Tuple[float, float]:
    """Filter-state derivative and commanded output for droop control.

    The deviation is deadbanded (offset style), low-pass filtered, then
    scaled so full output corresponds to a deviation of droop * nominal_hz.
    Discharge only: the command is clamped to [0, max_mw].
    """
    delta_hz = f_hz - nominal_hz
    effective = apply_deadband(delta_hz, ctl.deadband_hz, "offset", branch=branch)
    d_filter = (effective - filter_state_hz) / ctl.filter_s
    power = -filter_state_hz * unit.max_mw / (ctl.droop * nominal_hz)
    return d_filter, min(max(power, 0.0), unit.max_mw)


def step_power_mw(ctl: StepControl, rocof_hz_s: float, max_mw: float,
                  nominal_hz: float = 60.0) -> float:
    """Step-response magnitude from an estimated decline rate.

    The contingency size is inferred from the assumed system inertia and
    load; the injected step is ``ratio`` times that inference, clamped to
    the unit's converter limit.
    """
    estimated_mw = (2.0 * ctl.assumed_inertia_s * abs(rocof_hz_s) / nominal_hz
                    * ctl.assumed_load_mw)
    return min(ctl.ratio * estimated_mw, max_mw)


@dataclass
class StepState:
    """Latch for one step-response controller."""

    triggered_time: Optional[float] = None
    active: bool = False
    measured_rocof: Optional[float] = None
    p_step_mw: float = 0.0


def step_update(state: StepState, ctl: StepControl, f_hz: float, t_s: float,
                window_t, window_f, max_mw: float,
                nominal_hz: float = 60.0) -> Tuple[StepState, bool]:
    """Advance the step-response latch at one step boundary.

    ``window_t``/``window_f`` hold the recent frequency samples (spanning at
    least the ROCOF window).  The trigger latches on the first threshold
    crossing; after the ride-through delay the output magnitude is computed
    from the samples between the trigger and activation and held thereafter.
    Returns (state, activated_now).
    """
    if state.active:
        return state, False
    if state.triggered_time is None:
        if f_hz < ctl.threshold_hz:
            state.triggered_time = t_s
        else:
            return state, False
    if t_s - state.triggered_time < ctl.delay_s - 1e-9:
        return state, False
    t0 = max(state.triggered_time, t_s - ctl.rocof_window_s)
    pairs = [(tv, fv) for tv, fv in zip(window_t, window_f) if tv >= t0 - 1e-9]
    if len(pairs) < 2:
        pairs = list(zip(window_t, window_f))[-2:]
    ts = [p[0] for p in pairs]
    fs = [p[1] for p in pairs]
    state.measured_rocof = estimate_rocof(ts, fs)
    state.p_step_mw = step_power_mw(ctl, state.measured_rocof, max_mw, nominal_hz)
    state.active = True
    return state, True


@dataclass
class EnergyState:
    """Delivered-energy accounting and withdrawal for one unit."""

    used_mws: float = 0.0
    exhausted: bool = False
    exhaust_time: Optional[float] = None

    def gate(self, t_s: float, ramp_s: float) -> float:
        """Output multiplier: 1 while energy remains, ramping to 0 after."""
        if not self.exhausted:
            return 1.0
        if ramp_s <= 0.0:
            return 0.0
        return max(0.0, 1.0 - (t_s - self.exhaust_time) / ramp_s)


def energy_update(unit: StorageUnit, energy: EnergyState, commanded_mw: float,
                  dt_s: float, t_s: float = 0.0) -> Tuple[float, EnergyState]:
    """Deliver one step of commanded power against the energy limit.

    Full command is delivered while the step's energy fits inside the limit
    (with a reserve for the withdrawal ramp when one is configured); at
    exhaustion the output collapses to zero, or ramps down over
    withdrawal_ramp_s.  Returns (delivered MW, updated state).
    """
    if not energy.exhausted:
        reserve = 0.5 * commanded_mw * unit.withdrawal_ramp_s
        if energy.used_mws + commanded_mw * dt_s + reserve > unit.energy_mws * (1 + 1e-9):
            energy.exhausted = True
            energy.exhaust_time = t_s
    delivered = commanded_mw * energy.gate(t_s, unit.withdrawal_ramp_s)
    if energy.used_mws + delivered * dt_s > unit.energy_mws:
        delivered = 0.0
    energy.used_mws += delivered * dt_s
    return delivered, energy
