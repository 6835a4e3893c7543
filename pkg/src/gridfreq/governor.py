"""Turbine-governor response, fast responsive load relays, UFLS monitoring."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .model import FrlParams, GeneratorGroup

BRANCH_INSIDE = 0
BRANCH_BELOW = -1
BRANCH_ABOVE = 1


def deadband_branch(delta_hz: float, deadband_hz: float) -> int:
    """Classify a frequency deviation against a symmetric deadband."""
    if delta_hz < -deadband_hz:
        return BRANCH_BELOW
    if delta_hz > deadband_hz:
        return BRANCH_ABOVE
    return BRANCH_INSIDE


def apply_deadband(delta_hz: float, deadband_hz: float, style: str = "offset",
                   branch: Optional[int] = None) -> float:
    """Deadband a frequency deviation.

    Inside the band the output is zero.  Outside, "offset" style subtracts
    the band edge (continuous output), while "step" style passes the raw
    deviation.  ``branch`` lets the caller pin the active region, which the
    integrator uses to hold the branch fixed across one step.
    """
    if deadband_hz < 0:
        raise ValueError(f"deadband must be non-negative, got {deadband_hz}")
    if style not in ("offset", "step"):
        raise ValueError(f"unknown deadband style '{style}'")
    if branch is None:
        branch = deadband_branch(delta_hz, deadband_hz)
    if branch == BRANCH_INSIDE:
        return 0.0
    if style == "step":
        return delta_hz
    return delta_hz + deadband_hz if branch == BRANCH_BELOW else delta_hz - deadband_hz


@dataclass
class GovernorState:
    """Internal governor states, pu on the group's capacity base.

    ``db_branch`` pins the deadband region; None means classify from the
    current signal.  The integrator pins it once per step.
    """

    lag_state: float = 0.0
    leadlag_state: float = 0.0
    db_branch: Optional[int] = None


def governor_derivatives(gov: GovernorState, speed_dev_pu: float,
                         group: GeneratorGroup, nominal_hz: float = 60.0,
                         ) -> Tuple[float, float, float]:
    """One governor's state derivatives and mechanical power deviation.

    Signal chain: speed deviation -> deadband -> droop gain -> servo lag ->
    reheat lead/lag -> clamp to [0, headroom].  The droop gain is chosen so
    the steady-state output is deadbanded-deviation / (droop * nominal_hz)
    pu of group capacity.  Negative response is not modelled; every studied
    event is under-frequency.

    Returns (d lag_state/dt, d leadlag_state/dt, mech power deviation pu).
    """
    delta_hz = speed_dev_pu * nominal_hz
    effective = apply_deadband(delta_hz, group.deadband_hz, group.deadband_style,
                               branch=gov.db_branch)
    command = -effective / (group.droop * nominal_hz)
    d_lag = (command - gov.lag_state) / group.gov_lag_s
    d_leadlag = (gov.lag_state - gov.leadlag_state) / group.reheat_lag_s
    lead_frac = group.reheat_lead_s / group.reheat_lag_s
    raw = lead_frac * gov.lag_state + (1.0 - lead_frac) * gov.leadlag_state
    headroom_pu = group.headroom_mw / group.capacity_mw
    mech_pu = min(max(raw, 0.0), headroom_pu)
    return d_lag, d_leadlag, mech_pu


@dataclass
class FrlState:
    """Relay state for one fast-responsive-load block.

    ``tripped`` is monotone: once the block sheds it never reconnects within
    the study horizon.
    """

    armed_time: Optional[float] = None
    tripped: bool = False
    trip_time: Optional[float] = None


def frl_update(state: FrlState, f_hz: float, t_s: float,
               params: FrlParams) -> Tuple[FrlState, float]:
    """Advance the relay at one step boundary and return (state, relief MW).

    The relay arms when frequency is below threshold and trips once it has
    been armed continuously for the delay.  With reset_on_recovery, recovery
    above threshold before the delay expires clears the timer; otherwise the
    timer runs to completion regardless.
    """
    if state.tripped:
        return state, params.block_mw
    armed_time = state.armed_time
    if f_hz < params.threshold_hz:
        if armed_time is None:
            armed_time = t_s
    elif params.reset_on_recovery:
        armed_time = None
    if armed_time is not None and t_s - armed_time >= params.delay_s - 1e-9:
        return FrlState(armed_time=armed_time, tripped=True, trip_time=t_s), params.block_mw
    if armed_time is not state.armed_time:
        return replace(state, armed_time=armed_time), 0.0
    return state, 0.0


def ufls_crossing(t_s, f_hz, threshold_hz: float) -> Optional[float]:
    """First time the frequency reaches the UFLS threshold, or None.

    Linearly interpolates between samples; a sample exactly on the threshold
    counts as a crossing at that sample's time.
    """
    t = np.asarray(t_s, dtype=float)
    f = np.asarray(f_hz, dtype=float)
    if t.size == 0:
        raise ValueError("trace is empty")
    below = np.nonzero(f <= threshold_hz)[0]
    if below.size == 0:
        return None
    i = int(below[0])
    if i == 0:
        return float(t[0])
    f0, f1 = f[i - 1], f[i]
    return float(t[i - 1] + (f0 - threshold_hz) / (f0 - f1) * (t[i] - t[i - 1]))


def local_minima(t_s, f_hz, start_s: float = 0.0, min_drop_hz: float = 1e-6):
    """Times and values of strict local minima of a frequency series.

    Uses a hysteresis walk: an extremum only counts once the series has
    moved ``min_drop_hz`` away from it on both sides, which rejects
    integrator-noise wiggles while keeping genuine dips.
    """
    t = np.asarray(t_s, dtype=float)
    f = np.asarray(f_hz, dtype=float)
    out = []
    descending = None  # unknown until the series moves by min_drop_hz
    ext_val = f[0] if f.size else 0.0
    ext_idx = 0
    for i in range(1, f.size):
        v = f[i]
        if descending is None:
            if v < ext_val - min_drop_hz:
                descending = True
                ext_val, ext_idx = v, i
            elif v > ext_val + min_drop_hz:
                descending = False
                ext_val, ext_idx = v, i
            continue
        if descending:
            if v < ext_val:
                ext_val, ext_idx = v, i
            elif v > ext_val + min_drop_hz:
                if t[ext_idx] >= start_s:
                    out.append((float(t[ext_idx]), float(ext_val)))
                descending = False
                ext_val, ext_idx = v, i
        else:
            if v > ext_val:
                ext_val, ext_idx = v, i
            elif v < ext_val - min_drop_hz:
                descending = True
                ext_val, ext_idx = v, i
    return out
