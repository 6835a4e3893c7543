"""Fixed-step deterministic integration of the frequency-response model.

Continuous dynamics (swing, governor lags, storage filters) advance with
classical RK4.  Everything discrete -- the contingency step, relay arming and
trips, step-response latches, deadband branch selection, energy exhaustion --
is evaluated once per step boundary and held fixed across the four stages, so
the smooth kernel never sees a discontinuity and event timing error stays
below one step.

All of the numeric work lives in one kernel (``_eval``) shared by the RK4
stages, the recorded samples, and the public ``derivatives`` operation, so
the trace, the integrator, and the energy-balance bookkeeping can never
disagree about the model equations.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

try:
    from numba import njit
except ImportError:  # plain-Python fallback; identical arithmetic, just slower
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

from .governor import FrlState, deadband_branch, frl_update
from .model import (DroopControl, Fleet, ScenarioConfig, StepControl,
                    validate_scenario)
from .storage import EnergyState, StepState, step_update

_EVENT_EPS = 1e-9


class SimulationError(RuntimeError):
    pass


@dataclass
class Event:
    time_s: float
    kind: str
    detail: str
    data: Optional[dict] = None


@dataclass
class Trace:
    """Uniform-grid simulation output.

    ``f_groups_hz`` is (n, G); ``device_mw`` is (n, D) with columns named by
    ``device_names`` (governor mechanical deviations per group, storage
    outputs per unit, then fast-load relief when configured).
    """

    times: np.ndarray
    f_coi_hz: np.ndarray
    group_names: List[str]
    f_groups_hz: np.ndarray
    device_names: List[str]
    device_mw: np.ndarray
    events: List[Event]
    meta: dict


@njit(cache=True)
def _eval(x, t, dpl_pu, frl_mw,
          mode, n_om, f_n, two_pi_fn, d_load, inv_sbase,
          inv_2h, a_w, coi_w, kmat,
          gov_grp, gov_inv_rfn, gov_db, gov_style, gov_branch,
          gov_inv_tlag, gov_inv_tll, gov_lead_frac, gov_headroom_pu,
          gov_cap_pu, gov_cap_mw,
          st_is_droop, st_filt_idx, st_gain, st_db, st_branch, st_inv_tf,
          st_pmax, st_cmd_step, st_gate_a, st_gate_b,
          off_gov, off_filt,
          pm_buf, dx, pow_mw):
    n_gov = gov_grp.shape[0]
    n_st = st_is_droop.shape[0]
    n_grp = pow_mw.shape[0] - n_st - 1

    for i in range(n_grp):
        pow_mw[i] = 0.0
    for i in range(n_om):
        pm_buf[i] = 0.0

    coi_dev = 0.0
    for i in range(n_om):
        coi_dev += coi_w[i] * x[i]
    f_dev_hz = coi_dev * f_n

    for j in range(n_gov):
        om = gov_grp[j] if mode == 1 else 0
        dfj = x[om] * f_n
        br = gov_branch[j]
        if br == 0:
            eff = 0.0
        elif gov_style[j] == 1:
            eff = dfj
        elif br == -1:
            eff = dfj + gov_db[j]
        else:
            eff = dfj - gov_db[j]
        cmd = -eff * gov_inv_rfn[j]
        lag = x[off_gov + j]
        ll = x[off_gov + n_gov + j]
        dx[off_gov + j] = (cmd - lag) * gov_inv_tlag[j]
        dx[off_gov + n_gov + j] = (lag - ll) * gov_inv_tll[j]
        y = gov_lead_frac[j] * lag + (1.0 - gov_lead_frac[j]) * ll
        if y < 0.0:
            y = 0.0
        if y > gov_headroom_pu[j]:
            y = gov_headroom_pu[j]
        pm_buf[om] += y * gov_cap_pu[j]
        pow_mw[gov_grp[j]] = y * gov_cap_mw[j]

    p_inj_mw = frl_mw
    for u in range(n_st):
        gate = st_gate_a[u] - st_gate_b[u] * t
        if gate > 1.0:
            gate = 1.0
        if gate < 0.0:
            gate = 0.0
        if st_is_droop[u] == 1:
            fi = off_filt + st_filt_idx[u]
            filt = x[fi]
            br = st_branch[u]
            if br == 0:
                eff = 0.0
            elif br == -1:
                eff = f_dev_hz + st_db[u]
            else:
                eff = f_dev_hz - st_db[u]
            dx[fi] = (eff - filt) * st_inv_tf[u]
            cmd = -filt * st_gain[u]
            if cmd < 0.0:
                cmd = 0.0
            if cmd > st_pmax[u]:
                cmd = st_pmax[u]
        else:
            cmd = st_cmd_step[u]
        delivered = cmd * gate
        pow_mw[n_grp + u] = delivered
        p_inj_mw += delivered
    pow_mw[n_grp + n_st] = frl_mw
    p_inj_pu = p_inj_mw * inv_sbase

    if mode == 0:
        dx[0] = (pm_buf[0] + p_inj_pu - dpl_pu - d_load * x[0]) * inv_2h[0]
    else:
        for i in range(n_om):
            flow = 0.0
            for k in range(n_om):
                flow += kmat[i, k] * (x[n_om + i] - x[n_om + k])
            acc = (pm_buf[i] - flow - a_w[i] * (dpl_pu - p_inj_pu)
                   - a_w[i] * d_load * x[i])
            dx[i] = acc * inv_2h[i]
            dx[n_om + i] = two_pi_fn * x[i]


@njit(cache=True)
def _rk4_step(x, t, dt, dpl_pu, frl_mw,
              mode, n_om, f_n, two_pi_fn, d_load, inv_sbase,
              inv_2h, a_w, coi_w, kmat,
              gov_grp, gov_inv_rfn, gov_db, gov_style, gov_branch,
              gov_inv_tlag, gov_inv_tll, gov_lead_frac, gov_headroom_pu,
              gov_cap_pu, gov_cap_mw,
              st_is_droop, st_filt_idx, st_gain, st_db, st_branch, st_inv_tf,
              st_pmax, st_cmd_step, st_gate_a, st_gate_b,
              off_gov, off_filt,
              pm_buf, k1, k2, k3, k4, xa, pow_scratch):
    n = x.shape[0]
    _eval(x, t, dpl_pu, frl_mw, mode, n_om, f_n, two_pi_fn, d_load, inv_sbase,
          inv_2h, a_w, coi_w, kmat, gov_grp, gov_inv_rfn, gov_db, gov_style,
          gov_branch, gov_inv_tlag, gov_inv_tll, gov_lead_frac, gov_headroom_pu,
          gov_cap_pu, gov_cap_mw, st_is_droop, st_filt_idx, st_gain, st_db,
          st_branch, st_inv_tf, st_pmax, st_cmd_step, st_gate_a, st_gate_b,
          off_gov, off_filt, pm_buf, k1, pow_scratch)
    half = 0.5 * dt
    for i in range(n):
        xa[i] = x[i] + half * k1[i]
    _eval(xa, t + half, dpl_pu, frl_mw, mode, n_om, f_n, two_pi_fn, d_load,
          inv_sbase, inv_2h, a_w, coi_w, kmat, gov_grp, gov_inv_rfn, gov_db,
          gov_style, gov_branch, gov_inv_tlag, gov_inv_tll, gov_lead_frac,
          gov_headroom_pu, gov_cap_pu, gov_cap_mw, st_is_droop, st_filt_idx,
          st_gain, st_db, st_branch, st_inv_tf, st_pmax, st_cmd_step,
          st_gate_a, st_gate_b, off_gov, off_filt, pm_buf, k2, pow_scratch)
    for i in range(n):
        xa[i] = x[i] + half * k2[i]
    _eval(xa, t + half, dpl_pu, frl_mw, mode, n_om, f_n, two_pi_fn, d_load,
          inv_sbase, inv_2h, a_w, coi_w, kmat, gov_grp, gov_inv_rfn, gov_db,
          gov_style, gov_branch, gov_inv_tlag, gov_inv_tll, gov_lead_frac,
          gov_headroom_pu, gov_cap_pu, gov_cap_mw, st_is_droop, st_filt_idx,
          st_gain, st_db, st_branch, st_inv_tf, st_pmax, st_cmd_step,
          st_gate_a, st_gate_b, off_gov, off_filt, pm_buf, k3, pow_scratch)
    for i in range(n):
        xa[i] = x[i] + dt * k3[i]
    _eval(xa, t + dt, dpl_pu, frl_mw, mode, n_om, f_n, two_pi_fn, d_load,
          inv_sbase, inv_2h, a_w, coi_w, kmat, gov_grp, gov_inv_rfn, gov_db,
          gov_style, gov_branch, gov_inv_tlag, gov_inv_tll, gov_lead_frac,
          gov_headroom_pu, gov_cap_pu, gov_cap_mw, st_is_droop, st_filt_idx,
          st_gain, st_db, st_branch, st_inv_tf, st_pmax, st_cmd_step,
          st_gate_a, st_gate_b, off_gov, off_filt, pm_buf, k4, pow_scratch)
    sixth = dt / 6.0
    for i in range(n):
        x[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


class Runtime:
    """Precompiled scenario: parameter arrays, buffers, and index maps."""

    def __init__(self, fleet: Fleet, config: ScenarioConfig):
        validate_scenario(config)
        sysp = config.system
        sim = config.sim
        groups = fleet.groups
        self.fleet = fleet
        self.config = config
        self.dt = sim.dt_s
        self.n_samples = int(math.ceil(sim.horizon_s / sim.dt_s - 1e-9)) + 1
        self.f_n = sysp.nominal_hz
        self.s_base = sysp.base_mva
        self.mode = 0 if sim.mode == "coi" else 1

        n_grp = len(groups)
        self.group_names = [g.name for g in groups]
        self.n_om = n_grp if self.mode == 1 else 1

        caps = np.array([g.capacity_mw for g in groups])
        h_mws = np.array([g.inertia_s * g.capacity_mw for g in groups])
        self.h_weights_mws = h_mws
        if self.mode == 0:
            inv_2h = np.array([self.s_base / (2.0 * h_mws.sum())])
            a_w = np.ones(1)
            coi_w = np.ones(1)
            kmat = np.zeros((1, 1))
        else:
            inv_2h = self.s_base / (2.0 * h_mws)
            a_w = caps / caps.sum()
            coi_w = h_mws / h_mws.sum()
            kmat = np.array(sim.coupling, dtype=float)

        gov_idx = [i for i, g in enumerate(groups) if g.governor_enabled]
        n_gov = len(gov_idx)
        self.gov_idx = gov_idx
        gg = [groups[i] for i in gov_idx]
        self.off_gov = self.n_om * (2 if self.mode == 1 else 1)
        self.off_filt = self.off_gov + 2 * n_gov

        units = config.storage
        self.units = units
        droop_pos = {}
        for u, unit in enumerate(units):
            if isinstance(unit.control, DroopControl):
                droop_pos[u] = len(droop_pos)
        self.n_x = self.off_filt + len(droop_pos)

        # Per-run discrete state lives in these arrays; init_state re-arms
        # them, so one Runtime serves one running simulation at a time.
        self.gov_branch = np.zeros(n_gov, dtype=np.int64)
        self.st_branch = np.zeros(len(units), dtype=np.int64)
        self.st_cmd_step = np.zeros(len(units))
        self.st_gate_a = np.ones(len(units))
        self.st_gate_b = np.zeros(len(units))
        self.inv_2h = inv_2h  # mutated if the contingency removes inertia
        self.inv_2h0 = inv_2h.copy()
        self.coi_w = coi_w
        self.gov_db = np.array([g.deadband_hz for g in gg])
        self.st_db = np.array([u.control.deadband_hz
                               if isinstance(u.control, DroopControl) else 0.0
                               for u in units])

        self.static = (
            self.mode, self.n_om, self.f_n, 2.0 * math.pi * self.f_n,
            sysp.load_damping, 1.0 / self.s_base,
            self.inv_2h, a_w, coi_w, kmat,
            np.array(gov_idx, dtype=np.int64),
            np.array([1.0 / (g.droop * self.f_n) for g in gg]),
            self.gov_db,
            np.array([0 if g.deadband_style == "offset" else 1 for g in gg],
                     dtype=np.int64),
            self.gov_branch,
            np.array([1.0 / g.gov_lag_s for g in gg]),
            np.array([1.0 / g.reheat_lag_s for g in gg]),
            np.array([g.reheat_lead_s / g.reheat_lag_s for g in gg]),
            np.array([g.headroom_mw / g.capacity_mw for g in gg]),
            np.array([g.capacity_mw / self.s_base for g in gg]),
            np.array([g.capacity_mw for g in gg]),
            np.array([1 if isinstance(u.control, DroopControl) else 0
                      for u in units], dtype=np.int64),
            np.array([droop_pos.get(u, -1) for u in range(len(units))],
                     dtype=np.int64),
            np.array([u.max_mw / (u.control.droop * self.f_n)
                      if isinstance(u.control, DroopControl) else 0.0
                      for u in units]),
            self.st_db,
            self.st_branch,
            np.array([1.0 / u.control.filter_s
                      if isinstance(u.control, DroopControl) else 0.0
                      for u in units]),
            np.array([u.max_mw for u in units]),
            self.st_cmd_step, self.st_gate_a, self.st_gate_b,
            self.off_gov, self.off_filt,
        )
        self.bufs = tuple(np.zeros(n) for n in
                          (self.n_om, self.n_x, self.n_x, self.n_x, self.n_x,
                           self.n_x, n_grp + len(units) + 1))
        self.pow_size = n_grp + len(units) + 1

        self.contingency_pu = config.contingency.magnitude_mw / self.s_base
        self.device_names = ([f"gov_{g.name}" for g in groups]
                             + [f"storage_{u.name}" for u in units]
                             + (["frl"] if config.frl is not None else []))
        self.n_devices = len(self.device_names)

        windows = [u.control.rocof_window_s for u in units
                   if isinstance(u.control, StepControl)]
        self.buffer_len = (int(math.ceil(max(windows) / self.dt)) + 3
                           if windows else 0)

    def coi_dev_pu(self, x) -> float:
        if self.mode == 0:
            return float(x[0])
        return float(np.dot(self.coi_w, x[:self.n_om]))

    def meta(self) -> dict:
        cfg = self.config
        return {
            "name": cfg.name,
            "dt_s": self.dt,
            "horizon_s": cfg.sim.horizon_s,
            "mode": cfg.sim.mode,
            "nominal_hz": self.f_n,
            "base_mva": self.s_base,
            "load_damping": cfg.system.load_damping,
            "system_inertia_s": self.fleet.system_inertia_s,
            "contingency_mw": cfg.contingency.magnitude_mw,
            "contingency_time_s": cfg.contingency.time_s,
            "ufls_hz": cfg.system.ufls_hz,
        }


@dataclass
class SimState:
    """Everything the integrator owns at one boundary.

    The continuous states live in ``x``; the rest is discrete and only
    changes at step boundaries.
    """

    t: float = 0.0
    k: int = 0
    x: np.ndarray = None
    contingency_applied: bool = False
    dpl_pu: float = 0.0
    frl: Optional[FrlState] = None
    frl_relief_mw: float = 0.0
    step_states: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    prev_delivered: np.ndarray = None
    buffer_t: deque = None
    buffer_f: deque = None
    events: list = field(default_factory=list)


def init_state(rt: Runtime) -> SimState:
    """Pre-contingency equilibrium: every deviation exactly zero.

    Also re-arms the runtime's per-run arrays, so a Runtime can be reused
    for sequential runs.
    """
    rt.gov_branch[:] = 0
    rt.st_branch[:] = 0
    rt.st_cmd_step[:] = 0.0
    rt.st_gate_a[:] = 1.0
    rt.st_gate_b[:] = 0.0
    rt.inv_2h[:] = rt.inv_2h0
    state = SimState(x=np.zeros(rt.n_x))
    state.frl = FrlState() if rt.config.frl is not None else None
    state.step_states = [StepState() if isinstance(u.control, StepControl) else None
                         for u in rt.units]
    state.energy = [EnergyState() for _ in rt.units]
    state.prev_delivered = np.zeros(len(rt.units))
    if rt.buffer_len:
        state.buffer_t = deque(maxlen=rt.buffer_len)
        state.buffer_f = deque(maxlen=rt.buffer_len)
    return state


def _storage_snapshot(state: SimState, rt: Runtime):
    """Delivered MW per unit at the current boundary, before any flips."""
    dx, pow_mw = rt.bufs[1], rt.bufs[6]
    _eval(state.x, state.t, state.dpl_pu, state.frl_relief_mw,
          *rt.static, rt.bufs[0], dx, pow_mw)
    n_grp = len(rt.group_names)
    return pow_mw[n_grp:n_grp + len(rt.units)]


def step_boundary(state: SimState, rt: Runtime):
    """Apply boundary-time discrete transitions and record one sample.

    Returns (f_coi_hz, device power row).  The returned row aliases an
    internal buffer; callers must copy what they keep.
    """
    t = state.t
    x = state.x
    if not np.isfinite(x).all():
        raise SimulationError(f"non-finite state at t={t:.6g}s")

    cont = rt.config.contingency
    if not state.contingency_applied and t >= cont.time_s - _EVENT_EPS:
        state.contingency_applied = True
        state.dpl_pu = rt.contingency_pu
        if cont.remove_inertia and cont.removed_inertia_mws > 0.0:
            total = rt.h_weights_mws.sum()
            factor = 1.0 - cont.removed_inertia_mws / total
            rt.inv_2h /= factor
        state.events.append(Event(
            t, "contingency", f"step load increase {cont.magnitude_mw:g} MW",
            {"magnitude_mw": cont.magnitude_mw}))

    # Energy bookkeeping uses the pre-transition output as the left limit
    # of the coming trapezoid panel.
    if rt.units and state.k > 0:
        delivered_now = _storage_snapshot(state, rt)
        for u in range(len(rt.units)):
            state.energy[u].used_mws += 0.5 * (state.prev_delivered[u]
                                               + delivered_now[u]) * rt.dt

    dev = rt.coi_dev_pu(x)
    f_coi = rt.f_n * (1.0 + dev)

    if state.buffer_t is not None:
        state.buffer_t.append(t)
        state.buffer_f.append(f_coi)

    if state.frl is not None:
        was_tripped = state.frl.tripped
        state.frl, relief = frl_update(state.frl, f_coi, t, rt.config.frl)
        state.frl_relief_mw = relief
        if state.frl.tripped and not was_tripped:
            state.events.append(Event(
                t, "frl_trip", f"shed {relief:g} MW below "
                f"{rt.config.frl.threshold_hz:g} Hz",
                {"relief_mw": relief}))

    for u, unit in enumerate(rt.units):
        ss = state.step_states[u]
        if ss is None or ss.active:
            continue
        was_triggered = ss.triggered_time is not None
        ss, activated = step_update(ss, unit.control, f_coi, t,
                                    state.buffer_t, state.buffer_f,
                                    unit.max_mw, rt.f_n)
        state.step_states[u] = ss
        if ss.triggered_time is not None and not was_triggered:
            state.events.append(Event(
                t, "storage_step_trigger",
                f"{unit.name} latched below {unit.control.threshold_hz:g} Hz",
                {"unit": unit.name}))
        if activated:
            rt.st_cmd_step[u] = ss.p_step_mw
            state.events.append(Event(
                t, "storage_step_active",
                f"{unit.name} injecting {ss.p_step_mw:.1f} MW "
                f"(rocof {ss.measured_rocof:.4f} Hz/s)",
                {"unit": unit.name, "p_step_mw": ss.p_step_mw,
                 "rocof_hz_per_s": ss.measured_rocof}))

    # Deadband branches freeze here for the whole step.
    if rt.gov_idx:
        for j, gi in enumerate(rt.gov_idx):
            om = gi if rt.mode == 1 else 0
            dfj = x[om] * rt.f_n
            rt.gov_branch[j] = deadband_branch(dfj, rt.gov_db[j])
    if rt.units:
        f_dev_hz = dev * rt.f_n
        for u in range(len(rt.units)):
            rt.st_branch[u] = deadband_branch(f_dev_hz, rt.st_db[u])

    # Exhaustion lookahead with the post-transition command.
    if rt.units:
        cmds = _storage_snapshot(state, rt)
        for u, unit in enumerate(rt.units):
            es = state.energy[u]
            if not es.exhausted:
                cmd = cmds[u]  # gate is 1 before exhaustion
                reserve = 0.5 * cmd * unit.withdrawal_ramp_s
                if (es.used_mws + cmd * rt.dt + reserve
                        > unit.energy_mws * (1.0 + 1e-9)):
                    es.exhausted = True
                    es.exhaust_time = t
                    if unit.withdrawal_ramp_s > 0.0:
                        rt.st_gate_a[u] = 1.0 + t / unit.withdrawal_ramp_s
                        rt.st_gate_b[u] = 1.0 / unit.withdrawal_ramp_s
                    else:
                        rt.st_gate_a[u] = 0.0
                        rt.st_gate_b[u] = 0.0
                    state.events.append(Event(
                        t, "storage_exhausted",
                        f"{unit.name} energy limit {unit.energy_mws:g} MWs reached",
                        {"unit": unit.name, "used_mws": es.used_mws}))
            elif es.used_mws >= unit.energy_mws and rt.st_gate_a[u] != 0.0:
                rt.st_gate_a[u] = 0.0
                rt.st_gate_b[u] = 0.0

    dx, pow_mw = rt.bufs[1], rt.bufs[6]
    _eval(x, t, state.dpl_pu, state.frl_relief_mw, *rt.static,
          rt.bufs[0], dx, pow_mw)
    n_grp = len(rt.group_names)
    state.prev_delivered[:] = pow_mw[n_grp:n_grp + len(rt.units)]
    return f_coi, pow_mw


def advance(state: SimState, rt: Runtime) -> None:
    """One RK4 step with all discrete state held fixed."""
    _rk4_step(state.x, state.t, rt.dt, state.dpl_pu, state.frl_relief_mw,
              *rt.static, rt.bufs[0], rt.bufs[1], rt.bufs[2], rt.bufs[3],
              rt.bufs[4], rt.bufs[5], rt.bufs[6])
    state.k += 1
    state.t = state.k * rt.dt


def step(state: SimState, rt: Runtime) -> SimState:
    """Boundary transitions followed by one RK4 advance (in place)."""
    step_boundary(state, rt)
    advance(state, rt)
    return state


def derivatives(state: SimState, rt: Runtime):
    """State derivative and device power breakdown at the current state.

    Uses the same kernel as the integrator, with the currently frozen
    discrete flags; no transitions are applied.  Returns (dx, device MW).
    """
    dx = np.zeros(rt.n_x)
    pow_mw = np.zeros(rt.pow_size)
    _eval(state.x, state.t, state.dpl_pu, state.frl_relief_mw, *rt.static,
          np.zeros(rt.n_om), dx, pow_mw)
    return dx, pow_mw[:rt.n_devices]


def simulate(fleet: Fleet, config: ScenarioConfig) -> Trace:
    """Run one scenario and return its trace.

    The pre-contingency state is the exact equilibrium; the contingency is
    applied as a load step at the first boundary at or after its time.
    Identical inputs produce bit-identical traces.
    """
    rt = Runtime(fleet, config)
    state = init_state(rt)
    n = rt.n_samples
    n_grp = len(rt.group_names)

    times = np.arange(n) * rt.dt
    f_coi = np.empty(n)
    f_groups = np.empty((n, n_grp))
    device_mw = np.empty((n, rt.n_devices))

    mm = rt.mode == 1
    for k in range(n):
        f, pow_mw = step_boundary(state, rt)
        f_coi[k] = f
        device_mw[k, :] = pow_mw[:rt.n_devices]
        if mm:
            f_groups[k, :] = rt.f_n * (1.0 + state.x[:n_grp])
        if k < n - 1:
            advance(state, rt)

    if not mm:
        f_groups[:, :] = f_coi[:, None]

    return Trace(times=times, f_coi_hz=f_coi, group_names=rt.group_names,
                 f_groups_hz=f_groups, device_names=rt.device_names,
                 device_mw=device_mw, events=state.events, meta=rt.meta())
