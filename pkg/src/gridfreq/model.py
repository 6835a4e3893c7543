"""Domain types, per-unit helpers, and fleet construction.

A scenario is a declarative description of one experiment: the system base,
a synchronous fleet template, renewable penetration, a contingency, optional
frequency-responsive devices, and integrator settings.  ``build_fleet`` turns
the template into the simulation-ready fleet by displacing synchronous
capacity with renewables and assigning which groups run active governors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union


class ValidationFailure(ValueError):
    """Scenario validation failed.  ``errors`` lists every (path, message) pair."""

    def __init__(self, errors):
        self.errors = list(errors)
        detail = "; ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(f"invalid scenario: {detail}")


def to_pu(value_mw: float, base_mva: float) -> float:
    """Convert a MW quantity to per-unit on the given MVA base."""
    if base_mva <= 0.0:
        raise ValueError(f"power base must be positive, got {base_mva}")
    return value_mw / base_mva


def from_pu(value_pu: float, base_mva: float) -> float:
    """Convert a per-unit quantity back to MW on the given MVA base."""
    if base_mva <= 0.0:
        raise ValueError(f"power base must be positive, got {base_mva}")
    return value_pu * base_mva


@dataclass(frozen=True)
class SystemParams:
    """System-wide quantities: nominal frequency, load, base, damping, UFLS."""

    load_mw: float
    ufls_hz: float
    nominal_hz: float = 60.0
    base_mva: Optional[float] = None  # defaults to load_mw
    load_damping: float = 1.0  # pu power per pu frequency, on base_mva

    def __post_init__(self):
        if self.base_mva is None:
            object.__setattr__(self, "base_mva", self.load_mw)


@dataclass(frozen=True)
class GeneratorGroup:
    """One aggregated synchronous generator group.

    ``inertia_s`` and ``headroom_mw`` are on the group's own capacity base.
    ``droop`` is the pu speed change that commands full governor output;
    ``deadband_hz`` is the one-sided half width.  The reheat lead/lag pair
    shapes the turbine response after the governor servo lag.
    """

    name: str
    capacity_mw: float
    inertia_s: float
    headroom_mw: float
    droop: float = 0.05
    deadband_hz: float = 0.036
    deadband_style: str = "offset"  # "offset" or "step"
    gov_lag_s: float = 0.5
    reheat_lead_s: float = 3.0
    reheat_lag_s: float = 10.0
    governor_enabled: bool = True


@dataclass(frozen=True)
class Contingency:
    """Generation-loss event applied as a step increase in net load."""

    magnitude_mw: float
    time_s: float = 1.0
    # The lost unit's inertia is kept in the swing sum by default; set
    # remove_inertia to subtract removed_inertia_mws (an H*capacity product)
    # from the system inertia at the event.
    remove_inertia: bool = False
    removed_inertia_mws: float = 0.0


@dataclass(frozen=True)
class FrlParams:
    """Fast responsive load: a block tripped by an under-frequency relay."""

    block_mw: float
    threshold_hz: float = 59.7
    delay_s: float = 0.5
    reset_on_recovery: bool = True


@dataclass(frozen=True)
class DroopControl:
    """Proportional frequency control for storage: deadband, filter, gain."""

    droop: float = 0.03
    deadband_hz: float = 0.017
    filter_s: float = 0.1


@dataclass(frozen=True)
class StepControl:
    """Event-size estimating step response.

    When the measured frequency falls below ``threshold_hz`` the controller
    latches, estimates the rate of decline over ``rocof_window_s``, and after
    ``delay_s`` injects ``ratio`` times the estimated contingency magnitude.
    The inertia and load used in the estimate are the operator's *assumed*
    values, which may deliberately differ from the simulated system's.
    """

    threshold_hz: float
    assumed_inertia_s: float
    assumed_load_mw: float
    delay_s: float = 0.5
    ratio: float = 0.85
    rocof_window_s: float = 0.5


@dataclass(frozen=True)
class StorageUnit:
    """One aggregated storage resource (discharge-only here).

    ``energy_mws`` bounds the deliverable energy; batteries use a value large
    enough to never bind, supercapacitors a few seconds at full power.
    ``locations`` is bookkeeping only: all output is electrically aggregated.
    """

    name: str
    max_mw: float
    energy_mws: float
    control: Union[DroopControl, StepControl]
    locations: int = 1
    withdrawal_ramp_s: float = 0.0


@dataclass(frozen=True)
class SimSettings:
    dt_s: float = 0.005
    horizon_s: float = 60.0
    mode: str = "coi"  # "coi" or "multimachine"
    # Synchronizing coefficients (pu torque per rad), square over the fleet;
    # required in multimachine mode, must be absent in coi mode.
    coupling: Optional[tuple] = None


@dataclass(frozen=True)
class StoragePreset:
    """Parameter block for a storage tactic: both control variants kept."""

    max_mw: float
    energy_mws: float
    droop: DroopControl
    step: StepControl
    locations: int = 1
    withdrawal_ramp_s: float = 0.0


@dataclass(frozen=True)
class TacticPresets:
    """Default parameter blocks used when a tactic is applied by name."""

    sg1_droop: float = 0.03
    sg2_deadband_hz: float = 0.0167
    sg3_ratio: float = 0.8
    frl: Optional[FrlParams] = None
    battery: Optional[StoragePreset] = None
    supercap: Optional[StoragePreset] = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    system: SystemParams
    fleet_template: tuple
    contingency: Contingency
    pv_penetration: float = 0.0
    wind_penetration: float = 0.0
    governor_ratio: float = 1.0
    frl: Optional[FrlParams] = None
    storage: tuple = ()
    sim: SimSettings = SimSettings()
    tactic_presets: TacticPresets = TacticPresets()
    description: str = ""


@dataclass(frozen=True)
class Fleet:
    """Scaled generator groups plus the system base they are weighted on."""

    groups: tuple
    base_mva: float

    @property
    def capacity_mw(self) -> float:
        return sum(g.capacity_mw for g in self.groups)

    @property
    def inertia_mws(self) -> float:
        """Total stored-energy weight sum(H_i * capacity_i), MW*s."""
        return sum(g.inertia_s * g.capacity_mw for g in self.groups)

    @property
    def system_inertia_s(self) -> float:
        """Equivalent inertia constant on base_mva."""
        return self.inertia_mws / self.base_mva

    @property
    def governor_ratio(self) -> float:
        cap = self.capacity_mw
        if cap == 0.0:
            return 0.0
        return sum(g.capacity_mw for g in self.groups if g.governor_enabled) / cap


def _assign_governors(groups, ratio):
    """Enable governors largest-first until the enabled share reaches ratio.

    Returns the enabled-flag list in original group order.  Ties in capacity
    fall back to template order, so the assignment is deterministic.
    """
    total = sum(g.capacity_mw for g in groups)
    order = sorted(range(len(groups)), key=lambda i: (-groups[i].capacity_mw, i))
    enabled = [False] * len(groups)
    acc = 0.0
    for i in order:
        if acc >= ratio * total - 1e-12:
            break
        enabled[i] = True
        acc += groups[i].capacity_mw
    achieved = acc / total if total else 0.0
    largest_share = max(g.capacity_mw for g in groups) / total if total else 0.0
    residual = abs(achieved - ratio)
    if residual > largest_share + 1e-12:
        raise ValidationFailure(
            [("governor_ratio",
              f"unattainable with group granularity: requested {ratio:.4f}, "
              f"achieved {achieved:.4f}, residual {residual:.4f}")]
        )
    return enabled


def build_fleet(config: ScenarioConfig) -> Fleet:
    """Scale the template by renewable penetration and assign governors.

    Renewables displace synchronous capacity uniformly: every group's
    capacity and headroom shrink by (1 - pv - wind), so the system inertia
    scales by the same factor.  Renewables themselves contribute no inertia
    and no governor response.
    """
    validate_scenario(config)
    factor = 1.0 - config.pv_penetration - config.wind_penetration
    scaled = [
        replace(g, capacity_mw=g.capacity_mw * factor, headroom_mw=g.headroom_mw * factor)
        for g in config.fleet_template
    ]
    enabled = _assign_governors(scaled, config.governor_ratio)
    groups = tuple(replace(g, governor_enabled=e) for g, e in zip(scaled, enabled))
    return Fleet(groups=groups, base_mva=config.system.base_mva)


def _check(errors, cond, path, msg):
    if not cond:
        errors.append((path, msg))


def _validate_system(errors, s: SystemParams):
    _check(errors, s.nominal_hz > 0, "system.nominal_hz", "must be positive")
    _check(errors, s.load_mw > 0, "system.load_mw", "must be positive")
    _check(errors, s.base_mva > 0, "system.base_mva", "must be positive")
    _check(errors, s.load_damping >= 0, "system.load_damping", "must be non-negative")
    _check(errors, 0 < s.ufls_hz < s.nominal_hz, "system.ufls_hz",
           f"must lie in (0, {s.nominal_hz})")


def _validate_group(errors, g: GeneratorGroup, path):
    _check(errors, g.capacity_mw > 0, f"{path}.capacity_mw", "must be positive")
    _check(errors, g.inertia_s > 0, f"{path}.inertia_s", "must be positive")
    _check(errors, g.droop > 0, f"{path}.droop", "must be positive")
    _check(errors, g.deadband_hz >= 0, f"{path}.deadband_hz", "must be non-negative")
    _check(errors, g.deadband_style in ("offset", "step"), f"{path}.deadband_style",
           "must be 'offset' or 'step'")
    _check(errors, g.gov_lag_s > 0, f"{path}.gov_lag_s", "must be positive")
    _check(errors, g.reheat_lead_s >= 0, f"{path}.reheat_lead_s", "must be non-negative")
    _check(errors, g.reheat_lag_s > 0, f"{path}.reheat_lag_s", "must be positive")
    _check(errors, 0 <= g.headroom_mw <= g.capacity_mw, f"{path}.headroom_mw",
           "must lie in [0, capacity_mw]")


def _validate_storage(errors, unit: StorageUnit, path, nominal_hz):
    _check(errors, unit.max_mw > 0, f"{path}.max_mw", "must be positive")
    _check(errors, unit.energy_mws > 0, f"{path}.energy_mws", "must be positive")
    _check(errors, unit.locations >= 1, f"{path}.locations", "must be at least 1")
    _check(errors, unit.withdrawal_ramp_s >= 0, f"{path}.withdrawal_ramp_s",
           "must be non-negative")
    ctl = unit.control
    if isinstance(ctl, DroopControl):
        _check(errors, ctl.droop > 0, f"{path}.control.droop", "must be positive")
        _check(errors, ctl.deadband_hz >= 0, f"{path}.control.deadband_hz",
               "must be non-negative")
        _check(errors, ctl.filter_s > 0, f"{path}.control.filter_s", "must be positive")
    elif isinstance(ctl, StepControl):
        _check(errors, 0 < ctl.ratio <= 1, f"{path}.control.ratio", "must lie in (0, 1]")
        _check(errors, ctl.delay_s >= 0, f"{path}.control.delay_s", "must be non-negative")
        _check(errors, ctl.rocof_window_s > 0, f"{path}.control.rocof_window_s",
               "must be positive")
        _check(errors, 0 < ctl.threshold_hz < nominal_hz, f"{path}.control.threshold_hz",
               f"must lie in (0, {nominal_hz})")
        _check(errors, ctl.assumed_inertia_s > 0, f"{path}.control.assumed_inertia_s",
               "must be positive")
        _check(errors, ctl.assumed_load_mw > 0, f"{path}.control.assumed_load_mw",
               "must be positive")
    else:
        errors.append((f"{path}.control", f"unknown control type {type(ctl).__name__}"))


def validate_scenario(config: ScenarioConfig) -> ScenarioConfig:
    """Check every structural invariant, reporting all violations at once.

    Returns the config unchanged on success; raises ValidationFailure with
    the full (path, message) list otherwise.  Anything that passes here is
    accepted by the simulator; there are no late validation failures.
    """
    errors = []
    _validate_system(errors, config.system)

    if not config.fleet_template:
        errors.append(("fleet_template", "must contain at least one group"))
    names = set()
    for i, g in enumerate(config.fleet_template):
        _validate_group(errors, g, f"fleet_template[{i}]")
        if g.name in names:
            errors.append((f"fleet_template[{i}].name", f"duplicate group name '{g.name}'"))
        names.add(g.name)

    _check(errors, config.pv_penetration >= 0, "pv_penetration", "must be non-negative")
    _check(errors, config.wind_penetration >= 0, "wind_penetration", "must be non-negative")
    _check(errors, config.pv_penetration + config.wind_penetration < 1.0,
           "pv_penetration", "pv + wind penetration must be below 1")
    _check(errors, 0 <= config.governor_ratio <= 1, "governor_ratio",
           "must lie in [0, 1]")

    c = config.contingency
    _check(errors, c.magnitude_mw >= 0, "contingency.magnitude_mw", "must be non-negative")
    _check(errors, c.time_s >= 0, "contingency.time_s", "must be non-negative")
    _check(errors, c.removed_inertia_mws >= 0, "contingency.removed_inertia_mws",
           "must be non-negative")
    if c.remove_inertia and config.fleet_template:
        scaled = ((1.0 - config.pv_penetration - config.wind_penetration)
                  * sum(g.inertia_s * g.capacity_mw for g in config.fleet_template))
        _check(errors, c.removed_inertia_mws < scaled,
               "contingency.removed_inertia_mws",
               f"must stay below the committed stored energy ({scaled:g} MWs)")

    if config.frl is not None:
        f = config.frl
        _check(errors, f.block_mw > 0, "frl.block_mw", "must be positive")
        _check(errors, 0 < f.threshold_hz < config.system.nominal_hz, "frl.threshold_hz",
               f"must lie in (0, {config.system.nominal_hz})")
        _check(errors, f.delay_s >= 0, "frl.delay_s", "must be non-negative")

    unit_names = set()
    for i, unit in enumerate(config.storage):
        _validate_storage(errors, unit, f"storage[{i}]", config.system.nominal_hz)
        if unit.name in unit_names:
            errors.append((f"storage[{i}].name", f"duplicate storage name '{unit.name}'"))
        unit_names.add(unit.name)

    sim = config.sim
    _check(errors, sim.dt_s > 0, "sim.dt_s", "must be positive")
    _check(errors, sim.horizon_s > sim.dt_s, "sim.horizon_s", "must exceed dt_s")
    _check(errors, sim.mode in ("coi", "multimachine"), "sim.mode",
           "must be 'coi' or 'multimachine'")
    if sim.mode == "multimachine":
        k = sim.coupling
        n = len(config.fleet_template)
        if k is None:
            errors.append(("sim.coupling", "required in multimachine mode"))
        elif len(k) != n or any(len(row) != n for row in k):
            errors.append(("sim.coupling", f"must be a {n}x{n} matrix"))
    elif sim.coupling is not None:
        errors.append(("sim.coupling", "only allowed in multimachine mode"))

    # Governor assignment feasibility is part of validation so that
    # build_fleet never fails on a validated config.
    if not errors and config.fleet_template and 0 <= config.governor_ratio <= 1:
        try:
            _assign_governors(list(config.fleet_template), config.governor_ratio)
        except ValidationFailure as exc:
            errors.extend(exc.errors)

    if errors:
        raise ValidationFailure(errors)
    return config
