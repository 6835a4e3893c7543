"""Mitigation tactics as sparse overrides on a base scenario."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

from .engine import Trace, simulate
from .metrics import (DEFAULT_SETTLE_WINDOW_S, FrequencyMetrics,
                      metrics_from_trace)
from .model import (FrlParams, ScenarioConfig, StoragePreset, StorageUnit,
                    build_fleet, validate_scenario)

TACTIC_KINDS = ("baseline", "SG1", "SG2", "SG3", "FRL", "ES1", "ES2")

# Fields a tactic is allowed to touch; anything else is a config mistake.
_LEGAL_OVERRIDES = {
    "baseline": set(),
    "SG1": {"droop"},
    "SG2": {"deadband_hz"},
    "SG3": {"governor_ratio"},
    "FRL": {"block_mw", "threshold_hz", "delay_s", "reset_on_recovery"},
    "ES1": {"max_mw", "energy_mws", "locations", "withdrawal_ramp_s",
            "control.droop", "control.deadband_hz", "control.filter_s",
            "control.threshold_hz", "control.delay_s", "control.ratio",
            "control.rocof_window_s", "control.assumed_inertia_s",
            "control.assumed_load_mw"},
}
_LEGAL_OVERRIDES["ES2"] = _LEGAL_OVERRIDES["ES1"]


class TacticError(ValueError):
    pass


@dataclass(frozen=True)
class TacticSpec:
    """One tactic: a kind, an optional storage-control variant, overrides.

    ``overrides`` maps tactic-local field names (see _LEGAL_OVERRIDES) onto
    replacement values; unset fields come from the scenario's presets.
    """

    kind: str
    variant: Optional[str] = None  # "droop" or "step" for ES tactics
    overrides: Dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.kind if self.variant is None else f"{self.kind}:{self.variant}"


def parse_tactic_token(token: str) -> TacticSpec:
    """Parse a CLI token like ``SG1`` or ``ES1:step``."""
    token = token.strip()
    kind, sep, variant = token.partition(":")
    if kind not in TACTIC_KINDS:
        raise TacticError(f"unknown tactic '{kind}' "
                          f"(expected one of {', '.join(TACTIC_KINDS)})")
    if sep:
        if kind not in ("ES1", "ES2"):
            raise TacticError(f"tactic {kind} takes no control variant")
        if variant not in ("droop", "step"):
            raise TacticError(f"storage control variant must be 'droop' or "
                              f"'step', got '{variant}'")
        return TacticSpec(kind, variant)
    return TacticSpec(kind)


def _check_overrides(spec: TacticSpec):
    legal = _LEGAL_OVERRIDES[spec.kind]
    for key in spec.overrides:
        if key not in legal:
            raise TacticError(
                f"tactic {spec.kind} may not override '{key}' "
                f"(legal: {', '.join(sorted(legal)) or 'none'})")


def _storage_from_preset(preset: StoragePreset, variant: str, name: str,
                         overrides: Dict) -> StorageUnit:
    control = preset.step if variant == "step" else preset.droop
    ctl_over = {k.split(".", 1)[1]: v for k, v in overrides.items()
                if k.startswith("control.")}
    unit_over = {k: v for k, v in overrides.items() if not k.startswith("control.")}
    if ctl_over:
        try:
            control = replace(control, **ctl_over)
        except TypeError as exc:
            raise TacticError(f"override does not apply to {variant} control: {exc}")
    unit = StorageUnit(name=name, max_mw=preset.max_mw,
                       energy_mws=preset.energy_mws, control=control,
                       locations=preset.locations,
                       withdrawal_ramp_s=preset.withdrawal_ramp_s)
    return replace(unit, **unit_over) if unit_over else unit


def apply_tactic(config: ScenarioConfig, spec: TacticSpec) -> ScenarioConfig:
    """Derive the scenario for one tactic from the base scenario.

    Generation-side tactics rewrite the corresponding fleet field on every
    group; FRL and storage tactics activate the scenario's preset block
    (storage replaces any existing units, keeping the one-factor-at-a-time
    methodology of the comparisons).
    """
    _check_overrides(spec)
    presets = config.tactic_presets
    if spec.kind == "baseline":
        return config
    if spec.kind == "SG1":
        droop = spec.overrides.get("droop", presets.sg1_droop)
        fleet = tuple(replace(g, droop=droop) for g in config.fleet_template)
        return replace(config, fleet_template=fleet)
    if spec.kind == "SG2":
        db = spec.overrides.get("deadband_hz", presets.sg2_deadband_hz)
        fleet = tuple(replace(g, deadband_hz=db) for g in config.fleet_template)
        return replace(config, fleet_template=fleet)
    if spec.kind == "SG3":
        ratio = spec.overrides.get("governor_ratio", presets.sg3_ratio)
        return replace(config, governor_ratio=ratio)
    if spec.kind == "FRL":
        base = presets.frl
        if base is None:
            if "block_mw" not in spec.overrides:
                raise TacticError("tactic FRL needs a tactic_presets.frl block "
                                  "or a block_mw override")
            base = FrlParams(block_mw=spec.overrides["block_mw"])
        if spec.overrides:
            base = replace(base, **spec.overrides)
        return replace(config, frl=base)
    # ES1 / ES2
    preset = presets.battery if spec.kind == "ES1" else presets.supercap
    pname = "battery" if spec.kind == "ES1" else "supercap"
    if preset is None:
        raise TacticError(f"tactic {spec.kind} needs a tactic_presets.{pname} block")
    variant = spec.variant or ("droop" if spec.kind == "ES1" else "step")
    unit = _storage_from_preset(preset, variant, pname, spec.overrides)
    return replace(config, storage=(unit,))


@dataclass
class CompareResult:
    labels: List[str]
    rows: List[dict]
    traces: Dict[str, Trace]
    metrics: Dict[str, FrequencyMetrics]


def run_compare(config: ScenarioConfig, tactics,
                settle_window_s=DEFAULT_SETTLE_WINDOW_S) -> CompareResult:
    """Simulate the base scenario under each tactic and tabulate the metrics.

    The baseline row is always present and always first; remaining rows keep
    the caller's order.  Simulation failures propagate, annotated with the
    offending tactic's label.
    """
    specs = list(tactics)
    if not any(s.kind == "baseline" for s in specs):
        specs.insert(0, TacticSpec("baseline"))
    else:
        specs.sort(key=lambda s: 0 if s.kind == "baseline" else 1)
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise TacticError(f"duplicate tactic labels: {labels}")

    rows, traces, metrics = [], {}, {}
    from .config_io import metrics_row
    for spec in specs:
        try:
            derived = validate_scenario(apply_tactic(config, spec))
            trace = simulate(build_fleet(derived), derived)
            m = metrics_from_trace(trace, settle_window_s=settle_window_s)
        except Exception as exc:
            raise TacticError(f"tactic '{spec.label}': {exc}") from exc
        traces[spec.label] = trace
        metrics[spec.label] = m
        rows.append({"tactic": spec.label, **metrics_row(m)})
    return CompareResult(labels=labels, rows=rows, traces=traces, metrics=metrics)
