"""Scenario file parsing, bundled scenarios, and CSV emission.

Scenario files are JSON with a strict schema: unknown keys are errors, and
every structural problem in a file is reported in one pass with its field
path.  Serialization is canonical (all fields explicit, fixed order), so
parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import csv
import json
import os
from importlib import resources
from pathlib import Path
from typing import List, Optional

import numpy as np

from .metrics import FrequencyMetrics
from .model import (Contingency, DroopControl, FrlParams, GeneratorGroup,
                    ScenarioConfig, SimSettings, StepControl, StoragePreset,
                    StorageUnit, SystemParams, TacticPresets,
                    validate_scenario)

SCENARIO_ENV_VAR = "GRIDFREQ_SEED_SCENARIOS"

_MISSING = object()


class ConfigError(ValueError):
    """Structural problem in a scenario file; ``errors`` lists (path, message)."""

    def __init__(self, errors):
        self.errors = list(errors)
        detail = "; ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(f"invalid scenario file: {detail}")


def _join(path, key):
    return f"{path}.{key}" if path else key


def _pop(obj, key, kind, path, errors, default=_MISSING):
    if key not in obj:
        if default is _MISSING:
            errors.append((_join(path, key), "missing required key"))
            return None
        return default
    val = obj.pop(key)
    if kind == "number":
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            errors.append((_join(path, key), f"expected a number, got {val!r}"))
            return None
        return float(val)
    if kind == "int":
        if isinstance(val, bool) or not isinstance(val, int):
            errors.append((_join(path, key), f"expected an integer, got {val!r}"))
            return None
        return val
    if kind == "bool":
        if not isinstance(val, bool):
            errors.append((_join(path, key), f"expected a boolean, got {val!r}"))
            return None
        return val
    if kind == "string":
        if not isinstance(val, str):
            errors.append((_join(path, key), f"expected a string, got {val!r}"))
            return None
        return val
    if kind == "dict":
        if not isinstance(val, dict):
            errors.append((_join(path, key), "expected an object"))
            return None
        return val
    if kind == "list":
        if not isinstance(val, list):
            errors.append((_join(path, key), "expected an array"))
            return None
        return val
    raise AssertionError(kind)


def _reject_unknown(obj, path, errors):
    for key in obj:
        errors.append((_join(path, key), "unknown key"))


def _parse_system(obj, path, errors):
    kw = dict(
        load_mw=_pop(obj, "load_mw", "number", path, errors),
        ufls_hz=_pop(obj, "ufls_hz", "number", path, errors),
        nominal_hz=_pop(obj, "nominal_hz", "number", path, errors, 60.0),
        base_mva=_pop(obj, "base_mva", "number", path, errors, None),
        load_damping=_pop(obj, "load_damping", "number", path, errors, 1.0),
    )
    _reject_unknown(obj, path, errors)
    if any(v is None for k, v in kw.items() if k not in ("base_mva",)):
        return None
    return SystemParams(**kw)


def _parse_group(obj, path, errors):
    kw = dict(
        name=_pop(obj, "name", "string", path, errors),
        capacity_mw=_pop(obj, "capacity_mw", "number", path, errors),
        inertia_s=_pop(obj, "inertia_s", "number", path, errors),
        headroom_mw=_pop(obj, "headroom_mw", "number", path, errors),
        droop=_pop(obj, "droop", "number", path, errors, 0.05),
        deadband_hz=_pop(obj, "deadband_hz", "number", path, errors, 0.036),
        deadband_style=_pop(obj, "deadband_style", "string", path, errors, "offset"),
        gov_lag_s=_pop(obj, "gov_lag_s", "number", path, errors, 0.5),
        reheat_lead_s=_pop(obj, "reheat_lead_s", "number", path, errors, 3.0),
        reheat_lag_s=_pop(obj, "reheat_lag_s", "number", path, errors, 10.0),
        governor_enabled=_pop(obj, "governor_enabled", "bool", path, errors, True),
    )
    _reject_unknown(obj, path, errors)
    if any(v is None for v in kw.values()):
        return None
    return GeneratorGroup(**kw)


def _parse_contingency(obj, path, errors):
    kw = dict(
        magnitude_mw=_pop(obj, "mw", "number", path, errors),
        time_s=_pop(obj, "time_s", "number", path, errors, 1.0),
        remove_inertia=_pop(obj, "remove_inertia", "bool", path, errors, False),
        removed_inertia_mws=_pop(obj, "removed_inertia_mws", "number", path,
                                 errors, 0.0),
    )
    _reject_unknown(obj, path, errors)
    if any(v is None for v in kw.values()):
        return None
    return Contingency(**kw)


def _parse_frl(obj, path, errors):
    kw = dict(
        block_mw=_pop(obj, "block_mw", "number", path, errors),
        threshold_hz=_pop(obj, "threshold_hz", "number", path, errors, 59.7),
        delay_s=_pop(obj, "delay_s", "number", path, errors, 0.5),
        reset_on_recovery=_pop(obj, "reset_on_recovery", "bool", path, errors, True),
    )
    _reject_unknown(obj, path, errors)
    if any(v is None for v in kw.values()):
        return None
    return FrlParams(**kw)


def _parse_droop_control(obj, path, errors):
    kw = dict(
        droop=_pop(obj, "droop", "number", path, errors, 0.03),
        deadband_hz=_pop(obj, "deadband_hz", "number", path, errors, 0.017),
        filter_s=_pop(obj, "filter_s", "number", path, errors, 0.1),
    )
    _reject_unknown(obj, path, errors)
    if any(v is None for v in kw.values()):
        return None
    return DroopControl(**kw)


def _parse_step_control(obj, path, errors):
    kw = dict(
        threshold_hz=_pop(obj, "threshold_hz", "number", path, errors),
        assumed_inertia_s=_pop(obj, "assumed_inertia_s", "number", path, errors),
        assumed_load_mw=_pop(obj, "assumed_load_mw", "number", path, errors),
        delay_s=_pop(obj, "delay_s", "number", path, errors, 0.5),
        ratio=_pop(obj, "ratio", "number", path, errors, 0.85),
        rocof_window_s=_pop(obj, "rocof_window_s", "number", path, errors, 0.5),
    )
    _reject_unknown(obj, path, errors)
    if any(v is None for v in kw.values()):
        return None
    return StepControl(**kw)


def _parse_control(obj, path, errors):
    kind = _pop(obj, "kind", "string", path, errors)
    if kind == "droop":
        return _parse_droop_control(obj, path, errors)
    if kind == "step":
        return _parse_step_control(obj, path, errors)
    if kind is not None:
        errors.append((_join(path, "kind"), f"must be 'droop' or 'step', got {kind!r}"))
    return None


def _parse_storage_unit(obj, path, errors):
    ctl_obj = _pop(obj, "control", "dict", path, errors)
    control = _parse_control(ctl_obj, _join(path, "control"), errors) \
        if ctl_obj is not None else None
    kw = dict(
        name=_pop(obj, "name", "string", path, errors),
        max_mw=_pop(obj, "max_mw", "number", path, errors),
        energy_mws=_pop(obj, "energy_mws", "number", path, errors),
        locations=_pop(obj, "locations", "int", path, errors, 1),
        withdrawal_ramp_s=_pop(obj, "withdrawal_ramp_s", "number", path, errors, 0.0),
    )
    _reject_unknown(obj, path, errors)
    if control is None or any(v is None for v in kw.values()):
        return None
    return StorageUnit(control=control, **kw)


def _parse_storage_preset(obj, path, errors):
    droop_obj = _pop(obj, "droop_control", "dict", path, errors)
    step_obj = _pop(obj, "step_control", "dict", path, errors)
    droop = _parse_droop_control(droop_obj, _join(path, "droop_control"), errors) \
        if droop_obj is not None else None
    step = _parse_step_control(step_obj, _join(path, "step_control"), errors) \
        if step_obj is not None else None
    kw = dict(
        max_mw=_pop(obj, "max_mw", "number", path, errors),
        energy_mws=_pop(obj, "energy_mws", "number", path, errors),
        locations=_pop(obj, "locations", "int", path, errors, 1),
        withdrawal_ramp_s=_pop(obj, "withdrawal_ramp_s", "number", path, errors, 0.0),
    )
    _reject_unknown(obj, path, errors)
    if droop is None or step is None or any(v is None for v in kw.values()):
        return None
    return StoragePreset(droop=droop, step=step, **kw)


def _parse_sim(obj, path, errors):
    coupling = _pop(obj, "coupling", "list", path, errors, None)
    if coupling is not None:
        rows = []
        ok = True
        for i, row in enumerate(coupling):
            if not isinstance(row, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool)
                    for v in row):
                errors.append((f"{_join(path, 'coupling')}[{i}]",
                               "expected an array of numbers"))
                ok = False
            else:
                rows.append(tuple(float(v) for v in row))
        coupling = tuple(rows) if ok else None
    kw = dict(
        dt_s=_pop(obj, "dt_s", "number", path, errors, 0.005),
        horizon_s=_pop(obj, "horizon_s", "number", path, errors, 60.0),
        mode=_pop(obj, "mode", "string", path, errors, "coi"),
    )
    _reject_unknown(obj, path, errors)
    if any(v is None for v in kw.values()):
        return None
    return SimSettings(coupling=coupling, **kw)


def _parse_presets(obj, path, errors):
    frl_obj = _pop(obj, "frl", "dict", path, errors, None)
    battery_obj = _pop(obj, "battery", "dict", path, errors, None)
    supercap_obj = _pop(obj, "supercap", "dict", path, errors, None)
    kw = dict(
        sg1_droop=_pop(obj, "sg1_droop", "number", path, errors, 0.03),
        sg2_deadband_hz=_pop(obj, "sg2_deadband_hz", "number", path, errors, 0.0167),
        sg3_ratio=_pop(obj, "sg3_ratio", "number", path, errors, 0.8),
    )
    _reject_unknown(obj, path, errors)
    frl = _parse_frl(frl_obj, _join(path, "frl"), errors) \
        if frl_obj is not None else None
    battery = _parse_storage_preset(battery_obj, _join(path, "battery"), errors) \
        if battery_obj is not None else None
    supercap = _parse_storage_preset(supercap_obj, _join(path, "supercap"), errors) \
        if supercap_obj is not None else None
    if any(v is None for v in kw.values()):
        return None
    return TacticPresets(frl=frl, battery=battery, supercap=supercap, **kw)


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse and validate one scenario file.

    Raises ConfigError for structural problems (syntax, types, unknown keys)
    and ValidationFailure for violated model invariants; both carry the full
    error list with field paths.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([(source,
                            f"syntax error at line {exc.lineno}, column {exc.colno}: "
                            f"{exc.msg}")]) from None
    if not isinstance(raw, dict):
        raise ConfigError([(source, "top level must be an object")])

    errors: list = []
    name = _pop(raw, "name", "string", "", errors)
    description = _pop(raw, "description", "string", "", errors, "")

    system_obj = _pop(raw, "system", "dict", "", errors)
    system = _parse_system(system_obj, "system", errors) \
        if system_obj is not None else None

    fleet_list = _pop(raw, "fleet_template", "list", "", errors)
    fleet = []
    if fleet_list is not None:
        for i, g in enumerate(fleet_list):
            if not isinstance(g, dict):
                errors.append((f"fleet_template[{i}]", "expected an object"))
                continue
            grp = _parse_group(g, f"fleet_template[{i}]", errors)
            if grp is not None:
                fleet.append(grp)

    cont_obj = _pop(raw, "contingency", "dict", "", errors)
    contingency = _parse_contingency(cont_obj, "contingency", errors) \
        if cont_obj is not None else None

    pv = _pop(raw, "pv_penetration", "number", "", errors, 0.0)
    wind = _pop(raw, "wind_penetration", "number", "", errors, 0.0)
    ratio = _pop(raw, "governor_ratio", "number", "", errors, 1.0)

    frl_obj = _pop(raw, "frl", "dict", "", errors, None)
    frl = _parse_frl(frl_obj, "frl", errors) if frl_obj is not None else None

    storage_list = _pop(raw, "storage", "list", "", errors, [])
    storage = []
    for i, u in enumerate(storage_list):
        if not isinstance(u, dict):
            errors.append((f"storage[{i}]", "expected an object"))
            continue
        unit = _parse_storage_unit(u, f"storage[{i}]", errors)
        if unit is not None:
            storage.append(unit)

    sim_obj = _pop(raw, "sim", "dict", "", errors, None)
    sim = _parse_sim(sim_obj, "sim", errors) if sim_obj is not None else SimSettings()

    presets_obj = _pop(raw, "tactic_presets", "dict", "", errors, None)
    presets = _parse_presets(presets_obj, "tactic_presets", errors) \
        if presets_obj is not None else TacticPresets()

    _reject_unknown(raw, "", errors)
    if errors:
        raise ConfigError(errors)

    config = ScenarioConfig(
        name=name, description=description, system=system,
        fleet_template=tuple(fleet), contingency=contingency,
        pv_penetration=pv, wind_penetration=wind, governor_ratio=ratio,
        frl=frl, storage=tuple(storage), sim=sim if sim is not None else SimSettings(),
        tactic_presets=presets if presets is not None else TacticPresets())
    return validate_scenario(config)


def _frl_dict(frl: FrlParams) -> dict:
    return {"block_mw": frl.block_mw, "threshold_hz": frl.threshold_hz,
            "delay_s": frl.delay_s, "reset_on_recovery": frl.reset_on_recovery}


def _control_dict(ctl) -> dict:
    if isinstance(ctl, DroopControl):
        return {"kind": "droop", "droop": ctl.droop,
                "deadband_hz": ctl.deadband_hz, "filter_s": ctl.filter_s}
    return {"kind": "step", "threshold_hz": ctl.threshold_hz,
            "assumed_inertia_s": ctl.assumed_inertia_s,
            "assumed_load_mw": ctl.assumed_load_mw, "delay_s": ctl.delay_s,
            "ratio": ctl.ratio, "rocof_window_s": ctl.rocof_window_s}


def _droop_dict(ctl: DroopControl) -> dict:
    return {"droop": ctl.droop, "deadband_hz": ctl.deadband_hz,
            "filter_s": ctl.filter_s}


def _step_dict(ctl: StepControl) -> dict:
    return {"threshold_hz": ctl.threshold_hz,
            "assumed_inertia_s": ctl.assumed_inertia_s,
            "assumed_load_mw": ctl.assumed_load_mw, "delay_s": ctl.delay_s,
            "ratio": ctl.ratio, "rocof_window_s": ctl.rocof_window_s}


def _preset_dict(p: StoragePreset) -> dict:
    return {"max_mw": p.max_mw, "energy_mws": p.energy_mws,
            "locations": p.locations, "withdrawal_ramp_s": p.withdrawal_ramp_s,
            "droop_control": _droop_dict(p.droop),
            "step_control": _step_dict(p.step)}


def serialize_config(config: ScenarioConfig) -> str:
    """Canonical JSON form; parsing it reproduces the config exactly."""
    out = {
        "name": config.name,
        "description": config.description,
        "system": {
            "nominal_hz": config.system.nominal_hz,
            "load_mw": config.system.load_mw,
            "base_mva": config.system.base_mva,
            "load_damping": config.system.load_damping,
            "ufls_hz": config.system.ufls_hz,
        },
        "fleet_template": [
            {"name": g.name, "capacity_mw": g.capacity_mw,
             "inertia_s": g.inertia_s, "headroom_mw": g.headroom_mw,
             "droop": g.droop, "deadband_hz": g.deadband_hz,
             "deadband_style": g.deadband_style, "gov_lag_s": g.gov_lag_s,
             "reheat_lead_s": g.reheat_lead_s, "reheat_lag_s": g.reheat_lag_s,
             "governor_enabled": g.governor_enabled}
            for g in config.fleet_template
        ],
        "pv_penetration": config.pv_penetration,
        "wind_penetration": config.wind_penetration,
        "governor_ratio": config.governor_ratio,
        "contingency": {
            "mw": config.contingency.magnitude_mw,
            "time_s": config.contingency.time_s,
            "remove_inertia": config.contingency.remove_inertia,
            "removed_inertia_mws": config.contingency.removed_inertia_mws,
        },
        "storage": [
            {"name": u.name, "max_mw": u.max_mw, "energy_mws": u.energy_mws,
             "control": _control_dict(u.control), "locations": u.locations,
             "withdrawal_ramp_s": u.withdrawal_ramp_s}
            for u in config.storage
        ],
        "sim": {
            "dt_s": config.sim.dt_s,
            "horizon_s": config.sim.horizon_s,
            "mode": config.sim.mode,
        },
    }
    if config.frl is not None:
        out["frl"] = _frl_dict(config.frl)
    if config.sim.coupling is not None:
        out["sim"]["coupling"] = [list(row) for row in config.sim.coupling]
    presets = config.tactic_presets
    pd = {"sg1_droop": presets.sg1_droop,
          "sg2_deadband_hz": presets.sg2_deadband_hz,
          "sg3_ratio": presets.sg3_ratio}
    if presets.frl is not None:
        pd["frl"] = _frl_dict(presets.frl)
    if presets.battery is not None:
        pd["battery"] = _preset_dict(presets.battery)
    if presets.supercap is not None:
        pd["supercap"] = _preset_dict(presets.supercap)
    out["tactic_presets"] = pd
    return json.dumps(out, indent=2) + "\n"


def bundled_scenario_names() -> List[str]:
    names = []
    env_dir = os.environ.get(SCENARIO_ENV_VAR)
    if env_dir:
        names.extend(sorted(p.stem for p in Path(env_dir).glob("*.cfg")))
    data = resources.files("gridfreq") / "data"
    names.extend(sorted(p.name[:-4] for p in data.iterdir()
                        if p.name.endswith(".cfg")))
    seen = set()
    return [n for n in names if not (n in seen or seen.add(n))]


def load_scenario(name_or_path) -> ScenarioConfig:
    """Load a scenario from a path, or from the bundled set by bare name.

    The GRIDFREQ_SEED_SCENARIOS directory, when set, is consulted before the
    packaged scenarios.
    """
    p = Path(name_or_path)
    if p.suffix and p.exists():
        return parse_config(p.read_text(encoding="utf-8"), source=str(p))
    name = p.stem if p.suffix else str(name_or_path)
    env_dir = os.environ.get(SCENARIO_ENV_VAR)
    if env_dir:
        candidate = Path(env_dir) / f"{name}.cfg"
        if candidate.exists():
            return parse_config(candidate.read_text(encoding="utf-8"),
                                source=str(candidate))
    data = resources.files("gridfreq") / "data" / f"{name}.cfg"
    if data.is_file():
        return parse_config(data.read_text(encoding="utf-8"), source=f"bundled:{name}")
    raise FileNotFoundError(
        f"no scenario file or bundled scenario named '{name_or_path}' "
        f"(bundled: {', '.join(bundled_scenario_names())})")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_trace_csv(trace, path, events_path=None) -> None:
    """Write a trace and its companion event log.

    Columns: t_s, f_coi_hz, one frequency column per group, one power column
    per device.  12 significant digits, UTF-8, LF line endings, so repeated
    runs emit byte-identical files.
    """
    path = Path(path)
    header = (["t_s", "f_coi_hz"]
              + [f"f_{g}_hz" for g in trace.group_names]
              + [f"{d}_mw" for d in trace.device_names])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(trace.times.size):
            row = [_fmt(trace.times[i]), _fmt(trace.f_coi_hz[i])]
            row.extend(_fmt(v) for v in trace.f_groups_hz[i])
            row.extend(_fmt(v) for v in trace.device_mw[i])
            fh.write(",".join(row) + "\n")
    if events_path is None:
        events_path = path.with_name("events.csv" if path.name == "trace.csv"
                                     else path.stem.replace("trace", "events") + ".csv")
    write_events_csv(trace.events, events_path)


def write_events_csv(events, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_s", "kind", "detail"])
        for ev in events:
            writer.writerow([_fmt(ev.time_s), ev.kind, ev.detail])


def read_trace_csv(path) -> dict:
    """Read a trace CSV back as {column name: float array}."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = [[] for _ in header]
        for row in reader:
            for i, cell in enumerate(row):
                cols[i].append(float(cell))
    return {name: np.array(col) for name, col in zip(header, cols)}


METRIC_COLUMNS = ["start_hz", "nadir_hz", "nadir_time_s", "settle_hz",
                  "rocof_hz_per_s", "ufls_time_s", "fr_mw_per_01hz",
                  "fr_mw_per_hz", "frn_mw_per_01hz", "frn_mw_per_hz"]


def metrics_row(metrics: Optional[FrequencyMetrics]) -> dict:
    if metrics is None:
        return {c: None for c in METRIC_COLUMNS}
    return {c: getattr(metrics, c) for c in METRIC_COLUMNS}


def write_table_csv(rows: List[dict], columns: List[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def write_metrics_csv(rows: List[dict], path) -> None:
    """Write a metrics table (one dict per row, shared keys) to CSV."""
    if not rows:
        raise ValueError("metrics table is empty")
    write_table_csv(rows, list(rows[0].keys()), path)
