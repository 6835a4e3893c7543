"""Interconnection-level primary frequency response simulation toolkit."""

from .config_io import (ConfigError, bundled_scenario_names, load_scenario,
                        parse_config, read_trace_csv, serialize_config,
                        write_metrics_csv, write_trace_csv)
from .engine import (Event, Runtime, SimState, SimulationError, Trace,
                     advance, derivatives, init_state, simulate, step,
                     step_boundary)
from .governor import (FrlState, GovernorState, apply_deadband, frl_update,
                       governor_derivatives, local_minima, ufls_crossing)
from .metrics import (FrequencyMetrics, coi_frequency, compute_metrics,
                      metrics_from_trace)
from .model import (Contingency, DroopControl, Fleet, FrlParams,
                    GeneratorGroup, ScenarioConfig, SimSettings, StepControl,
                    StoragePreset, StorageUnit, SystemParams, TacticPresets,
                    ValidationFailure, build_fleet, from_pu, to_pu,
                    validate_scenario)
from .storage import (EnergyState, StepState, droop_command, energy_update,
                      estimate_rocof, step_power_mw, step_update)
from .sweep import SweepAxis, SweepSpec, parse_sweep_spec, run_sweep, set_config_value
from .tactics import (CompareResult, TacticError, TacticSpec, apply_tactic,
                      parse_tactic_token, run_compare)

__version__ = "0.1.0"
