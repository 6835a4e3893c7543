import pytest

from gridfreq import (Contingency, GeneratorGroup, ScenarioConfig, SimSettings,
                      SystemParams, build_fleet, load_scenario,
                      metrics_from_trace, simulate)

BUNDLED = ["ei20", "ei40", "ei60", "ei80",
           "ercot20", "ercot40", "ercot60", "ercot80"]


def single_group_config(name="one", load_mw=75000.0, inertia_s=4.0,
                        droop=0.05, deadband_hz=0.0, load_damping=1.0,
                        headroom_mw=15000.0, governor_ratio=1.0,
                        magnitude_mw=2750.0, horizon_s=60.0, dt_s=0.005,
                        ufls_hz=55.0, **kw):
    """One aggregated machine carrying the whole system; handy for oracles."""
    return ScenarioConfig(
        name=name,
        system=SystemParams(load_mw=load_mw, ufls_hz=ufls_hz,
                            load_damping=load_damping),
        fleet_template=(GeneratorGroup("g1", load_mw, inertia_s,
                                       headroom_mw=headroom_mw, droop=droop,
                                       deadband_hz=deadband_hz),),
        contingency=Contingency(magnitude_mw=magnitude_mw, time_s=1.0),
        governor_ratio=governor_ratio,
        sim=SimSettings(dt_s=dt_s, horizon_s=horizon_s),
        **kw)


_run_cache = {}


def run_bundled(name):
    """Simulate a bundled scenario once per session; returns (trace, metrics)."""
    if name not in _run_cache:
        cfg = load_scenario(name)
        trace = simulate(build_fleet(cfg), cfg)
        _run_cache[name] = (trace, metrics_from_trace(trace))
    return _run_cache[name]


@pytest.fixture(scope="session")
def bundled_runs():
    return run_bundled
