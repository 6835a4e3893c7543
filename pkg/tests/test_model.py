from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from gridfreq import (Contingency, GeneratorGroup, ScenarioConfig, SimSettings,
                      SystemParams, ValidationFailure, build_fleet, from_pu,
                      to_pu, validate_scenario)
from conftest import single_group_config


def test_to_pu_hand_values():
    assert to_pu(2750.0, 75000.0) == pytest.approx(0.036667, abs=5e-7)
    assert to_pu(0.0, 12345.0) == 0.0
    assert to_pu(75000.0, 75000.0) == 1.0


def test_to_pu_rejects_bad_base():
    with pytest.raises(ValueError):
        to_pu(1.0, 0.0)
    with pytest.raises(ValueError):
        from_pu(1.0, -5.0)


@given(st.floats(min_value=-1e9, max_value=1e9, allow_nan=False),
       st.floats(min_value=1e-3, max_value=1e9, allow_nan=False))
def test_pu_round_trip(value, base):
    assert to_pu(from_pu(value, base), base) == pytest.approx(value, rel=1e-12)


def uniform_template(n=10, cap=10000.0, inertia=5.0):
    return tuple(GeneratorGroup(f"g{i}", cap, inertia, headroom_mw=cap * 0.1)
                 for i in range(n))


def test_build_fleet_penetration_scaling():
    cfg = ScenarioConfig(
        name="t", system=SystemParams(load_mw=100000.0, ufls_hz=59.3),
        fleet_template=uniform_template(),
        contingency=Contingency(2750.0), pv_penetration=0.65,
        wind_penetration=0.15, governor_ratio=1.0)
    fleet = build_fleet(cfg)
    assert all(g.capacity_mw == pytest.approx(2000.0) for g in fleet.groups)
    template_h = sum(g.inertia_s * g.capacity_mw for g in cfg.fleet_template) / 100000.0
    assert fleet.system_inertia_s == pytest.approx(0.2 * template_h, rel=1e-12)
    # headroom shrinks with the committed capacity
    assert all(g.headroom_mw == pytest.approx(200.0) for g in fleet.groups)


def test_build_fleet_identity():
    cfg = ScenarioConfig(
        name="t", system=SystemParams(load_mw=100000.0, ufls_hz=59.3),
        fleet_template=uniform_template(),
        contingency=Contingency(2750.0), governor_ratio=1.0)
    fleet = build_fleet(cfg)
    assert fleet.groups == cfg.fleet_template


def test_build_fleet_ratio_count():
    cfg = ScenarioConfig(
        name="t", system=SystemParams(load_mw=100000.0, ufls_hz=59.3),
        fleet_template=uniform_template(),
        contingency=Contingency(2750.0), governor_ratio=0.3)
    fleet = build_fleet(cfg)
    assert sum(g.governor_enabled for g in fleet.groups) == 3


def test_build_fleet_largest_first():
    template = (GeneratorGroup("small", 1000.0, 4.0, headroom_mw=100.0),
                GeneratorGroup("big", 8000.0, 4.0, headroom_mw=800.0),
                GeneratorGroup("mid", 3000.0, 4.0, headroom_mw=300.0))
    cfg = ScenarioConfig(
        name="t", system=SystemParams(load_mw=12000.0, ufls_hz=59.3),
        fleet_template=template, contingency=Contingency(100.0),
        governor_ratio=0.6)
    fleet = build_fleet(cfg)
    flags = {g.name: g.governor_enabled for g in fleet.groups}
    # big (8/12 = 0.67 >= 0.6) fills alone
    assert flags == {"big": True, "mid": False, "small": False}


def test_build_fleet_deterministic():
    cfg = single_group_config()
    assert build_fleet(cfg) == build_fleet(cfg)


def test_validate_accepts_ercot_like():
    cfg = single_group_config()
    assert validate_scenario(cfg) is cfg


def test_validate_reports_all_errors_with_paths():
    cfg = single_group_config()
    bad = replace(cfg, pv_penetration=1.2,
                  sim=SimSettings(dt_s=0.0, horizon_s=60.0))
    with pytest.raises(ValidationFailure) as exc:
        validate_scenario(bad)
    paths = [p for p, _ in exc.value.errors]
    assert "pv_penetration" in paths
    assert "sim.dt_s" in paths
    assert len(paths) >= 2


def test_validate_group_invariants():
    g = GeneratorGroup("g", -1.0, 0.0, headroom_mw=-2.0, droop=0.0,
                       deadband_hz=-0.1, deadband_style="weird")
    cfg = ScenarioConfig(
        name="t", system=SystemParams(load_mw=1000.0, ufls_hz=59.3),
        fleet_template=(g,), contingency=Contingency(10.0))
    with pytest.raises(ValidationFailure) as exc:
        validate_scenario(cfg)
    paths = {p for p, _ in exc.value.errors}
    assert {"fleet_template[0].capacity_mw", "fleet_template[0].inertia_s",
            "fleet_template[0].droop",
            "fleet_template[0].deadband_style"} <= paths


def test_validate_coupling_rules():
    cfg = single_group_config()
    with pytest.raises(ValidationFailure) as exc:
        validate_scenario(replace(cfg, sim=SimSettings(mode="multimachine")))
    assert any(p == "sim.coupling" for p, _ in exc.value.errors)
    with pytest.raises(ValidationFailure):
        validate_scenario(replace(cfg, sim=SimSettings(coupling=((0.0,),))))


def test_validate_rejects_removing_all_inertia():
    cfg = single_group_config()
    bad = replace(cfg, contingency=replace(cfg.contingency, remove_inertia=True,
                                           removed_inertia_mws=4.0 * 75000.0))
    with pytest.raises(ValidationFailure, match="stored energy"):
        validate_scenario(bad)


def test_base_defaults_to_load():
    s = SystemParams(load_mw=75000.0, ufls_hz=59.3)
    assert s.base_mva == 75000.0
