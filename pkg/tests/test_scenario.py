import copy

import pytest
import yaml

from tessim.scenario import (
    PiecewiseSchedule,
    ScenarioError,
    SocToggleSchedule,
    builtin_scenarios,
    dump_scenario,
    load_scenario,
    parse_scenario,
    scenario_from_dict,
    scenario_to_dict,
)

BASE = {
    "name": "demo",
    "model": "both",
    "fg_sections": 5,
    "horizon_s": 100,
    "initial": {"temperature_c": 18.0},
    "inputs": {"t_in": {"kind": "piecewise", "segments": [{"until_s": 50, "t_in_c": -18}, {"t_in_c": 18}]}},
}


def with_change(path, value):
    data = copy.deepcopy(BASE)
    node = data
    *head, last = path
    for k in head:
        node = node.setdefault(k, {})
    if value is KeyError:
        del node[last]
    else:
        node[last] = value
    return data


def test_minimal_scenario_defaults():
    sc = scenario_from_dict(BASE)
    assert sc.models == ("fg", "mb")
    assert sc.t_air == 18.0 and sc.mdot == 0.10
    assert sc.params.pcm.h_f == 334.0
    assert isinstance(sc.schedule, PiecewiseSchedule)
    assert sc.schedule.breakpoints(100.0) == [50.0]


@pytest.mark.parametrize(
    "path, value, field",
    [
        (("name",), "has space", "name"),
        (("model",), "cfd", "model"),
        (("horizon_s",), KeyError, "horizon_s"),
        (("horizon_s",), -5, "horizon_s"),
        (("fg_sections",), 0, "fg_sections"),
        (("fg_sections",), 2.5, "fg_sections"),
        (("bogus",), 1, "bogus"),
        (("inputs", "t_in", "kind"), "sine", "inputs.t_in.kind"),
        (("inputs", "mdot_kg_per_s"), -0.1, "inputs.mdot_kg_per_s"),
        (("inputs", "t_in", "segments"), [], "inputs.t_in.segments"),
        (("inputs", "t_in", "segments"), [{"until_s": 50, "t_in_c": 1}], "inputs.t_in.segments[0].until_s"),
        (("parameters", "geometry", "r1_m"), -0.1, "parameters.geometry.r1_m"),
        (("parameters", "pcm", "k_solid"), 1.0, "parameters.pcm.k_solid"),
        (("solver", "rtol"), "tight", "solver.rtol"),
        (("initial",), {}, "initial"),
        (("initial", "state_mb"), [0, 0, 0, 0, 0, 0], "initial.mode_mb"),
        (("initial", "state_fg"), [0.0] * 4, "initial.state_fg"),
    ],
)
def test_validation_names_the_field(path, value, field):
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(with_change(path, value))
    assert info.value.field.startswith(field)


def test_soc_toggle_validation():
    toggle = {"kind": "soc_toggle", "levels_c": [-18, 18], "soc_low": 0.6, "soc_high": 0.4}
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(with_change(("inputs", "t_in"), toggle))
    assert info.value.field == "inputs.t_in"


def test_numeric_strings_accepted():
    sc = scenario_from_dict(with_change(("solver", "rtol"), "1e-4"))
    assert sc.solver.rtol == 1e-4


@pytest.mark.parametrize("name", builtin_scenarios())
def test_builtin_roundtrip(name):
    sc = load_scenario(name)
    text = dump_scenario(sc)
    assert parse_scenario(text) == sc
    assert dump_scenario(parse_scenario(text)) == text
    assert yaml.safe_load(text) == scenario_to_dict(sc)


def test_builtins_present():
    assert builtin_scenarios() == ["fig2_sweep", "fig5_complete_cycles", "fig6_partial_cycles"]
    assert isinstance(load_scenario("fig5_complete_cycles").schedule, SocToggleSchedule)


def test_load_from_file(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(yaml.safe_dump(BASE))
    assert load_scenario(p).name == "demo"
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.yaml")


def test_invalid_yaml():
    with pytest.raises(ScenarioError) as info:
        parse_scenario("name: [unclosed")
    assert info.value.field == "scenario"
