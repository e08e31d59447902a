"""Scenario files: model selection, parameters, inputs and solver settings.

Scenarios are YAML documents whose keys carry their units (``t_in_c``,
``mdot_kg_per_s``, ``horizon_s``). :func:`load_scenario` validates every
field and reports problems as ``section.key: message``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional, Tuple, Union

import yaml

from .geometry import TesGeometry
from .plant import TesParameters
from .solver import SolverConfig
from .thermo import MaterialProperties, PcmProperties

MODELS = ("fg", "mb", "both")


class ScenarioError(ValueError):
    """A scenario field failed validation."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


@dataclass(frozen=True)
class PiecewiseSchedule:
    """T_in held constant on consecutive segments.

    ``segments`` is a tuple of ``(until_s, t_in_c)``; the last segment runs
    to the horizon and its ``until_s`` may be ``None``.
    """

    segments: Tuple[Tuple[Optional[float], float], ...]
    kind: str = "piecewise"

    def breakpoints(self, horizon: float) -> List[float]:
        return [u for u, _ in self.segments[:-1] if u < horizon]

    def level_at(self, index: int) -> float:
        return self.segments[index][1]


@dataclass(frozen=True)
class SocToggleSchedule:
    """T_in alternates between two levels when the SOC reaches a bound.

    Level ``levels_c[0]`` drives the SOC up (freezing) until ``soc_high``,
    then level 1 drives it down until ``soc_low``. After ``max_toggles``
    switches the current level is kept.
    """

    levels_c: Tuple[float, float] = (-18.0, 18.0)
    soc_low: float = 0.0
    soc_high: float = 1.0
    start_level: int = 0
    max_toggles: Optional[int] = None
    kind: str = "soc_toggle"


Schedule = Union[PiecewiseSchedule, SocToggleSchedule]


@dataclass(frozen=True)
class Scenario:
    name: str
    schedule: Schedule
    horizon: float
    model: str = "both"
    fg_sections: int = 35
    initial_temperature: Optional[float] = 18.0
    initial_state_fg: Optional[Tuple[float, ...]] = None
    initial_state_mb: Optional[Tuple[float, ...]] = None
    initial_mode_mb: Optional[int] = None
    t_air: float = 18.0
    mdot: float = 0.10
    params: TesParameters = field(default_factory=TesParameters)
    solver: SolverConfig = field(default_factory=SolverConfig)
    description: str = ""

    @property
    def models(self) -> Tuple[str, ...]:
        return ("fg", "mb") if self.model == "both" else (self.model,)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


# -- parsing -------------------------------------------------------------------

_GEOMETRY_KEYS = {
    "r1_m": "r1",
    "dr_inner_wall_m": "dr_inner_wall",
    "dr_outer_wall_m": "dr_outer_wall",
    "dr_pcm_m": "dr_pcm",
    "length_m": "length",
    "pcm_mass_kg": "pcm_mass",
}
_PCM_KEYS = {
    "h_f_kj_per_kg": "h_f",
    "t_sat_c": "T_sat",
    "cp_solid_kj_per_kg_c": "cp_solid",
    "cp_liquid_kj_per_kg_c": "cp_liquid",
    "rho_solid_kg_per_m3": "rho_solid",
    "rho_liquid_kg_per_m3": "rho_liquid",
    "k_solid_w_per_m_c": "k_solid",
    "k_liquid_w_per_m_c": "k_liquid",
}
_MATERIAL_KEYS = {
    "cp_kj_per_kg_c": "cp",
    "rho_kg_per_m3": "rho",
    "k_w_per_m_c": "k",
    "h_conv_w_per_m2_c": "h_conv",
}
_SOLVER_KEYS = {
    "rtol": "rtol",
    "atol_enthalpy_kj_per_kg": "atol_enthalpy",
    "atol_soc": "atol_soc",
    "min_step_s": "min_step",
    "max_step_s": "max_step",
    "first_step_s": "first_step",
    "event_tol_s": "event_tol",
    "max_newton_iter": "max_newton_iter",
    "jacobian": "jacobian",
    "output_interval_s": "output_interval",
}
_MATERIALS = ("fluid", "inner_wall", "outer_wall")


def _section(data, name) -> dict:
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ScenarioError(name, "expected a mapping")
    return data


def _number(value, name, *, positive=False, nonneg=False, integer=False):
    if isinstance(value, str):
        # YAML 1.1 reads exponent forms like 1e-3 as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(name, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ScenarioError(name, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ScenarioError(name, f"must be > 0, got {value!r}")
    if nonneg and not value >= 0:
        raise ScenarioError(name, f"must be >= 0, got {value!r}")
    return int(value) if integer else float(value)


def _unknown(data: dict, allowed, prefix: str):
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ScenarioError(f"{prefix}.{extra[0]}" if prefix else extra[0], "unknown key")


def _mapped(data: dict, keys: dict, prefix: str, base):
    _unknown(data, keys, prefix)
    kwargs = {keys[k]: _number(v, f"{prefix}.{k}") for k, v in data.items() if k != "jacobian"}
    try:
        return dataclasses.replace(base, **kwargs)
    except ValueError as exc:
        # name the offending key when the dataclass message mentions its attribute
        culprit = next((k for k, attr in keys.items() if f".{attr} " in str(exc)), None)
        raise ScenarioError(f"{prefix}.{culprit}" if culprit else prefix, str(exc)) from None


def _parse_schedule(data, horizon: float) -> Schedule:
    data = _section(data, "inputs.t_in")
    kind = data.get("kind")
    if kind == "piecewise":
        _unknown(data, ("kind", "segments"), "inputs.t_in")
        raw = data.get("segments")
        if not isinstance(raw, list) or not raw:
            raise ScenarioError("inputs.t_in.segments", "expected a non-empty list")
        segments = []
        prev = 0.0
        for i, seg in enumerate(raw):
            where = f"inputs.t_in.segments[{i}]"
            seg = _section(seg, where)
            _unknown(seg, ("until_s", "t_in_c"), where)
            if "t_in_c" not in seg:
                raise ScenarioError(f"{where}.t_in_c", "missing")
            level = _number(seg["t_in_c"], f"{where}.t_in_c")
            until = seg.get("until_s")
            last = i == len(raw) - 1
            if until is None:
                if not last:
                    raise ScenarioError(f"{where}.until_s", "only the last segment may omit until_s")
            else:
                until = _number(until, f"{where}.until_s", positive=True)
                if until <= prev:
                    raise ScenarioError(f"{where}.until_s", "segment ends must be strictly increasing")
                if last and until < horizon:
                    raise ScenarioError(f"{where}.until_s", f"schedule ends at {until} s, before the horizon")
                prev = until
            segments.append((until, level))
        return PiecewiseSchedule(tuple(segments))
    if kind == "soc_toggle":
        _unknown(data, ("kind", "levels_c", "soc_low", "soc_high", "start_level", "max_toggles"), "inputs.t_in")
        levels = data.get("levels_c", [-18.0, 18.0])
        if not isinstance(levels, list) or len(levels) != 2:
            raise ScenarioError("inputs.t_in.levels_c", "expected two levels [freeze, melt]")
        levels = tuple(_number(v, "inputs.t_in.levels_c") for v in levels)
        low = _number(data.get("soc_low", 0.0), "inputs.t_in.soc_low")
        high = _number(data.get("soc_high", 1.0), "inputs.t_in.soc_high")
        if not 0.0 <= low < high <= 1.0:
            raise ScenarioError("inputs.t_in", f"need 0 <= soc_low < soc_high <= 1, got {low}, {high}")
        start = data.get("start_level", 0)
        if start not in (0, 1):
            raise ScenarioError("inputs.t_in.start_level", "must be 0 (freeze level) or 1 (melt level)")
        max_toggles = data.get("max_toggles")
        if max_toggles is not None:
            max_toggles = _number(max_toggles, "inputs.t_in.max_toggles", nonneg=True, integer=True)
        return SocToggleSchedule(levels, low, high, start, max_toggles)
    raise ScenarioError("inputs.t_in.kind", f"expected 'piecewise' or 'soc_toggle', got {kind!r}")


def _state(value, name):
    if not isinstance(value, list) or not value:
        raise ScenarioError(name, "expected a list of numbers")
    return tuple(_number(v, name) for v in value)


def scenario_from_dict(data: dict) -> Scenario:
    data = _section(data, "scenario")
    _unknown(data, ("name", "description", "model", "fg_sections", "horizon_s", "initial",
                    "inputs", "parameters", "solver"), "")
    name = data.get("name")
    if not isinstance(name, str) or not name or any(c in name for c in "/\\ "):
        raise ScenarioError("name", "expected a non-empty name without spaces or slashes")
    model = data.get("model", "both")
    if model not in MODELS:
        raise ScenarioError("model", f"expected one of {MODELS}, got {model!r}")
    n = _number(data.get("fg_sections", 35), "fg_sections", positive=True, integer=True)
    if "horizon_s" not in data:
        raise ScenarioError("horizon_s", "missing")
    horizon = _number(data["horizon_s"], "horizon_s", positive=True)

    initial = _section(data.get("initial"), "initial")
    _unknown(initial, ("temperature_c", "state_fg", "state_mb", "mode_mb"), "initial")
    T0 = initial.get("temperature_c")
    T0 = None if T0 is None else _number(T0, "initial.temperature_c")
    x_fg = None if initial.get("state_fg") is None else _state(initial["state_fg"], "initial.state_fg")
    x_mb = None if initial.get("state_mb") is None else _state(initial["state_mb"], "initial.state_mb")
    mode = initial.get("mode_mb")
    if mode is not None:
        mode = _number(mode, "initial.mode_mb", integer=True)
        if mode not in (1, 2, 3, 4):
            raise ScenarioError("initial.mode_mb", "must be 1, 2, 3 or 4")
    if x_mb is not None and mode is None:
        raise ScenarioError("initial.mode_mb", "required with an explicit MB state")
    selected = ("fg", "mb") if model == "both" else (model,)
    if T0 is None and (("fg" in selected and x_fg is None) or ("mb" in selected and x_mb is None)):
        raise ScenarioError("initial", "give temperature_c or an explicit state for every selected model")

    inputs = _section(data.get("inputs"), "inputs")
    _unknown(inputs, ("t_in", "t_air_c", "mdot_kg_per_s"), "inputs")
    if "t_in" not in inputs:
        raise ScenarioError("inputs.t_in", "missing")
    schedule = _parse_schedule(inputs["t_in"], horizon)
    t_air = _number(inputs.get("t_air_c", 18.0), "inputs.t_air_c")
    mdot = _number(inputs.get("mdot_kg_per_s", 0.10), "inputs.mdot_kg_per_s", nonneg=True)

    p = _section(data.get("parameters"), "parameters")
    _unknown(p, ("geometry", "pcm", "h_air_w_per_m2_c", "insulation_resistance_c_per_w") + _MATERIALS,
             "parameters")
    base = TesParameters()
    geometry = _mapped(_section(p.get("geometry"), "parameters.geometry"), _GEOMETRY_KEYS,
                       "parameters.geometry", base.geometry)
    pcm = _mapped(_section(p.get("pcm"), "parameters.pcm"), _PCM_KEYS, "parameters.pcm", base.pcm)
    materials = {
        m: _mapped(_section(p.get(m), f"parameters.{m}"), _MATERIAL_KEYS, f"parameters.{m}", getattr(base, m))
        for m in _MATERIALS
    }
    try:
        params = TesParameters(
            geometry=geometry,
            pcm=pcm,
            h_air=_number(p.get("h_air_w_per_m2_c", base.h_air), "parameters.h_air_w_per_m2_c", positive=True),
            insulation_resistance=_number(p.get("insulation_resistance_c_per_w", base.insulation_resistance),
                                          "parameters.insulation_resistance_c_per_w", nonneg=True),
            **materials,
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("parameters", str(exc)) from None

    s = _section(data.get("solver"), "solver")
    solver = _mapped(s, _SOLVER_KEYS, "solver", SolverConfig())
    if "jacobian" in s:
        try:
            solver = dataclasses.replace(solver, jacobian=s["jacobian"])
        except ValueError as exc:
            raise ScenarioError("solver.jacobian", str(exc)) from None
    if "max_newton_iter" in s:
        solver = dataclasses.replace(
            solver, max_newton_iter=_number(s["max_newton_iter"], "solver.max_newton_iter", integer=True))

    if x_fg is not None and len(x_fg) != n + 3:
        raise ScenarioError("initial.state_fg", f"expected {n + 3} values for n = {n}, got {len(x_fg)}")
    if x_mb is not None and len(x_mb) != 6:
        raise ScenarioError("initial.state_mb", f"expected 6 values, got {len(x_mb)}")

    return Scenario(
        name=name,
        description=str(data.get("description", "")),
        schedule=schedule,
        horizon=horizon,
        model=model,
        fg_sections=n,
        initial_temperature=T0,
        initial_state_fg=x_fg,
        initial_state_mb=x_mb,
        initial_mode_mb=mode,
        t_air=t_air,
        mdot=mdot,
        params=params,
        solver=solver,
    )


# -- serialization ---------------------------------------------------------------

def _unmapped(obj, keys: dict) -> dict:
    return {k: getattr(obj, attr) for k, attr in keys.items() if getattr(obj, attr) is not None}


def scenario_to_dict(sc: Scenario) -> dict:
    """Normalized form: every field explicit, so equal scenarios dump equal."""
    if isinstance(sc.schedule, PiecewiseSchedule):
        t_in = {"kind": "piecewise",
                "segments": [{"until_s": u, "t_in_c": v} if u is not None else {"t_in_c": v}
                             for u, v in sc.schedule.segments]}
    else:
        sch = sc.schedule
        t_in = {"kind": "soc_toggle", "levels_c": list(sch.levels_c), "soc_low": sch.soc_low,
                "soc_high": sch.soc_high, "start_level": sch.start_level}
        if sch.max_toggles is not None:
            t_in["max_toggles"] = sch.max_toggles
    initial = {}
    if sc.initial_temperature is not None:
        initial["temperature_c"] = sc.initial_temperature
    if sc.initial_state_fg is not None:
        initial["state_fg"] = list(sc.initial_state_fg)
    if sc.initial_state_mb is not None:
        initial["state_mb"] = list(sc.initial_state_mb)
    if sc.initial_mode_mb is not None:
        initial["mode_mb"] = sc.initial_mode_mb
    p = sc.params
    params = {
        "geometry": _unmapped(p.geometry, _GEOMETRY_KEYS),
        "pcm": _unmapped(p.pcm, _PCM_KEYS),
        **{m: _unmapped(getattr(p, m), _MATERIAL_KEYS) for m in _MATERIALS},
        "h_air_w_per_m2_c": p.h_air,
        "insulation_resistance_c_per_w": p.insulation_resistance,
    }
    return {
        "name": sc.name,
        "description": sc.description,
        "model": sc.model,
        "fg_sections": sc.fg_sections,
        "horizon_s": sc.horizon,
        "initial": initial,
        "inputs": {"t_in": t_in, "t_air_c": sc.t_air, "mdot_kg_per_s": sc.mdot},
        "parameters": params,
        "solver": _unmapped(sc.solver, _SOLVER_KEYS),
    }


def load_scenario(source: Union[str, Path]) -> Scenario:
    """Load a scenario file, or a built-in scenario by name."""
    path = Path(source)
    if not path.exists() and not path.suffix:
        builtin = resources.files("tessim") / "scenarios" / f"{source}.yaml"
        if builtin.is_file():
            return parse_scenario(builtin.read_text())
        raise ScenarioError("scenario", f"no file or built-in scenario named {str(source)!r}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError("scenario", f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text)


def parse_scenario(text: str) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("scenario", f"invalid YAML: {exc}") from None
    return scenario_from_dict(data)


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)


def builtin_scenarios() -> List[str]:
    root = resources.files("tessim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))
