"""Run scenarios: build the models, drive the inputs, write the outputs."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .fg import FixedGridModel
from .graph import write_graph_csv
from .mb import FsmMode, MovingBoundaryModel
from .metrics import (
    FG_FREEZE_THRESHOLD,
    ComparisonReport,
    ModelSummary,
    delta_soc,
    freeze_time,
    run_stats_summary,
)
from .plant import INPUT_NAMES, T_IN, TesNetwork
from .scenario import PiecewiseSchedule, Scenario
from .solver import Event, Trajectory, integrate

log = logging.getLogger(__name__)

FLOAT_FMT = "%.9g"


@dataclass
class RunEvent:
    t: float
    kind: str  # "mode" or "input"
    before: str
    after: str
    reason: str


@dataclass
class RunResult:
    label: str
    model: TesNetwork
    trajectory: Trajectory
    soc: np.ndarray
    t_in: np.ndarray
    mode: Optional[np.ndarray]
    events: List[RunEvent]
    boundary_energy: float  # kJ, net energy in through the boundary
    throughput: float  # kJ, integral of |net boundary power|
    energy_residual: float  # kJ
    t_freeze: Optional[float]

    @property
    def t(self) -> np.ndarray:
        return self.trajectory.t

    @property
    def x(self) -> np.ndarray:
        return self.trajectory.x

    @property
    def stats(self):
        return self.trajectory.stats

    @property
    def mode_transitions(self) -> List[RunEvent]:
        return [e for e in self.events if e.kind == "mode"]

    def mode_sequence(self) -> List[int]:
        """Modes visited in order, starting with the initial one."""
        if self.mode is None:
            return []
        seq = [int(self.mode[0])]
        seq.extend(int(e.after) for e in self.mode_transitions)
        return seq

    def summary(self) -> ModelSummary:
        return ModelSummary(
            t_freeze_s=self.t_freeze,
            t_comp_s=self.stats.t_comp,
            n_steps=self.stats.n_steps,
            energy_residual_kj=self.energy_residual,
            energy_throughput_kj=self.throughput,
        )


def build_model(scenario: Scenario, label: str) -> TesNetwork:
    if label == "fg":
        return FixedGridModel(scenario.params, scenario.fg_sections)
    if label == "mb":
        return MovingBoundaryModel(scenario.params)
    raise ValueError(f"unknown model {label!r}")


def _initial_state(scenario: Scenario, model: TesNetwork, label: str) -> np.ndarray:
    if label == "fg" and scenario.initial_state_fg is not None:
        return np.array(scenario.initial_state_fg, dtype=float)
    if label == "mb" and scenario.initial_state_mb is not None:
        model.set_mode(FsmMode(scenario.initial_mode_mb))
        return np.array(scenario.initial_state_mb, dtype=float)
    return model.initial_state(scenario.initial_temperature)


class _InputDriver:
    """Owns the input vector and turns schedule events into level changes."""

    def __init__(self, scenario: Scenario, model: TesNetwork):
        self.schedule = scenario.schedule
        self.model = model
        self.horizon = scenario.horizon
        self.u = np.array([0.0, scenario.t_air, scenario.mdot])
        self.toggles = 0
        if isinstance(self.schedule, PiecewiseSchedule):
            self.index = 0
            self.u[T_IN] = self.schedule.level_at(0)
            self._breaks = [Event(f"t_in@{b:g}", time=b) for b in self.schedule.breakpoints(self.horizon)]
        else:
            self.index = self.schedule.start_level
            self.u[T_IN] = self.schedule.levels_c[self.index]

    def events(self) -> List[Event]:
        sch = self.schedule
        if isinstance(sch, PiecewiseSchedule):
            return self._breaks
        if sch.max_toggles is not None and self.toggles >= sch.max_toggles:
            return []
        soc = self.model.soc
        if self.index == 0:
            return [Event("soc_high", lambda t, x: float(soc(x)) - sch.soc_high, direction=+1)]
        return [Event("soc_low", lambda t, x: float(soc(x)) - sch.soc_low, direction=-1)]

    def handle(self, fired, t) -> Optional[RunEvent]:
        names = {e.name for e in fired}
        mine = {e.name for e in self.events()}
        if not names & mine:
            return None
        before = self.u[T_IN]
        if isinstance(self.schedule, PiecewiseSchedule):
            self.index += 1
            self.u[T_IN] = self.schedule.level_at(self.index)
            reason = "schedule"
        else:
            self.index = 1 - self.index
            self.toggles += 1
            self.u[T_IN] = self.schedule.levels_c[self.index]
            reason = "soc_high" if "soc_high" in names else "soc_low"
        return RunEvent(t, "input", f"{before:g}", f"{self.u[T_IN]:g}", reason)


def run_model(scenario: Scenario, label: str, *, stop_at_soc: Optional[float] = None) -> RunResult:
    """Integrate one model over the scenario horizon.

    ``stop_at_soc`` ends the run as soon as the SOC reaches that value (the
    freeze-time experiment does not need the rest of the horizon).
    """
    model = build_model(scenario, label)
    x0 = _initial_state(scenario, model, label)
    driver = _InputDriver(scenario, model)
    u = driver.u
    cfg = scenario.solver
    is_mb = isinstance(model, MovingBoundaryModel)

    seg_tin = [u[T_IN]]
    seg_mode = [int(model.mode)] if is_mb else None
    log_events: List[RunEvent] = []
    stop = [Event("stop_soc", lambda t, x: float(model.soc(x)) - stop_at_soc, direction=+1)] \
        if stop_at_soc is not None else []

    def events():
        return list(model.model_events()) + driver.events() + stop

    def on_event(fired, t, x):
        # model switching first: a SOC bound may end a region and trigger a toggle at once
        if is_mb:
            old = model.mode
            x = model.handle_events(fired, t, x)
            if model.mode != old:
                reason = model.transitions[-1][3]
                log_events.append(RunEvent(t, "mode", str(int(old)), str(int(model.mode)), reason))
        ev = driver.handle(fired, t)
        if ev is not None:
            log_events.append(ev)
        if any(e.name == "stop_soc" for e in fired):
            return None
        seg_tin.append(u[T_IN])
        if is_mb:
            seg_mode.append(int(model.mode))
        return x

    def quad(t, x):
        q = model.boundary_power(x, u)
        return np.array([q, abs(q)])

    traj = integrate(
        lambda t, x: model.rhs(t, x, u),
        x0,
        (0.0, scenario.horizon),
        cfg,
        events=events,
        on_event=on_event,
        atol=model.atol(cfg),
        quad=quad,
    )
    energy = np.broadcast_to(np.asarray(traj.boundary_energy, dtype=float), (2,))
    x_end = traj.x[-1]
    residual = abs(model.stored_energy(x_end) - model.stored_energy(x0) - energy[0])
    soc = np.asarray(model.soc(traj.x), dtype=float)
    seg = traj.segment
    t_in = np.asarray(seg_tin)[seg]
    mode = np.asarray(seg_mode)[seg] if is_mb else None

    if is_mb:
        t_freeze = next((e.t for e in log_events if e.kind == "mode" and e.after == "3"), None)
    elif traj.terminated and stop_at_soc is not None:
        t_freeze = float(traj.t[-1])
    else:
        t_freeze = freeze_time(traj.t, soc, FG_FREEZE_THRESHOLD)

    return RunResult(label, model, traj, soc, t_in, mode, log_events, float(energy[0]),
                     float(energy[1]), float(residual), t_freeze)


# -- output files ------------------------------------------------------------------

def trajectory_header(model: TesNetwork) -> List[str]:
    cols = ["t_s", "t_in_c", "soc"]
    if isinstance(model, MovingBoundaryModel):
        cols.append("mode")
    cols += [f"T_{v}_c" for v in model.vertex_ids[: model.n_states]]
    cols += [f"{name}_kj_per_kg" if name != "SOC" else "soc_state" for name in model.state_names()]
    return cols


def _fmt(v) -> str:
    return FLOAT_FMT % v


def write_trajectory_csv(result: RunResult, path) -> Path:
    path = Path(path)
    model = result.model
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(model))
        for k, (t, x) in enumerate(zip(result.t, result.x)):
            row = [_fmt(t), _fmt(result.t_in[k]), _fmt(result.soc[k])]
            if result.mode is not None:
                row.append(str(int(result.mode[k])))
            row += [_fmt(T) for T in model.temperatures(x)]
            row += [_fmt(v) for v in x]
            w.writerow(row)
    return path


def write_events_csv(result: RunResult, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "kind", "from", "to", "reason"])
        for e in result.events:
            w.writerow([_fmt(e.t), e.kind, e.before, e.after, e.reason])
    return path


def stats_dict(result: RunResult) -> dict:
    d = result.stats.as_dict()
    d.update(
        model=result.label,
        t_freeze_s=result.t_freeze,
        boundary_energy_kj=result.boundary_energy,
        energy_throughput_kj=result.throughput,
        energy_residual_kj=result.energy_residual,
        terminated_early=result.trajectory.terminated,
    )
    if isinstance(result.model, FixedGridModel):
        d["fg_sections"] = result.model.n
        d["mass_discrepancy_energy_kj"] = result.model.mass_discrepancy_energy(result.x[-1])
    return d


def run_scenario(scenario: Scenario, outdir=None) -> dict:
    """Run every selected model; write trajectory, event and stats files if ``outdir`` is given."""
    results = {}
    for label in scenario.models:
        res = run_model(scenario, label)
        results[label] = res
        if outdir is not None:
            out = Path(outdir)
            out.mkdir(parents=True, exist_ok=True)
            stem = f"{scenario.name}_{label}"
            write_trajectory_csv(res, out / f"{stem}_trajectory.csv")
            write_events_csv(res, out / f"{stem}_events.csv")
            with open(out / f"{stem}_stats.json", "w") as fh:
                json.dump(stats_dict(res), fh, indent=2, sort_keys=True)
    return results


def _mode_at(mb: RunResult, t: float):
    """MB mode at time ``t`` and the transition that opened it."""
    mode = int(mb.mode[0])
    entry = None
    for e in mb.mode_transitions:
        if e.t > t:
            break
        mode, entry = int(e.after), f"{e.before}->{e.after}"
    return mode, entry


def compare_models(scenario: Scenario, outdir=None, results: dict = None) -> ComparisonReport:
    if scenario.model != "both":
        scenario = scenario.replace(model="both")
    results = results or run_scenario(scenario, outdir)
    fg, mb = results["fg"], results["mb"]
    d = delta_soc(mb.t, mb.soc, fg.t, fg.soc)
    mode, entry = _mode_at(mb, d.t_max)
    report = ComparisonReport(
        scenario=scenario.name,
        delta=d,
        models={f"fg{fg.model.n}": fg.summary(), "mb": mb.summary()},
        t_max_mode=mode,
        t_max_entry=entry,
    )
    if outdir is not None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{scenario.name}_report.json").write_text(report.to_json() + "\n")
        (out / f"{scenario.name}_report.txt").write_text(report.to_text())
    return report


SWEEP_HEADER = ["model", "n", "reps", "t_freeze_s", "t_comp_s", "n_steps", "status"]


def sweep_grid(scenario: Scenario, ns: Sequence[int], reps: int = 1, outdir=None) -> List[dict]:
    """Freeze-time and cost table over FG resolutions, plus one MB row.

    Runs stop at complete freeze (SOC_FG >= 0.999 for the grid, the SOC = 1
    switch for MB). A failing configuration is reported and skipped.
    """
    if not ns:
        raise ValueError("need at least one grid size")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    configs = [("fg", int(n)) for n in ns] + [("mb", None)]
    rows = []
    for label, n in configs:
        sc = scenario.replace(fg_sections=n) if n is not None else scenario
        stop = FG_FREEZE_THRESHOLD if label == "fg" else 1.0
        runs, t_freeze, status = [], None, "ok"
        try:
            for _ in range(reps):
                res = run_model(sc, label, stop_at_soc=stop)
                runs.append(res.stats.as_dict())
                t_freeze = res.t_freeze
        except Exception as exc:  # noqa: BLE001 - a bad row must not end the sweep
            log.warning("sweep row %s n=%s failed: %s", label, n, exc)
            status = f"failed: {exc}"
        if runs and t_freeze is None:
            status = "did not freeze"
        summ = run_stats_summary(runs) if runs else {"t_comp_s": None, "n_steps": None}
        rows.append({
            "model": label,
            "n": n,
            "reps": len(runs),
            "t_freeze_s": t_freeze,
            "t_comp_s": summ["t_comp_s"],
            "n_steps": summ["n_steps"],
            "status": status,
        })
    if outdir is not None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"{scenario.name}_sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_HEADER)
            for r in rows:
                w.writerow(["" if r[k] is None else (_fmt(r[k]) if isinstance(r[k], float) else r[k])
                            for k in SWEEP_HEADER])
    return rows


def dump_graphs(scenario: Scenario, outdir) -> List[Path]:
    """Incidence, edge and input-map CSVs for each selected model (MB: one set per mode)."""
    out = Path(outdir)
    paths = []
    for label in scenario.models:
        model = build_model(scenario, label)
        if isinstance(model, MovingBoundaryModel):
            for mode in FsmMode:
                model.set_mode(mode)
                paths += write_graph_csv(model, out / f"{scenario.name}_mb_mode{int(mode)}")
        else:
            paths += write_graph_csv(model, out / f"{scenario.name}_fg{model.n}")
    return paths


__all__ = [
    "INPUT_NAMES",
    "RunEvent",
    "RunResult",
    "build_model",
    "compare_models",
    "dump_graphs",
    "run_model",
    "run_scenario",
    "stats_dict",
    "sweep_grid",
    "trajectory_header",
    "write_events_csv",
    "write_trajectory_csv",
]
