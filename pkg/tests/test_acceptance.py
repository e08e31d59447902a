"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` or directly as a script:
``python3 tests/test_acceptance.py``. Each check returns ``(passed, detail)``
and the pytest wrapper prints the line before asserting.
"""

from __future__ import annotations

import functools
import math
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from tessim.scenario import builtin_scenarios, load_scenario, scenario_from_dict
from tessim.sim import compare_models, run_model, run_scenario, sweep_grid, write_trajectory_csv
from tessim.solver import Event, SolverConfig, integrate

SWEEP_NS = (5, 10, 20, 35, 50)


class Runs:
    """Lazily computed, shared simulation results."""

    @functools.cached_property
    def scenario_results(self) -> dict:
        return {name: run_scenario(load_scenario(name)) for name in builtin_scenarios()}

    def report(self, name):
        return compare_models(load_scenario(name), results=self.scenario_results[name])

    @functools.cached_property
    def sweep(self) -> list:
        return sweep_grid(load_scenario("fig2_sweep"), SWEEP_NS)


# -- criteria --------------------------------------------------------------------

def check_1(runs: Runs):
    fg = {r["n"]: r["t_freeze_s"] for r in runs.sweep if r["model"] == "fg"}
    if any(fg.get(n) is None for n in SWEEP_NS):
        return False, f"missing freeze times: {fg}"
    t = [fg[n] for n in SWEEP_NS]
    diffs = [abs(b - a) for a, b in zip(t, t[1:])]
    shrinking = all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
    rel = abs(fg[50] - fg[35]) / fg[50]
    detail = "t_freeze " + ", ".join(f"n={n}: {fg[n]:.1f}s" for n in SWEEP_NS) + f"; |50-35|/50 = {rel:.4f}"
    return shrinking and rel <= 0.02, detail


def check_2(runs: Runs):
    rep = runs.report("fig5_complete_cycles")
    ok = rep.max_delta_soc <= 0.08 and rep.mean_delta_soc <= 0.05
    return ok, f"max {rep.max_delta_soc:.4f} (<= 0.08) at t = {rep.delta.t_max:.0f}s, mean {rep.mean_delta_soc:.4f} (<= 0.05)"


def check_3(runs: Runs):
    res = runs.scenario_results["fig5_complete_cycles"]
    fg, mb = res["fg"].stats, res["mb"].stats
    ratio = fg.t_comp / mb.t_comp
    ok = ratio >= 3 and mb.n_steps < fg.n_steps
    return ok, f"t_comp FG {fg.t_comp:.2f}s / MB {mb.t_comp:.2f}s = {ratio:.1f}; steps MB {mb.n_steps} < FG {fg.n_steps}"


def check_4(runs: Runs):
    rep = runs.report("fig6_partial_cycles")
    ok = 0.15 <= rep.max_delta_soc <= 0.35 and rep.t_max_mode == 4 and rep.t_max_entry == "2->4"
    return ok, (f"max {rep.max_delta_soc:.4f} at t = {rep.delta.t_max:.0f}s in mode {rep.t_max_mode} "
                f"entered via {rep.t_max_entry}")


def check_5(runs: Runs):
    seq = runs.scenario_results["fig5_complete_cycles"]["mb"].mode_sequence()
    return seq == [1, 2, 3, 4, 1, 2, 3, 4, 1], "modes " + "->".join(map(str, seq))


def check_6(runs: Runs):
    limits = {"fg": 0.01, "mb": 0.005}
    ok, parts = True, []
    for name, results in runs.scenario_results.items():
        for label, res in results.items():
            frac = res.energy_residual / res.throughput
            ok &= frac <= limits[label]
            parts.append(f"{name}/{label} {100 * frac:.4f}%")
    return ok, "; ".join(parts)


def check_7(_runs=None):
    cases = {}
    cfg = SolverConfig(rtol=1e-3, atol=1e-8)
    x1 = integrate(lambda t, x: -x, np.array([1.0]), (0.0, 1.0), cfg).x[-1, 0]
    cases["linear"] = abs(x1 - math.exp(-1)) <= 10 * cfg.rtol * math.exp(-1)

    stiff = integrate(lambda t, x: np.array([-1e6 * (x[0] - math.cos(t))]), np.array([0.0]), (0.0, 1.0),
                      SolverConfig(rtol=1e-4, atol=1e-8, max_step=1.0))
    cases["stiff"] = abs(stiff.x[-1, 0] - math.cos(1.0)) <= 1e-4 and stiff.stats.n_steps < 500

    ev = integrate(lambda t, x: -x, np.array([1.0]), (0.0, 2.0), SolverConfig(rtol=1e-8, atol=1e-10, event_tol=1e-9),
                   events=[Event("half", lambda t, x: x[0] - 0.5, direction=-1)], on_event=lambda f, t, x: None)
    cases["event"] = ev.terminated and abs(ev.t[-1] - math.log(2.0)) <= 1e-6

    errs = [abs(integrate(lambda t, x: -x, np.array([1.0]), (0.0, 1.0), SolverConfig(fixed_step=h)).x[-1, 0]
                - math.exp(-1)) for h in (0.1, 0.05, 0.025)]
    order = min(math.log2(errs[i] / errs[i + 1]) for i in range(2))
    cases["order"] = order >= 2.0
    return all(cases.values()), ", ".join(f"{k} {'ok' if v else 'FAIL'}" for k, v in cases.items()) + f"; order {order:.3f}"


STEADY = {
    "name": "steady",
    "horizon_s": 2.0e5,
    "initial": {"temperature_c": 25.0},
    "inputs": {"t_in": {"kind": "piecewise", "segments": [{"t_in_c": 40.0}]}, "t_air_c": 10.0},
    "parameters": {"insulation_resistance_c_per_w": 0.0},
    "solver": {"rtol": 1e-6, "atol_enthalpy_kj_per_kg": 1e-8, "output_interval_s": 1000.0},
}


def composite_cylinder_power(sc) -> float:
    """Steady heat flow (kW) from the fluid to the air through the bare layer stack."""
    p, g = sc.params, sc.params.geometry
    L = g.length

    def shell(a, b, k):
        return math.log(b / a) / (2 * math.pi * L * k)

    R = (1 / (2 * math.pi * g.r1 * L * p.fluid.h_conv)
         + shell(g.r1, g.r3, p.inner_wall.k)
         + shell(g.r3, g.r_pcm_out, p.pcm.k_liquid)
         + shell(g.r_pcm_out, g.r_outer, p.outer_wall.k)
         + 1 / (2 * math.pi * g.r_outer * L * p.h_air))
    return (sc.schedule.level_at(0) - sc.t_air) / (1 / (sc.mdot * p.fluid.cp) + 1e3 * R)


def check_8(_runs=None):
    ok, parts = True, []
    for n in (1, 5, 35):
        sc = scenario_from_dict({**STEADY, "model": "fg", "fg_sections": n})
        q = composite_cylinder_power(sc)
        res = run_model(sc, "fg")
        p_in1, p1, p_in2 = res.model.source_powers(res.x[-1], np.array([40.0, 10.0, sc.mdot]))
        err = max(abs((p_in1 - p1) - q), abs(-p_in2 - q)) / q
        ok &= err <= 1e-3
        parts.append(f"n={n} rel err {err:.2e}")
    return ok, f"Q = {q * 1e3:.3f} W; " + ", ".join(parts)


def check_9(runs: Runs):
    same, parts = True, []
    with tempfile.TemporaryDirectory() as tmp:
        for name in builtin_scenarios():
            first = runs.scenario_results[name]
            second = run_scenario(load_scenario(name))
            for label in first:
                a = write_trajectory_csv(first[label], Path(tmp) / f"{name}_{label}_a.csv").read_bytes()
                b = write_trajectory_csv(second[label], Path(tmp) / f"{name}_{label}_b.csv").read_bytes()
                same &= a == b
                parts.append(f"{name}/{label} {'identical' if a == b else 'DIFFERENT'}")
    return same, "; ".join(parts)


CRITERIA = {
    1: ("FG grid convergence", check_1),
    2: ("MB accuracy, complete cycles", check_2),
    3: ("MB speed", check_3),
    4: ("partial-cycle degradation", check_4),
    5: ("mode sequence", check_5),
    6: ("energy conservation", check_6),
    7: ("solver oracles", check_7),
    8: ("steady composite cylinder", check_8),
    9: ("determinism", check_9),
}


def evaluate(number: int, runs: Runs):
    title, fn = CRITERIA[number]
    passed, detail = fn(runs)
    line = f"CRITERION {number} {title}: {'PASS' if passed else 'FAIL'} | {detail}"
    return passed, line


# -- pytest ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def runs():
    return Runs()


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, runs, capsys):
    passed, line = evaluate(number, runs)
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


if __name__ == "__main__":
    shared = Runs()
    results = [evaluate(n, shared) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
