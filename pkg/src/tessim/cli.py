"""Command-line entry point: ``tessim simulate|compare|sweep|dump-graph``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .graph import GraphError, SimulationFault
from .scenario import ScenarioError, builtin_scenarios, load_scenario
from .sim import compare_models, dump_graphs, run_scenario, stats_dict, sweep_grid
from .solver import SolverError


def _int_list(text: str):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("grid sizes must be positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tessim",
        description="Fixed-grid and moving-boundary simulation of a PCM thermal energy store.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log solver and FSM details")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("scenario", help=f"scenario file or built-in name ({', '.join(builtin_scenarios())})")
        sp.add_argument("-o", "--outdir", default=".", help="output directory (default: .)")
        return sp

    sp = scenario_cmd("simulate", "run the selected model(s) and write trajectory, events and stats")
    sp.add_argument("--model", choices=("fg", "mb", "both"), help="override the scenario's model selector")
    sp.add_argument("--n", type=int, help="override the number of FG sections")
    scenario_cmd("compare", "run FG and MB on identical inputs and write the comparison report")
    sp = scenario_cmd("sweep", "freeze time and cost over FG grid sizes, plus one MB row")
    sp.add_argument("--n", type=_int_list, default=[5, 10, 20, 35, 50], help="grid sizes, e.g. 5,10,20,35")
    sp.add_argument("--reps", type=int, default=1, help="repetitions per configuration (default: 1)")
    scenario_cmd("dump-graph", "write incidence, edge and input-map CSVs")
    sub.add_parser("list", help="list the built-in scenarios")
    return p


def _fail(kind: str, message: str, **extra) -> int:
    payload = {"error": kind, "message": message, **extra}
    sys.stderr.write(json.dumps(payload) + "\n")
    return 2 if kind == "invalid_scenario" else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        print("\n".join(builtin_scenarios()))
        return 0
    try:
        sc = load_scenario(args.scenario)
        out = Path(args.outdir)
        if args.command == "simulate":
            changes = {}
            if args.model:
                changes["model"] = args.model
            if args.n is not None:
                if args.n < 1:
                    raise ScenarioError("fg_sections", "must be >= 1")
                changes["fg_sections"] = args.n
            results = run_scenario(sc.replace(**changes), out)
            for label, res in results.items():
                print(json.dumps(stats_dict(res), sort_keys=True))
        elif args.command == "compare":
            report = compare_models(sc, out)
            print(report.to_text(), end="")
        elif args.command == "sweep":
            if args.reps < 1:
                raise ScenarioError("reps", "must be >= 1")
            rows = sweep_grid(sc, args.n, args.reps, out)
            for r in rows:
                print(json.dumps(r))
        elif args.command == "dump-graph":
            for path in dump_graphs(sc, out):
                print(path)
    except ScenarioError as exc:
        return _fail("invalid_scenario", exc.message, field=exc.field)
    except SolverError as exc:
        return _fail("solver_failure", str(exc), t=exc.t)
    except SimulationFault as exc:
        return _fail("simulation_fault", str(exc), element=exc.element)
    except GraphError as exc:
        return _fail("invalid_graph", str(exc))
    except OSError as exc:
        return _fail("io_error", str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
