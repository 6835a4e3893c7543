"""Command line interface: simulate one scenario, compare tactics, or sweep."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config_io import (ConfigError, METRIC_COLUMNS, load_scenario,
                        metrics_row, write_table_csv, write_trace_csv)
from .engine import SimulationError, simulate
from .metrics import metrics_from_trace
from .model import ValidationFailure, build_fleet, validate_scenario
from .sweep import parse_sweep_spec, run_sweep
from .tactics import TacticError, parse_tactic_token, run_compare


def _with_sim_overrides(config, args):
    sim = config.sim
    if args.dt is not None:
        sim = replace(sim, dt_s=args.dt)
    if args.horizon is not None:
        sim = replace(sim, horizon_s=args.horizon)
    if sim is not config.sim:
        config = replace(config, sim=sim)
    return validate_scenario(config)


def _cmd_simulate(args) -> int:
    config = _with_sim_overrides(load_scenario(args.scenario), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = simulate(build_fleet(config), config)
    m = metrics_from_trace(trace)
    write_trace_csv(trace, out / "trace.csv", out / "events.csv")
    write_table_csv([{"scenario": config.name, **metrics_row(m)}],
                    ["scenario"] + METRIC_COLUMNS, out / "metrics.csv")
    ufls = "none" if m.ufls_time_s is None else f"{m.ufls_time_s:.3f} s"
    print(f"{config.name}: nadir {m.nadir_hz:.4f} Hz at {m.nadir_time_s:.3f} s, "
          f"settle {m.settle_hz:.4f} Hz, rocof {m.rocof_hz_per_s:.4f} Hz/s, "
          f"ufls {ufls}")
    print(f"wrote {out / 'trace.csv'}, {out / 'events.csv'}, {out / 'metrics.csv'}")
    return 0


def _slug(label: str) -> str:
    return label.lower().replace(":", "_")


def _cmd_compare(args) -> int:
    config = _with_sim_overrides(load_scenario(args.scenario), args)
    tactics = [parse_tactic_token(tok) for tok in args.tactics.split(",") if tok]
    result = run_compare(config, tactics)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table_csv(result.rows, ["tactic"] + METRIC_COLUMNS, out / "compare.csv")
    for label in result.labels:
        slug = _slug(label)
        write_trace_csv(result.traces[label], out / f"trace_{slug}.csv",
                        out / f"events_{slug}.csv")
    for row in result.rows:
        ufls = row["ufls_time_s"]
        ufls = "none" if ufls is None else f"{ufls:.3f} s"
        print(f"{row['tactic']:>12}: nadir {row['nadir_hz']:.4f} Hz, "
              f"settle {row['settle_hz']:.4f} Hz, ufls {ufls}")
    print(f"wrote {out / 'compare.csv'} and per-tactic traces")
    return 0


def _cmd_sweep(args) -> int:
    text = Path(args.sweepfile).read_text(encoding="utf-8")
    spec, jobs = parse_sweep_spec(text, load_scenario, source=args.sweepfile)
    if args.jobs is not None:
        jobs = args.jobs
    result = run_sweep(spec, jobs=jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table_csv(result.rows, result.columns, out / "sweep.csv")
    failures = sum(1 for r in result.rows if r.get("error"))
    print(f"evaluated {len(result.rows)} cells "
          f"({failures} failed), wrote {out / 'sweep.csv'}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridfreq",
        description="Primary frequency response simulation and tactic comparison")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one scenario, write trace CSVs")
    p_sim.add_argument("scenario", help="scenario file or bundled scenario name")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--dt", type=float, default=None, help="override step size, s")
    p_sim.add_argument("--horizon", type=float, default=None,
                       help="override horizon, s")
    p_sim.set_defaults(func=_cmd_simulate)

    p_cmp = sub.add_parser("compare", help="run a list of tactics on one scenario")
    p_cmp.add_argument("scenario", help="scenario file or bundled scenario name")
    p_cmp.add_argument("--tactics", required=True,
                       help="comma list, e.g. baseline,SG1,FRL,ES1:step")
    p_cmp.add_argument("--out", required=True, help="output directory")
    p_cmp.add_argument("--dt", type=float, default=None)
    p_cmp.add_argument("--horizon", type=float, default=None)
    p_cmp.set_defaults(func=_cmd_compare)

    p_sw = sub.add_parser("sweep", help="evaluate a parameter grid")
    p_sw.add_argument("sweepfile", help="sweep spec file")
    p_sw.add_argument("--out", required=True, help="output directory")
    p_sw.add_argument("--jobs", type=int, default=None,
                      help="parallel worker processes")
    p_sw.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationFailure, TacticError, SimulationError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
