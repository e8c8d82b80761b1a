"""Command line: run, sweep, gen-trace, profile."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config
from .experiment import rows_to_csv, run, sweep, write_csv, write_utilization_csv
from .kernel import SimulationError
from .workload import TraceParseError, generate_trace, locality_profile, parse_trace, write_trace


def _emit(rows, out):
    if out:
        write_csv(rows, out)
    else:
        sys.stdout.write(rows_to_csv(rows))


def cmd_run(args):
    cfg = load_config(args.config)
    wants_detail = args.event_log or args.util_out or args.counters
    if wants_detail and len(cfg.schemes) != 1:
        raise ConfigError("experiment.scheme", "--event-log/--util-out/--counters need exactly one scheme")

    def detail(name, system, result):
        if name != cfg.schemes[0]:
            return
        if args.event_log:
            system.sim.dump_log(args.event_log)
        if args.util_out:
            write_utilization_csv(system.interval_utilization(), args.util_out)
        if args.counters:
            print(system.engine.counters_dump(), file=sys.stderr)

    rows = run(cfg, on_system=detail if wants_detail else None, trace_events=bool(args.event_log))
    _emit(rows, args.out)
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config)
    _emit(sweep(cfg, args.axes), args.out)
    return 0


def cmd_gen_trace(args):
    cfg = load_config(args.config)
    if len(cfg.workloads) != 1 or cfg.workloads[0].workload is None:
        raise ConfigError("workload", "gen-trace needs exactly one generated workload")
    wl = cfg.workloads[0].workload
    header = "generated " + json.dumps(wl.to_dict(), sort_keys=True)
    n = write_trace(generate_trace(wl), args.out, header=header)
    print(f"wrote {n} records to {args.out}", file=sys.stderr)
    return 0


def cmd_profile(args):
    prof = locality_profile(parse_trace(args.trace))
    json.dump(prof.to_dict(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daemonsim",
                                     description="Disaggregated-memory data movement simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every scheme of a config and print metrics CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="metrics CSV path (default: stdout)")
    p.add_argument("--util-out", help="per-interval link utilization CSV")
    p.add_argument("--event-log", help="dump the executed-event log here")
    p.add_argument("--counters", action="store_true", help="print compute-engine counters to stderr")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run the cartesian product of axes")
    p.add_argument("--config", required=True)
    p.add_argument("--axes", required=True,
                   help="e.g. 'scheme=Remote,DaeMon;bandwidth_factor=1/2,1/4'")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-trace", help="write the configured workload as a trace file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("profile", help="locality statistics of a trace file")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TraceParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
