"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 a simulator
consistency check failed.
"""

from __future__ import annotations

import argparse
import os
import sys

from hmacsim import metrics as M
from hmacsim.experiments import PRESETS, compare, replicate, run_preset
from hmacsim.protocol.frames import ConfigError
from hmacsim.scenario import ScenarioParseError, ScenarioValidationError, default_scenario, load_scenario
from hmacsim.simcore.events import CausalityError
from hmacsim.simcore.topology import TopologyError
from hmacsim.simcore.traffic import TrafficError

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="base seed (replication i uses seed + i)")
    p.add_argument("--replications", "-r", type=int, help="number of replications")
    p.add_argument("--jobs", "-j", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hmacsim", description="H-MAC / S-MAC duty-cycled MAC simulator")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="replicate one scenario and print a summary CSV")
    p.add_argument("scenario", nargs="?", help="scenario file (defaults when omitted)")
    p.add_argument("--out", "-o", help="write run.csv (and the trace) here instead of stdout")
    p.add_argument("--trace", action="store_true", help="emit the event trace of the first replication")
    _common(p)

    p = sub.add_parser("preset", help="run one of the preset sweeps")
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--out", "-o", default=".", help="output directory")
    p.add_argument("--trace", action="store_true", help="emit one trace per sweep point")
    _common(p)

    p = sub.add_parser("compare", help="simulated means against closed-form predictions")
    p.add_argument("scenario", nargs="?", help="scenario file (defaults when omitted)")
    _common(p)
    return parser


SUMMARY_METRICS = (
    "mean_latency",
    "latency_per_hop",
    "throughput_pps",
    "throughput_ppf",
    "span_throughput_ppf",
    "energy_network_mj",
    "energy_per_node_mj",
    "success_ratio",
    "delivery_rate",
)


def summary_rows(scenario, summary: M.Summary) -> list[M.Row]:
    rows = []
    for name in SUMMARY_METRICS:
        value = getattr(summary, name)
        if value is None:
            continue
        rows.append(M.Row("scenario", 0, scenario.protocol, name, value, summary.stderr.get(name), summary.n_reps))
    return rows


def _scenario(path):
    sc = default_scenario() if path is None else load_scenario(path)
    return sc


def _cmd_run(args) -> int:
    sc = _scenario(args.scenario)
    ledgers, trace = replicate(sc, args.replications, args.seed, args.jobs, trace_first=args.trace)
    text = M.rows_to_csv(summary_rows(sc, M.summarize(ledgers)), SUMMARY_METRICS)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "run.csv"), "w", newline="") as fh:
            fh.write(text)
        if trace is not None:
            with open(os.path.join(args.out, "run.trace"), "w") as fh:
                fh.write(trace)
    else:
        sys.stdout.write(text)
        if trace is not None:
            sys.stderr.write(trace)
    return EXIT_OK


def _cmd_preset(args) -> int:
    kw = {"jobs": args.jobs, "trace": args.trace}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.replications is not None:
        kw["replications"] = args.replications
    for path in run_preset(args.name, args.out, **kw):
        print(path)
    return EXIT_OK


def _cmd_compare(args) -> int:
    sc = _scenario(args.scenario)
    result = compare(sc, args.replications, args.seed, args.jobs)
    print("metric,simulated,stderr,analytic,rel_error")
    for r in result.rows:
        print(f"{r.metric},{r.simulated!r},{r.stderr!r},{r.analytic!r},{r.rel_error!r}")
    for note in result.notices:
        print(f"notice: {note}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("hmacsim: a subcommand is required (run, preset, compare)")
        if args.replications is not None and args.replications < 1:
            raise UsageError("hmacsim: --replications must be at least 1")
        if args.jobs < 1:
            raise UsageError("hmacsim: --jobs must be at least 1")
        handler = {"run": _cmd_run, "preset": _cmd_preset, "compare": _cmd_compare}[args.command]
        return handler(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (ScenarioParseError, ScenarioValidationError, ConfigError, TopologyError, TrafficError) as e:
        print(f"hmacsim: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"hmacsim: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (AssertionError, CausalityError) as e:
        print(f"hmacsim: consistency check failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
